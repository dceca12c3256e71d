"""Online aggregation games: drive the forecast/outcome loop, record
losses and weights, and report regrets against their theoretical bounds."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .aggregation import (
    AllExpertsAsleep,
    ExpertPool,
    combine_wa,
    confidence_reweight,
    mix_past_posteriors,
    normalized_weights,
    substitute_crps_aa,
    substitute_square_aa,
    update_weights,
    update_weights_confidence,
)
from .grids import GridCDF, GridDomain, crps, crps_rows


@dataclass(frozen=True)
class GameConfig:
    """Parameters of one aggregation run; eta defaults from the mode and
    the outcome interval (2/(b-a) for "aa", 1/(2(b-a)) for "wa")."""

    domain: GridDomain
    mode: str = "aa"
    eta: float | None = None
    alpha: float = 0.0
    confidence_enabled: bool = True

    def __post_init__(self):
        if self.mode not in ("aa", "wa"):
            raise ValueError(f"mode must be 'aa' or 'wa', got {self.mode!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.eta is None:
            w = self.domain.width
            object.__setattr__(
                self, "eta", 2.0 / w if self.mode == "aa" else 1.0 / (2.0 * w)
            )
        elif not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")


@dataclass
class GameLog:
    """Per-step record of one run: outcomes, losses, confidences, and the
    normalized weight snapshot used for each forecast."""

    n: int
    eta: float
    outcomes: list[float] = field(default_factory=list)
    learner_losses: list[float] = field(default_factory=list)
    expert_losses: list[np.ndarray] = field(default_factory=list)
    confidences: list[np.ndarray] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)

    def append(self, y, h, losses, p, q):
        self.outcomes.append(float(y))
        self.learner_losses.append(float(h))
        self.expert_losses.append(np.asarray(losses, dtype=float))
        self.confidences.append(np.asarray(p, dtype=float))
        self.weights.append(np.asarray(q, dtype=float))

    @property
    def steps(self) -> int:
        return len(self.outcomes)

    @property
    def bound(self) -> float:
        """Time-independent regret budget ln(n)/eta."""
        return math.log(self.n) / self.eta

    def learner_cumulative(self) -> np.ndarray:
        return np.cumsum(self.learner_losses)

    def expert_cumulative(self) -> np.ndarray:
        return np.cumsum(np.asarray(self.expert_losses), axis=0)

    def regret(self) -> np.ndarray:
        """(steps, n) prefix regrets H_t - L^i_t."""
        return self.learner_cumulative()[:, None] - self.expert_cumulative()

    def discounted_regret(self) -> np.ndarray:
        """(steps, n) prefix sums of p_i (h - l_i)."""
        h = np.asarray(self.learner_losses)[:, None]
        l = np.asarray(self.expert_losses)
        p = np.asarray(self.confidences)
        return np.cumsum(p * (h - l), axis=0)

    def to_csv(self, path) -> None:
        """One row per step: t, y, h, l_1..l_n, p_1..p_n, q_1..q_n, D_1..D_n."""
        n = self.n
        header = (
            ["t", "y", "h"]
            + [f"l_{i + 1}" for i in range(n)]
            + [f"p_{i + 1}" for i in range(n)]
            + [f"q_{i + 1}" for i in range(n)]
            + [f"D_{i + 1}" for i in range(n)]
        )
        disc = self.discounted_regret()
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            for t in range(self.steps):
                row = [t + 1, repr(self.outcomes[t]), repr(self.learner_losses[t])]
                row += [repr(float(x)) for x in self.expert_losses[t]]
                row += [repr(float(x)) for x in self.confidences[t]]
                row += [repr(float(x)) for x in self.weights[t]]
                row += [repr(float(x)) for x in disc[t]]
                writer.writerow(row)


class OnlineGame:
    """Sequential aggregation of CDF forecasts under CRPS.

    Each step: reweight experts by confidence, aggregate (substitution for
    "aa", averaging for "wa"), score everyone against the outcome, charge
    the virtual-expert update, then mix toward the uniform start vector.
    When every expert sleeps the learner forecasts from uniform weights
    and skips that step's weight update.
    """

    def __init__(self, config: GameConfig, n_experts: int):
        self.config = config
        self.pool = ExpertPool.uniform(
            n_experts,
            eta=config.eta,
            alpha=config.alpha,
            mode=config.mode,
        )
        self.log = GameLog(n_experts, config.eta)

    def step(self, forecasts, outcome, confidences=None) -> GridCDF:
        cfg = self.config
        n = self.pool.n
        if len(forecasts) != n:
            raise ValueError(f"expected {n} forecasts, got {len(forecasts)}")
        for f in forecasts:
            if f.domain != cfg.domain:
                raise ValueError("forecast domain does not match the game domain")
        if confidences is None or not cfg.confidence_enabled:
            p = np.ones(n)
        else:
            p = np.asarray(confidences, dtype=float)

        asleep = False
        try:
            q = confidence_reweight(self.pool, p)
        except AllExpertsAsleep:
            q = np.full(n, 1.0 / n)
            asleep = True

        if cfg.mode == "aa":
            forecast = substitute_crps_aa(forecasts, q)
        else:
            forecast = combine_wa(forecasts, q)

        y = float(outcome)
        if not cfg.domain.contains(y):
            raise ValueError(
                f"outcome {y} outside [{cfg.domain.a}, {cfg.domain.b}]; "
                "clip at ingestion"
            )
        h = crps(forecast, y)
        losses = crps_rows(np.stack([f.values for f in forecasts]), cfg.domain, y)
        if not np.isfinite(h) or not np.all(np.isfinite(losses)):
            raise RuntimeError(
                f"non-finite loss at step {self.log.steps + 1}: h={h}, l={losses}"
            )

        snapshot = normalized_weights(self.pool)
        if not asleep:
            self.pool = update_weights_confidence(self.pool, p, losses, h)
            self.pool = mix_past_posteriors(self.pool)
        self.log.append(y, h, losses, p, snapshot)
        return forecast


@dataclass(frozen=True)
class RegretReport:
    """Final losses and regrets of a run next to the ln(n)/eta budget."""

    steps: int
    learner_loss: float
    expert_losses: np.ndarray
    final_regret: np.ndarray
    final_discounted_regret: np.ndarray
    max_discounted_regret: np.ndarray  # per expert, over all prefixes
    bound: float
    bound_satisfied: np.ndarray  # per expert

    @property
    def all_bounds_satisfied(self) -> bool:
        return bool(np.all(self.bound_satisfied))


def regret_report(log: GameLog, tol: float = 1e-9) -> RegretReport:
    if log.steps == 0:
        raise ValueError("empty game log")
    disc = log.discounted_regret()
    peak = disc.max(axis=0)
    return RegretReport(
        steps=log.steps,
        learner_loss=float(log.learner_cumulative()[-1]),
        expert_losses=log.expert_cumulative()[-1],
        final_regret=log.regret()[-1],
        final_discounted_regret=disc[-1],
        max_discounted_regret=peak,
        bound=log.bound,
        bound_satisfied=peak <= log.bound + tol,
    )


def telescoping_gap(log: GameLog) -> np.ndarray:
    """H_T + (1/eta) ln W_{T+1} per prefix, where W_{T+1} is the weight sum
    from uniform starts after the plain exponential update.  Non-positive
    (up to float accumulation) for substitution runs with full confidence
    and no mixing."""
    cum = log.expert_cumulative()
    log_w = logsumexp(-log.eta * cum - math.log(log.n), axis=1)
    return log.learner_cumulative() + log_w / log.eta


def run_square_loss_game(expert_forecasts, outcomes, eta: float) -> GameLog:
    """Reference game for the scalar square loss on binary outcomes: the
    learner aggregates by substitution and updates weights by the plain
    exponential rule.  Regret stays below ln(n)/eta."""
    f = np.asarray(expert_forecasts, dtype=float)
    if f.ndim != 2:
        raise ValueError("expert forecasts must be a (steps, n) matrix")
    if f.min() < 0 or f.max() > 1:
        raise ValueError("square-loss forecasts must lie in [0, 1]")
    y = np.asarray(outcomes, dtype=float)
    if y.shape != (f.shape[0],):
        raise ValueError("need one outcome per forecast row")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("square-loss outcomes must be binary")
    if not 0.0 < eta <= 2.0:
        raise ValueError(f"square loss admits 0 < eta <= 2, got {eta}")

    steps, n = f.shape
    pool = ExpertPool.uniform(n, eta=eta, mode="aa")
    log = GameLog(n, eta)
    ones = np.ones(n)
    for t in range(steps):
        q = normalized_weights(pool)
        pred = substitute_square_aa(f[t], q, eta)
        h = (pred - y[t]) ** 2
        losses = (f[t] - y[t]) ** 2
        pool = update_weights(pool, losses)
        log.append(y[t], h, losses, ones, q)
    return log
