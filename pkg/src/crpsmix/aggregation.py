"""Exponential-weights aggregation of forecasts.

Implements the substitution rule that turns expert forecasts and a weight
vector into an aggregated forecast dominating the weighted exponential
mixture of losses, for the unit-interval square loss and for grid CDFs
under CRPS, together with weighted-average aggregation, confidence
reweighting of sleeping experts, and the fixed-share mixing update.

All weight arithmetic is carried in log space; pools are rescaled after
every update so the largest weight is 1, which leaves every normalized
quantity unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .grids import REPAIR_TOL, GridCDF

#: The unit square loss (f - w)^2 on [0, 1] x {0, 1} admits aggregation at
#: learning rates up to 2; the pointwise CRPS rule always runs at this cap.
SQUARE_LOSS_ETA = 2.0

MODES = ("aa", "wa")


class AllExpertsAsleep(ValueError):
    """Every confidence is zero: there is no expert mass to aggregate."""


class SubstitutionError(RuntimeError):
    """The aggregation rule produced an invalid CDF beyond float noise,
    which indicates a bug rather than bad data."""


def aa_learning_rate(width: float) -> float:
    """Learning rate paired with the substitution rule on [a, b]: 2/(b-a)."""
    return 2.0 / width


def wa_learning_rate(width: float) -> float:
    """Learning rate paired with weighted averaging on [a, b]: 1/(2(b-a))."""
    return 1.0 / (2.0 * width)


@dataclass(frozen=True, eq=False)
class ExpertPool:
    """Unnormalized expert weights (kept as logs) plus the game parameters.

    alpha is the share mixed back toward the uniform start vector after
    each weight update; mode selects the aggregation rule the pool is
    meant for ("aa" substitution or "wa" averaging).
    """

    log_weights: np.ndarray
    eta: float
    alpha: float = 0.0
    mode: str = "aa"

    def __post_init__(self):
        lw = np.array(self.log_weights, dtype=float)
        if lw.ndim != 1 or lw.size < 1:
            raise ValueError("need at least one expert weight")
        if not np.all(np.isfinite(lw)):
            raise ValueError("log-weights must be finite (weights positive)")
        if not self.eta > 0:
            raise ValueError(f"learning rate must be positive, got {self.eta}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"mixing share must lie in [0, 1], got {self.alpha}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        lw.flags.writeable = False
        object.__setattr__(self, "log_weights", lw)

    @property
    def n(self) -> int:
        return self.log_weights.size

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @classmethod
    def uniform(cls, n, *, width=None, eta=None, alpha=0.0, mode="aa"):
        """Pool of n equal weights 1/n; eta defaults from mode and the
        outcome interval width."""
        if eta is None:
            if width is None:
                raise ValueError("need either eta or the interval width")
            eta = aa_learning_rate(width) if mode == "aa" else wa_learning_rate(width)
        return cls(np.full(n, -math.log(n)), eta, alpha, mode)

    @classmethod
    def from_weights(cls, weights, eta, alpha=0.0, mode="aa"):
        w = np.asarray(weights, dtype=float)
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        return cls(np.log(w), eta, alpha, mode)


def _as_confidence(p, n: int) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if p.shape != (n,):
        raise ValueError(f"expected {n} confidence values, got shape {p.shape}")
    if not np.all(np.isfinite(p)) or p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("confidences must lie in [0, 1]")
    return p


def _as_losses(losses, n: int) -> np.ndarray:
    l = np.asarray(losses, dtype=float)
    if l.shape != (n,):
        raise ValueError(f"expected {n} losses, got shape {l.shape}")
    if not np.all(np.isfinite(l)) or l.min() < 0.0:
        raise ValueError("losses must be finite and non-negative")
    return l


def normalized_weights(pool: ExpertPool) -> np.ndarray:
    """Probability vector q_i = w_i / sum_j w_j."""
    lw = pool.log_weights
    return np.exp(lw - logsumexp(lw))


def confidence_reweight(pool: ExpertPool, p) -> np.ndarray:
    """Probability vector proportional to p_i * w_i; experts with zero
    confidence get exactly zero mass."""
    p = _as_confidence(p, pool.n)
    if not np.any(p > 0):
        raise AllExpertsAsleep("all confidences are zero at this step")
    with np.errstate(divide="ignore"):
        lwp = pool.log_weights + np.log(p)
    q = np.exp(lwp - logsumexp(lwp))
    q[p == 0.0] = 0.0
    return q


def _check_probability(q, n: int) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (n,):
        raise ValueError(f"expected {n} expert weights, got shape {q.shape}")
    if q.min() < 0 or abs(q.sum() - 1.0) > 1e-9:
        raise ValueError("weights must form a probability vector")
    return q


def _check_source_eta(eta: float) -> float:
    if not 0.0 < eta <= SQUARE_LOSS_ETA:
        raise ValueError(
            f"square-loss aggregation needs 0 < eta <= {SQUARE_LOSS_ETA}, got {eta}"
        )
    return float(eta)


def _log_q(q: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(q)


def _wlogsumexp(exponents: np.ndarray, log_q: np.ndarray, axis=None) -> np.ndarray:
    """log sum_i q_i e^{a_i} with the weights given as logs, max-shifted.

    Safe for weights that are zero or denormal (log_q of -inf or ~ -745),
    which arise after long runs; at least one weight must be positive.
    """
    z = exponents + log_q
    m = np.max(z, axis=axis, keepdims=axis is not None)
    out = np.log(np.sum(np.exp(z - m), axis=axis))
    return out + (m.squeeze(axis) if axis is not None else m)


def substitute_square_aa(forecasts, q, eta: float) -> float:
    """Aggregated forecast in [0, 1] for the square loss against a binary
    outcome:

        f = 1/2 - (1/(2 eta)) * ln( sum_i q_i e^{-eta f_i^2}
                                   / sum_i q_i e^{-eta (1-f_i)^2} ).

    The result satisfies (f - w)^2 <= -(1/eta) ln sum_i q_i e^{-eta (f_i - w)^2}
    for both outcomes w.
    """
    eta = _check_source_eta(eta)
    f = np.asarray(forecasts, dtype=float)
    q = _check_probability(q, f.size)
    lq = _log_q(q)
    num = _wlogsumexp(-eta * f**2, lq)
    den = _wlogsumexp(-eta * (1.0 - f) ** 2, lq)
    out = 0.5 - (num - den) / (2.0 * eta)
    return float(min(max(out, 0.0), 1.0))


def _substitute_columns(matrix: np.ndarray, q: np.ndarray, eta: float) -> np.ndarray:
    """Column-by-column substitution over an (n_experts, d) matrix,
    without clipping."""
    lq = _log_q(q)[:, None]
    num = _wlogsumexp(-eta * matrix**2, lq, axis=0)
    den = _wlogsumexp(-eta * (1.0 - matrix) ** 2, lq, axis=0)
    return 0.5 - (num - den) / (2.0 * eta)


def substitute_vector_aa(forecast_matrix, q, eta: float) -> np.ndarray:
    """Componentwise substitution for d-dimensional square-loss forecasts.

    Applied to rows c_1..c_N it yields a vector f with
    e^{-(eta/d) L(f, y)} >= sum_i q_i e^{-(eta/d) L(c_i, y)} for every
    binary outcome vector y, where L(f, y) = sum_s (f^s - y^s)^2.
    """
    eta = _check_source_eta(eta)
    m = np.atleast_2d(np.asarray(forecast_matrix, dtype=float))
    q = _check_probability(q, m.shape[0])
    return np.clip(_substitute_columns(m, q, eta), 0.0, 1.0)


def _shared_domain(forecasts: Sequence[GridCDF]):
    if len(forecasts) == 0:
        raise ValueError("need at least one forecast")
    domain = forecasts[0].domain
    for f in forecasts[1:]:
        if f.domain != domain:
            raise ValueError("forecasts must share one grid domain")
    return domain


def _worst_cdf_violation(vals: np.ndarray) -> float:
    worst = max(float(vals.max() - 1.0), float(-vals.min()), abs(float(vals[-1]) - 1.0))
    if vals.size > 1:
        worst = max(worst, float(-np.diff(vals).min()))
    return worst


def substitute_crps_aa(forecasts: Sequence[GridCDF], q) -> GridCDF:
    """Aggregated CDF applying the square-loss substitution at every grid
    cell with the capped rate:

        F(u) = 1/2 - (1/4) ln( sum_i q_i e^{-2 F_i(u)^2}
                              / sum_i q_i e^{-2 (1-F_i(u))^2} ).

    The output is a valid CDF up to float noise; larger violations raise
    SubstitutionError because they indicate a broken rule, not bad data.
    """
    domain = _shared_domain(forecasts)
    q = _check_probability(q, len(forecasts))
    matrix = np.stack([f.values for f in forecasts])
    vals = _substitute_columns(matrix, q, SQUARE_LOSS_ETA)
    worst = _worst_cdf_violation(vals)
    if worst > REPAIR_TOL:
        raise SubstitutionError(
            f"aggregated CDF violates invariants by {worst:.3e} (> {REPAIR_TOL})"
        )
    return GridCDF(domain, vals)


def combine_wa(forecasts: Sequence[GridCDF], q) -> GridCDF:
    """Pointwise convex combination of the forecast CDFs."""
    domain = _shared_domain(forecasts)
    q = _check_probability(q, len(forecasts))
    matrix = np.stack([f.values for f in forecasts])
    return GridCDF(domain, q @ matrix)


def superprediction(losses, q, eta: float) -> float:
    """g = -(1/eta) ln sum_i q_i e^{-eta l_i}, the benchmark an aggregated
    forecast must dominate; always between min_i l_i and sum_i q_i l_i."""
    if not eta > 0:
        raise ValueError(f"learning rate must be positive, got {eta}")
    l = np.asarray(losses, dtype=float)
    q = _check_probability(q, l.size)
    return float(-_wlogsumexp(-eta * l, _log_q(q)) / eta)


def update_weights(pool: ExpertPool, losses) -> ExpertPool:
    """w_i <- w_i e^{-eta l_i}, then rescaled so the largest weight is 1."""
    l = _as_losses(losses, pool.n)
    lw = pool.log_weights - pool.eta * l
    return replace(pool, log_weights=lw - lw.max())


def update_weights_confidence(
    pool: ExpertPool, p, expert_losses, learner_loss: float
) -> ExpertPool:
    """Virtual-expert update: expert i is charged p_i l_i + (1-p_i) h,
    its loss discounted toward the learner's by its confidence."""
    p = _as_confidence(p, pool.n)
    l = _as_losses(expert_losses, pool.n)
    h = float(learner_loss)
    if not np.isfinite(h) or h < 0:
        raise ValueError(f"learner loss must be finite and non-negative, got {h}")
    lw = pool.log_weights - pool.eta * (p * l + (1.0 - p) * h)
    return replace(pool, log_weights=lw - lw.max())


def mix_past_posteriors(pool: ExpertPool) -> ExpertPool:
    """Fixed-share mix toward the uniform start vector:
    w_i <- alpha/n + (1-alpha) w_i / sum_j w_j.  Output sums to 1 with
    floor alpha/n; alpha = 0 is plain normalization."""
    lw = pool.log_weights
    if pool.alpha == 0.0:
        return replace(pool, log_weights=lw - logsumexp(lw))
    q = np.exp(lw - logsumexp(lw))
    mixed = pool.alpha / pool.n + (1.0 - pool.alpha) * q
    return replace(pool, log_weights=np.log(mixed))
