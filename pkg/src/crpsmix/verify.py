"""Headless property suites: every theoretical guarantee the library rests
on, checked on randomized inputs with machine-readable failure witnesses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import product

import numpy as np

from .aggregation import (
    combine_wa,
    substitute_crps_aa,
    substitute_vector_aa,
    wa_learning_rate,
)
from .data import default_generators, rotating_leader_schedule, synth_stream
from .experts import triangular_cdf
from .game import GameConfig, OnlineGame, run_square_loss_game, telescoping_gap
from .grids import GridCDF, GridDomain, crps_grid_profile
from .rng import spawn_rngs

MIX_TOL = 1e-9
ENUM_TOL = 1e-10


@dataclass
class CheckResult:
    name: str
    passed: bool
    cases: int
    detail: str = ""
    witness: dict | None = None

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        msg = f"{status}  {self.name} ({self.cases} cases)"
        if self.detail:
            msg += f": {self.detail}"
        return msg


def random_grid_cdf(rng: np.random.Generator, domain: GridDomain) -> GridCDF:
    """Random monotone CDF: diffuse half the time, steppy (few jumps,
    including point masses) otherwise — the steppy ones stress the
    aggregation rules far harder."""
    d = domain.d
    if rng.random() < 0.5:
        vals = np.sort(rng.random(d))
        vals[-1] = 1.0
    else:
        jumps = np.zeros(d)
        pos = rng.integers(0, d, size=int(rng.integers(1, 6)))
        np.add.at(jumps, pos, rng.random(pos.size) + 1e-3)
        vals = np.cumsum(jumps)
        vals /= vals[-1]
        vals[-1] = 1.0
    return GridCDF(domain, vals)


def random_weights(rng: np.random.Generator, n: int) -> np.ndarray:
    """Probability vector, frequently heavily skewed."""
    q = rng.dirichlet(np.full(n, rng.uniform(0.1, 2.0)))
    q /= q.sum()
    return q


def _mixability_case(rng, aggregate, eta_for):
    """Worst slack of e^{-eta h(y)} >= sum_i q_i e^{-eta l_i(y)} over all
    grid outcomes, for one random pool of forecasts and weights."""
    n = int(rng.integers(2, 9))
    d = int(rng.choice([16, 256, 1024]))
    a = float(rng.uniform(-5, 5))
    b = a + float(rng.uniform(0.5, 20))
    domain = GridDomain(a, b, d)
    forecasts = [random_grid_cdf(rng, domain) for _ in range(n)]
    q = random_weights(rng, n)
    eta = eta_for(domain.width)
    combined = aggregate(forecasts, q)
    lhs = np.exp(-eta * crps_grid_profile(combined))
    rhs = np.exp(-eta * np.stack([crps_grid_profile(f) for f in forecasts]))
    slack = (q @ rhs) - lhs
    worst = int(np.argmax(slack))
    return float(slack[worst]), {
        "n": n,
        "d": d,
        "interval": [a, b],
        "eta": eta,
        "outcome_index": worst,
        "weights": q.tolist(),
    }


def _run_mixability(name, seed, cases, aggregate, eta_for) -> CheckResult:
    worst = -np.inf
    witness = None
    for rng in spawn_rngs(seed, cases):
        slack, info = _mixability_case(rng, aggregate, eta_for)
        if slack > worst:
            worst, witness = slack, info
    passed = worst <= MIX_TOL
    detail = f"worst slack {worst:.3e} (tol {MIX_TOL:g})"
    return CheckResult(name, passed, cases, detail, None if passed else witness)


def check_crps_mixability(seed=0, cases=100, aggregate=substitute_crps_aa) -> CheckResult:
    """Substitution output dominates the exponential loss mixture at
    eta = 2/(b-a), for every grid outcome."""
    return _run_mixability(
        "crps substitution mixability", seed, cases, aggregate, lambda w: 2.0 / w
    )


def check_wa_exp_concavity(seed=0, cases=100) -> CheckResult:
    """Weighted averaging satisfies the same inequality at eta = 1/(2(b-a))."""
    return _run_mixability(
        "weighted-average exp-concavity", seed, cases, combine_wa, wa_learning_rate
    )


def check_vector_mixability(seed=0, cases=20) -> CheckResult:
    """Componentwise substitution beats the mixture for every binary
    outcome vector (exhaustive over {0,1}^d, d <= 10 here)."""
    worst = -np.inf
    witness = None
    for rng in spawn_rngs(seed, cases):
        n = int(rng.integers(2, 5))
        d = int(rng.integers(1, 11))
        eta = 2.0
        m = rng.random((n, d))
        q = random_weights(rng, n)
        f = substitute_vector_aa(m, q, eta)
        for bits in product((0.0, 1.0), repeat=d):
            y = np.array(bits)
            lhs = math.exp(-(eta / d) * float(((f - y) ** 2).sum()))
            rhs = float(q @ np.exp(-(eta / d) * ((m - y) ** 2).sum(axis=1)))
            slack = rhs - lhs
            if slack > worst:
                worst = slack
                witness = {"n": n, "d": d, "outcome": list(bits), "weights": q.tolist()}
    passed = worst <= ENUM_TOL
    return CheckResult(
        "vector substitution mixability",
        passed,
        cases,
        f"worst slack {worst:.3e} (tol {ENUM_TOL:g})",
        None if passed else witness,
    )


def check_square_loss_regret(seed=0, cases=50) -> CheckResult:
    """Square-loss game regret stays below ln(n)/eta on random adversarial
    streams at every prefix."""
    worst = -np.inf
    witness = None
    for rng in spawn_rngs(seed, cases):
        n = int(rng.integers(2, 6))
        steps = int(rng.integers(20, 80))
        eta = float(rng.uniform(0.2, 2.0))
        f = rng.random((steps, n))
        y = rng.integers(0, 2, size=steps).astype(float)
        log = run_square_loss_game(f, y, eta)
        excess = float((log.regret().min(axis=1) - log.bound).max())
        if excess > worst:
            worst = excess
            witness = {"n": n, "steps": steps, "eta": eta}
    passed = worst <= MIX_TOL
    return CheckResult(
        "square-loss regret bound",
        passed,
        cases,
        f"worst excess {worst:.3e}",
        None if passed else witness,
    )


def check_crps_game_bounds(seed=0, steps=1500, d=256) -> CheckResult:
    """On a rotating-leader synthetic stream with full confidence and no
    mixing: the substitution run obeys the ((b-a)/2) ln N regret bound and
    the per-prefix telescoping bound; the averaging run obeys 2(b-a) ln N."""
    domain = GridDomain(0.0, 1.0, d)
    gens = default_generators()
    schedule = rotating_leader_schedule(steps, 3, 6)
    outcomes = synth_stream(gens, schedule, steps, seed)
    cdfs = [triangular_cdf(g, domain) for g in gens]

    problems = []
    for mode in ("aa", "wa"):
        game = OnlineGame(GameConfig(domain, mode=mode, alpha=0.0), 3)
        for y in outcomes:
            game.step(cdfs, y)
        log = game.log
        regret = log.regret().min(axis=1)  # vs the best expert, per prefix
        if float((regret - log.bound).max()) > MIX_TOL:
            problems.append(f"{mode} regret exceeds ln(N)/eta")
        if mode == "aa":
            gap = telescoping_gap(log)
            budget = 1e-8 * np.arange(1, steps + 1)
            if np.any(gap > budget):
                problems.append("telescoping bound violated")
    passed = not problems
    return CheckResult(
        "synthetic-stream regret bounds",
        passed,
        2,
        "; ".join(problems) if problems else f"T={steps}",
        None if passed else {"seed": seed, "steps": steps},
    )


def check_discounted_regret(seed=0, cases=40) -> CheckResult:
    """Confidence-weighted runs keep every expert's discounted regret below
    ln(N)/eta at every prefix, for random confidence patterns including
    binary sleeping and all-asleep steps."""
    worst = -np.inf
    witness = None
    for rng in spawn_rngs(seed, cases):
        n = int(rng.integers(2, 6))
        steps = int(rng.integers(20, 60))
        d = 16
        domain = GridDomain(0.0, 1.0, d)
        mode = "aa" if rng.random() < 0.5 else "wa"
        game = OnlineGame(GameConfig(domain, mode=mode, alpha=0.0), n)
        for _ in range(steps):
            forecasts = [random_grid_cdf(rng, domain) for _ in range(n)]
            style = rng.random()
            if style < 0.1:
                p = np.zeros(n)  # all asleep: learner falls back to uniform
            elif style < 0.5:
                p = rng.integers(0, 2, size=n).astype(float)
            else:
                p = rng.random(n)
            game.step(forecasts, float(rng.random()), p)
        log = game.log
        excess = float((log.discounted_regret().max(axis=0) - log.bound).max())
        if excess > worst:
            worst = excess
            witness = {"n": n, "steps": steps, "mode": mode}
    passed = worst <= MIX_TOL
    return CheckResult(
        "discounted regret bound",
        passed,
        cases,
        f"worst excess {worst:.3e}",
        None if passed else witness,
    )


def run_all(seed: int = 0, cases: int = 100) -> list[CheckResult]:
    if cases < 1:
        raise ValueError("case count must be positive")
    small = max(1, cases // 5)
    return [
        check_crps_mixability(seed, cases),
        check_wa_exp_concavity(seed + 1, cases),
        check_vector_mixability(seed + 2, small),
        check_square_loss_regret(seed + 3, max(1, cases // 2)),
        check_crps_game_bounds(seed + 4),
        check_discounted_regret(seed + 5, max(1, cases // 2)),
    ]
