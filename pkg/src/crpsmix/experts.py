"""Forecasting experts: fixed triangular densities, bivariate Gaussian
mixtures conditioned on temperature, and piecewise-linear confidence
schedules for specialized experts."""

from __future__ import annotations

from dataclasses import dataclass
import numpy as np
from scipy.special import logsumexp, ndtr

from .grids import GridCDF, GridDomain
from .rng import rng_from_seed

EM_TOL = 1e-8
EM_MAX_ITER = 500
COV_RIDGE = 1e-6  # times the per-dimension data variance


class DegenerateFit(RuntimeError):
    """EM cannot proceed: the data carry no usable spread."""


# ---------------------------------------------------------------------------
# Triangular experts
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TriangularExpert:
    """Fixed triangular density with the given peak and support."""

    peak: float
    left: float
    right: float

    def __post_init__(self):
        if not self.left < self.peak < self.right:
            raise ValueError(
                f"need left < peak < right, got ({self.left}, {self.peak}, {self.right})"
            )

    def cdf_at(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        L, P, R = self.left, self.peak, self.right
        span = R - L
        out = np.zeros_like(u)
        rising = (u > L) & (u <= P)
        falling = (u > P) & (u < R)
        out[rising] = (u[rising] - L) ** 2 / (span * (P - L))
        out[falling] = 1.0 - (R - u[falling]) ** 2 / (span * (R - P))
        out[u >= R] = 1.0
        return out


def triangular_cdf(expert: TriangularExpert, domain: GridDomain) -> GridCDF:
    """Exact triangular CDF sampled at the grid points."""
    if expert.left < domain.a or expert.right > domain.b:
        raise ValueError(
            f"support [{expert.left}, {expert.right}] outside "
            f"[{domain.a}, {domain.b}]"
        )
    vals = expert.cdf_at(domain.grid)
    vals[-1] = 1.0
    return GridCDF(domain, vals)


# ---------------------------------------------------------------------------
# Gaussian mixtures over (temperature, load)
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Gmm2D:
    """Gaussian mixture over (temperature, load) pairs, 1 to 3 components."""

    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, 2), columns (temperature, load)
    covs: np.ndarray  # (k, 2, 2)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        m = np.array(self.means, dtype=float)
        c = np.array(self.covs, dtype=float)
        k = w.size
        if not 1 <= k <= 3:
            raise ValueError(f"component count must be 1..3, got {k}")
        if m.shape != (k, 2) or c.shape != (k, 2, 2):
            raise ValueError("means must be (k, 2) and covariances (k, 2, 2)")
        if np.any(w <= 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("component weights must be positive and sum to 1")
        dets = c[:, 0, 0] * c[:, 1, 1] - c[:, 0, 1] * c[:, 1, 0]
        if np.any(c[:, 0, 0] <= 0) or np.any(c[:, 1, 1] <= 0) or np.any(dets <= 0):
            raise ValueError("covariances must be positive definite")
        if np.max(np.abs(c[:, 0, 1] - c[:, 1, 0])) > 1e-9 * (1 + np.abs(c).max()):
            raise ValueError("covariances must be symmetric")
        for arr in (w, m, c):
            arr.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "covs", c)

    @property
    def k(self) -> int:
        return self.weights.size

    def to_text(self) -> str:
        """k on the first line, then one line per component:
        weight, 2 means, 3 covariance entries (tt, tl, ll)."""
        lines = [str(self.k)]
        for j in range(self.k):
            c = self.covs[j]
            fields = [self.weights[j], *self.means[j], c[0, 0], c[0, 1], c[1, 1]]
            lines.append(" ".join(repr(float(x)) for x in fields))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "Gmm2D":
        lines = [ln for ln in text.strip().splitlines() if ln.strip()]
        k = int(lines[0])
        if len(lines) != k + 1:
            raise ValueError(f"expected {k} component lines, got {len(lines) - 1}")
        w, m, c = [], [], []
        for ln in lines[1:]:
            vals = [float(x) for x in ln.split()]
            if len(vals) != 6:
                raise ValueError("component line needs 6 fields")
            w.append(vals[0])
            m.append(vals[1:3])
            c.append([[vals[3], vals[4]], [vals[4], vals[5]]])
        return cls(np.array(w), np.array(m), np.array(c))


def _log_gauss2(points: np.ndarray, mean: np.ndarray, cov: np.ndarray) -> np.ndarray:
    """Log density of a bivariate normal at each row of `points`."""
    det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
    if det <= 0:
        raise DegenerateFit("covariance lost positive definiteness")
    d = points - mean
    # explicit 2x2 inverse
    quad = (
        cov[1, 1] * d[:, 0] ** 2
        - 2.0 * cov[0, 1] * d[:, 0] * d[:, 1]
        + cov[0, 0] * d[:, 1] ** 2
    ) / det
    return -np.log(2.0 * np.pi) - 0.5 * np.log(det) - 0.5 * quad


def _kmeanspp_centers(pts: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    centers = [pts[rng.integers(len(pts))]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((pts - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            raise DegenerateFit("all points identical; cannot seed components")
        centers.append(pts[rng.choice(len(pts), p=d2 / total)])
    return np.array(centers)


def _m_step(pts, resp, ridge):
    nk = resp.sum(axis=0)
    if np.any(nk < 1e-10):
        raise DegenerateFit("a mixture component collapsed to zero mass")
    weights = nk / len(pts)
    means = (resp.T @ pts) / nk[:, None]
    covs = np.empty((resp.shape[1], 2, 2))
    for j in range(resp.shape[1]):
        d = pts - means[j]
        cov = (resp[:, j, None] * d).T @ d / nk[j]
        cov[0, 0] += ridge[0]
        cov[1, 1] += ridge[1]
        covs[j] = 0.5 * (cov + cov.T)
    return weights, means, covs


def fit_gmm_em(points, k: int, seed: int, *, return_history: bool = False):
    """Fit a k-component bivariate Gaussian mixture by EM.

    Seeding is k-means++ style from the given seed, so the fit is
    deterministic.  Iterates until the log-likelihood improves by less
    than EM_TOL or EM_MAX_ITER rounds; the log-likelihood must not
    decrease between rounds (a decrease beyond float noise raises
    DegenerateFit).  Covariances carry a ridge of COV_RIDGE times the
    per-dimension data variance.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("points must be an (n, 2) array of (temp, load) pairs")
    if k not in (1, 2, 3):
        raise ValueError(f"component count must be 1, 2 or 3, got {k}")
    if len(pts) < 10 * k:
        raise ValueError(f"need at least {10 * k} points to fit k={k}, got {len(pts)}")
    data_var = pts.var(axis=0)
    if np.all(data_var < 1e-12):
        raise DegenerateFit("all points identical")
    ridge = COV_RIDGE * np.maximum(data_var, 1e-12)

    rng = rng_from_seed(seed)
    centers = _kmeanspp_centers(pts, k, rng)
    d2 = np.stack([np.sum((pts - c) ** 2, axis=1) for c in centers], axis=1)
    resp = np.zeros((len(pts), k))
    resp[np.arange(len(pts)), d2.argmin(axis=1)] = 1.0
    weights, means, covs = _m_step(pts, resp, ridge)

    history = []
    prev_ll = -np.inf
    for _ in range(EM_MAX_ITER):
        log_joint = np.stack(
            [np.log(weights[j]) + _log_gauss2(pts, means[j], covs[j]) for j in range(k)],
            axis=1,
        )
        row_ll = logsumexp(log_joint, axis=1)
        ll = float(row_ll.sum())
        if ll < prev_ll - 1e-9 * max(1.0, abs(prev_ll)):
            raise DegenerateFit(
                f"log-likelihood decreased ({prev_ll} -> {ll}); fit is unstable"
            )
        history.append(ll)
        if ll - prev_ll < EM_TOL:
            break
        prev_ll = ll
        resp = np.exp(log_joint - row_ll[:, None])
        weights, means, covs = _m_step(pts, resp, ridge)

    model = Gmm2D(weights, means, covs)
    if return_history:
        return model, np.array(history)
    return model


def conditional_load_mixture(g: Gmm2D, temp: float):
    """Posterior component weights and per-component (mean, variance) of
    load given the temperature, by exact bivariate-normal conditioning."""
    mu_t, mu_l = g.means[:, 0], g.means[:, 1]
    s_tt, s_tl, s_ll = g.covs[:, 0, 0], g.covs[:, 0, 1], g.covs[:, 1, 1]
    log_dens = -0.5 * np.log(2.0 * np.pi * s_tt) - 0.5 * (temp - mu_t) ** 2 / s_tt
    log_post = np.log(g.weights) + log_dens
    post = np.exp(log_post - logsumexp(log_post))
    cond_mean = mu_l + s_tl / s_tt * (temp - mu_t)
    cond_var = s_ll - s_tl**2 / s_tt
    return post, cond_mean, cond_var


def conditional_load_cdf(g: Gmm2D, temp: float, domain: GridDomain) -> GridCDF:
    """Load CDF given the temperature, evaluated on the grid.  Mixture mass
    outside [a, b] is assigned to the endpoints."""
    temp = float(temp)
    if not np.isfinite(temp):
        raise ValueError(f"temperature must be finite, got {temp}")
    post, mean, var = conditional_load_mixture(g, temp)
    sd = np.sqrt(np.maximum(var, 1e-300))
    vals = post @ ndtr((domain.grid[None, :] - mean[:, None]) / sd[:, None])
    vals[-1] = 1.0
    return GridCDF(domain, vals)


# ---------------------------------------------------------------------------
# Confidence schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConfidenceSchedule:
    """Confidence as a function of the time step: 1 on each block's plateau,
    linear over its entry/exit ramps, 0 elsewhere.

    Blocks are (plateau_start, plateau_end, ramp_up, ramp_down) with the
    plateau endpoints included; overlapping blocks combine by maximum.
    A periodic schedule wraps modulo `period`.
    """

    blocks: tuple[tuple[float, float, float, float], ...]
    period: float | None = None

    def __post_init__(self):
        blocks = tuple(tuple(float(x) for x in blk) for blk in self.blocks)
        for ps, pe, ru, rd in blocks:
            if pe < ps:
                raise ValueError(f"plateau end {pe} before start {ps}")
            if ru < 0 or rd < 0:
                raise ValueError("ramp lengths must be non-negative")
        if self.period is not None and not self.period > 0:
            raise ValueError("period must be positive")
        object.__setattr__(self, "blocks", blocks)

    def at(self, t: float) -> float:
        if t < 0:
            raise ValueError(f"time step must be non-negative, got {t}")
        if self.period is not None:
            t = t % self.period
            candidates = (t - self.period, t, t + self.period)
        else:
            candidates = (t,)
        best = 0.0
        for ps, pe, ru, rd in self.blocks:
            for x in candidates:
                best = max(best, _block_value(x, ps, pe, ru, rd))
        return best


def _block_value(x, ps, pe, ru, rd) -> float:
    if ps <= x <= pe:
        return 1.0
    if ru > 0 and ps - ru <= x < ps:
        return (x - (ps - ru)) / ru
    if rd > 0 and pe < x <= pe + rd:
        return 1.0 - (x - pe) / rd
    return 0.0


def combined_confidence(
    season: ConfidenceSchedule, day: ConfidenceSchedule, t: float
) -> float:
    """Seasonal and daily confidences are simply multiplied."""
    return season.at(t) * day.at(t)

