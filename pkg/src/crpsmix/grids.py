"""Grid-discretized distribution functions on a finite interval and the
CRPS loss evaluated exactly on that representation.

A CDF is stored by its values at the right cell edges z_s = a + s*delta,
s = 1..d, of a uniform grid on [a, b].  The score of a forecast F against
an outcome y is

    crps(F, y) = delta * sum_s (f_s - 1{z_s >= y})^2,

which is the step-function CRPS of the discretized game.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

logger = logging.getLogger(__name__)

#: CDF invariant violations up to this size are treated as float noise and
#: repaired by clamping; anything larger is rejected.
REPAIR_TOL = 1e-12


@dataclass(frozen=True)
class GridDomain:
    """Uniform grid of d cells on [a, b]."""

    a: float
    b: float
    d: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)):
            raise ValueError("interval endpoints must be finite")
        if not self.a < self.b:
            raise ValueError(f"need a < b, got [{self.a}, {self.b}]")
        if self.d < 1:
            raise ValueError(f"need at least one grid cell, got d={self.d}")

    @property
    def width(self) -> float:
        return self.b - self.a

    @property
    def delta(self) -> float:
        return (self.b - self.a) / self.d

    @cached_property
    def grid(self) -> np.ndarray:
        """Right cell edges z_1..z_d; the last edge is exactly b."""
        z = np.linspace(self.a, self.b, self.d + 1)[1:]
        z.flags.writeable = False
        return z

    def contains(self, y: float) -> bool:
        return self.a <= y <= self.b


def _check_outcome(domain: GridDomain, y: float) -> float:
    y = float(y)
    if not np.isfinite(y) or not domain.contains(y):
        raise ValueError(
            f"outcome {y} outside [{domain.a}, {domain.b}]; "
            "clip at ingestion before scoring"
        )
    return y


@dataclass(frozen=True, eq=False)
class GridCDF:
    """Piecewise-constant CDF: values f_1..f_d at the grid of `domain`,
    monotone non-decreasing with f_d = 1.

    Construction repairs violations within REPAIR_TOL by clamping and
    rejects anything larger.
    """

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.domain.d,):
            raise ValueError(
                f"expected {self.domain.d} CDF values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("CDF values must be finite")
        if vals.min() < -REPAIR_TOL or vals.max() > 1.0 + REPAIR_TOL:
            raise ValueError(
                f"CDF values outside [0, 1] by more than {REPAIR_TOL}"
            )
        if vals.size > 1:
            worst_drop = float(np.diff(vals).min())
            if worst_drop < -REPAIR_TOL:
                raise ValueError(
                    f"CDF not monotone: decrease of {-worst_drop:.3e} between cells"
                )
        if abs(vals[-1] - 1.0) > REPAIR_TOL:
            raise ValueError(f"CDF must end at 1, got {vals[-1]!r}")
        vals = np.maximum.accumulate(np.clip(vals, 0.0, 1.0))
        vals[-1] = 1.0
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    @property
    def d(self) -> int:
        return self.domain.d


def heaviside_cdf(domain: GridDomain, y: float) -> GridCDF:
    """Step CDF of the point mass at y: f_s = 1 iff z_s >= y."""
    y = _check_outcome(domain, y)
    return GridCDF(domain, (domain.grid >= y).astype(float))


def crps(forecast: GridCDF, y: float) -> float:
    """CRPS of the forecast against outcome y, in outcome units."""
    y = _check_outcome(forecast.domain, y)
    r = forecast.values - (forecast.domain.grid >= y)
    return forecast.domain.delta * float(r @ r)


def crps_rows(values: np.ndarray, domain: GridDomain, y: float) -> np.ndarray:
    """CRPS of several forecasts (rows of `values`) against one outcome."""
    y = _check_outcome(domain, y)
    r = np.atleast_2d(values) - (domain.grid >= y)
    return domain.delta * np.einsum("ij,ij->i", r, r)


def crps_grid_profile(forecast: GridCDF) -> np.ndarray:
    """CRPS of the forecast against every grid outcome z_1..z_d.

    One O(d) pass via prefix sums; entry k equals crps(forecast, z_k).
    Outcomes strictly between grid points share the indicator vector of
    the edge above them, so these d values cover all of [a, b].
    """
    v = forecast.values
    sq = np.cumsum(v * v)
    sq1 = np.cumsum((v - 1.0) ** 2)
    below = np.concatenate(([0.0], sq[:-1]))
    above = sq1[-1] - np.concatenate(([0.0], sq1[:-1]))
    return forecast.domain.delta * (below + above)


def quantile(forecast: GridCDF, tau: float) -> float:
    """Smallest grid point z_s with f_s >= tau (right-continuous inverse)."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"quantile level must lie in (0, 1), got {tau}")
    idx = int(np.searchsorted(forecast.values, tau, side="left"))
    return float(forecast.domain.grid[idx])


def empirical_cdf(samples, domain: GridDomain) -> GridCDF:
    """Empirical CDF of the samples on the grid: f_s = #(samples <= z_s)/n."""
    s = np.asarray(samples, dtype=float).ravel()
    if s.size == 0:
        raise ValueError("need at least one sample")
    if s.min() < domain.a or s.max() > domain.b:
        raise ValueError(
            f"samples outside [{domain.a}, {domain.b}] "
            f"(range [{s.min()}, {s.max()}])"
        )
    counts = np.searchsorted(np.sort(s), domain.grid, side="right")
    vals = counts / s.size
    vals[-1] = 1.0
    return GridCDF(domain, vals)


def clip_to_domain(domain: GridDomain, y: float) -> float:
    """Clip an ingested outcome into [a, b]; strays are logged, not fatal."""
    y = float(y)
    if y < domain.a or y > domain.b:
        logger.warning(
            "outcome %.6g outside [%g, %g]; clipped", y, domain.a, domain.b
        )
        return float(min(max(y, domain.a), domain.b))
    return y


def cdf_to_row(forecast: GridCDF) -> list:
    """Flatten to the d+3 column CSV row (a, b, d, f_1..f_d)."""
    dom = forecast.domain
    return [dom.a, dom.b, dom.d, *forecast.values.tolist()]


def cdf_from_row(row) -> GridCDF:
    vals = [float(x) for x in row]
    if len(vals) < 4:
        raise ValueError("CDF row needs at least 4 columns: a, b, d, values")
    a, b, d = vals[0], vals[1], int(vals[2])
    if len(vals) != d + 3:
        raise ValueError(f"CDF row for d={d} must have {d + 3} columns")
    return GridCDF(GridDomain(a, b, d), np.array(vals[3:]))
