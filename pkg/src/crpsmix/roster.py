"""The 21-expert roster for hourly load forecasting: one anytime expert,
four seasonal experts, and sixteen season-by-day-period experts, each a
temperature-conditioned Gaussian mixture with a calendar confidence
schedule."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .data import (
    DAY_PERIOD_NAMES,
    HOURS_PER_YEAR,
    SEASON_NAMES,
    calendar_segments,
    day_period_hour_interval,
    hour_of_year,
    season_hour_interval,
)
from .experts import (
    ConfidenceSchedule,
    DegenerateFit,
    Gmm2D,
    conditional_load_cdf,
    fit_gmm_em,
)
from .grids import GridCDF, GridDomain

logger = logging.getLogger(__name__)

DAY_RAMP_HOURS = 2.0  # confidence decrease of a daily expert
_FORECAST_CACHE_MAX = 512


@dataclass(frozen=True, eq=False)
class LoadExpert:
    """A fitted temperature-to-load model plus its area of competence."""

    name: str
    model: Gmm2D
    season_schedule: ConfidenceSchedule | None = None  # over hour-of-year
    day_schedule: ConfidenceSchedule | None = None  # over hour-of-day
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def confidence(self, ts: datetime) -> float:
        c = 1.0
        if self.season_schedule is not None:
            c *= self.season_schedule.at(hour_of_year(ts))
        if self.day_schedule is not None:
            c *= self.day_schedule.at(ts.hour)
        return c

    def forecast(self, temp: float, domain: GridDomain) -> GridCDF:
        key = (float(temp), domain.a, domain.b, domain.d)
        hit = self._cache.get(key)
        if hit is None:
            if len(self._cache) >= _FORECAST_CACHE_MAX:
                self._cache.clear()
            hit = conditional_load_cdf(self.model, temp, domain)
            self._cache[key] = hit
        return hit


def season_schedule(season: int, ramp_scale: float = 0.5, season_mapping=None) -> ConfidenceSchedule:
    """Confidence over the hour-of-year: 1 inside the season, decreasing
    linearly over ramps of `ramp_scale` times the season duration."""
    start, end, duration = season_hour_interval(season, season_mapping)
    ramp = ramp_scale * duration
    return ConfidenceSchedule(
        blocks=((start, end, ramp, ramp),), period=float(HOURS_PER_YEAR)
    )


def day_schedule(period: int, ramp_hours: float = DAY_RAMP_HOURS) -> ConfidenceSchedule:
    """Confidence over the hour-of-day: 1 inside the six-hour block,
    decreasing linearly over `ramp_hours` on each side."""
    start, end, _ = day_period_hour_interval(period)
    return ConfidenceSchedule(blocks=((start, end, ramp_hours, ramp_hours),), period=24.0)


def build_load_roster(
    train_records,
    *,
    components: int = 2,
    seed: int = 0,
    confidence: str = "smooth",
    season_mapping=None,
):
    """Fit the full roster on labeled training records.

    confidence "smooth" uses half-season / two-hour ramps, "binary" uses
    no ramps (experts sleep outside their exact training domain), and
    "off" attaches no schedules at all.  Returns (experts, failures) where
    failures is a list of (name, reason) for segments that could not be
    fitted; those experts are dropped from the roster.
    """
    if confidence not in ("smooth", "binary", "off"):
        raise ValueError(f"confidence must be smooth, binary or off, got {confidence!r}")
    labels = calendar_segments(train_records, season_mapping)
    points = np.array([(r.temperature, r.load) for r in train_records])

    season_ramp = {"smooth": 0.5, "binary": 0.0}.get(confidence)
    day_ramp = {"smooth": DAY_RAMP_HOURS, "binary": 0.0}.get(confidence)

    specs = [("expert01_anytime", None, None)]
    for s, sname in enumerate(SEASON_NAMES):
        specs.append((f"expert{len(specs) + 1:02d}_{sname}", s, None))
    for s, sname in enumerate(SEASON_NAMES):
        for p, pname in enumerate(DAY_PERIOD_NAMES):
            specs.append((f"expert{len(specs) + 1:02d}_{sname}_{pname}", s, p))

    seeds = np.random.SeedSequence(seed).generate_state(len(specs))
    experts: list[LoadExpert] = []
    failures: list[tuple[str, str]] = []
    for (name, s, p), sub_seed in zip(specs, seeds):
        mask = np.ones(len(points), dtype=bool)
        if s is not None:
            mask &= labels[:, 0] == s
        if p is not None:
            mask &= labels[:, 1] == p
        try:
            model = fit_gmm_em(points[mask], components, int(sub_seed))
        except (ValueError, DegenerateFit) as exc:
            failures.append((name, str(exc)))
            logger.warning("skipping %s: %s", name, exc)
            continue
        sched_s = sched_d = None
        if confidence != "off":
            if s is not None:
                sched_s = season_schedule(s, season_ramp, season_mapping)
            if p is not None:
                sched_d = day_schedule(p, day_ramp)
        experts.append(
            LoadExpert(name=name, model=model, season_schedule=sched_s, day_schedule=sched_d)
        )
    return experts, failures


def roster_confidences(experts, ts: datetime) -> np.ndarray:
    return np.array([e.confidence(ts) for e in experts])


def roster_forecasts(experts, temp: float, domain: GridDomain) -> list[GridCDF]:
    return [e.forecast(temp, domain) for e in experts]
