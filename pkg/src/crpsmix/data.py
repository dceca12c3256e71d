"""Synthetic outcome streams sampled from time-varying triangular mixtures,
and ingestion of hourly load/temperature series with calendar labels."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .experts import TriangularExpert
from .rng import rng_from_seed

logger = logging.getLogger(__name__)

SEASON_NAMES = ("winter", "spring", "summer", "autumn")
DAY_PERIOD_NAMES = ("night", "morning", "day", "evening")

#: Meteorological quarters: Dec-Feb, Mar-May, Jun-Aug, Sep-Nov.
DEFAULT_SEASON_OF_MONTH = {
    12: 0, 1: 0, 2: 0,
    3: 1, 4: 1, 5: 1,
    6: 2, 7: 2, 8: 2,
    9: 3, 10: 3, 11: 3,
}

DAY_PERIOD_HOURS = 6  # night 00-05, morning 06-11, day 12-17, evening 18-23

_MONTH_DAYS = (31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31)
_CUM_MONTH_HOURS = tuple(int(x) for x in np.concatenate(([0], np.cumsum(_MONTH_DAYS) * 24)))
HOURS_PER_YEAR = _CUM_MONTH_HOURS[-1]  # 8760


# ---------------------------------------------------------------------------
# Synthetic streams
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class MixtureSchedule:
    """Per-step mixture weights over the generating distributions; rows
    are probability vectors."""

    weights: np.ndarray  # (steps, n_generators)
    segment_length: int

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ValueError("weights must be a (steps, generators) matrix")
        if w.min() < 0 or np.max(np.abs(w.sum(axis=1) - 1.0)) > 1e-12:
            raise ValueError("every row must be a probability vector")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def steps(self) -> int:
        return self.weights.shape[0]

    @property
    def n_generators(self) -> int:
        return self.weights.shape[1]


def _segment_length(steps: int, n_segments: int) -> int:
    if steps < 1 or n_segments < 1:
        raise ValueError("need positive steps and segment count")
    return max(1, steps // n_segments)


def rotating_leader_schedule(
    steps: int, n_generators: int = 3, n_segments: int = 6
) -> MixtureSchedule:
    """Method 1: a single generator holds weight 1 on each segment and the
    leadership rotates between segments."""
    seg = _segment_length(steps, n_segments)
    w = np.zeros((steps, n_generators))
    leaders = (np.arange(steps) // seg) % n_generators
    w[np.arange(steps), leaders] = 1.0
    return MixtureSchedule(w, seg)


def smooth_crossfade_schedule(
    steps: int, n_generators: int = 3, n_segments: int = 6
) -> MixtureSchedule:
    """Method 2: weights move piecewise-linearly, each segment's leader
    peaking at the segment midpoint and crossfading into the next."""
    seg = _segment_length(steps, n_segments)
    n_seg_actual = int(np.ceil(steps / seg))
    anchors_t = [0.0]
    anchors_w = [np.eye(n_generators)[0]]
    for j in range(n_seg_actual):
        anchors_t.append(j * seg + seg / 2.0)
        anchors_w.append(np.eye(n_generators)[j % n_generators])
    anchors_t.append(float(steps))
    anchors_w.append(anchors_w[-1])
    anchors_w = np.array(anchors_w)
    t = np.arange(steps, dtype=float)
    w = np.stack(
        [np.interp(t, anchors_t, anchors_w[:, g]) for g in range(n_generators)],
        axis=1,
    )
    w /= w.sum(axis=1, keepdims=True)
    return MixtureSchedule(w, seg)


def default_generators(a: float = 0.0, b: float = 1.0) -> tuple[TriangularExpert, ...]:
    """Three triangular generators with distinct peaks and overlapping
    supports inside [a, b]."""
    w = b - a
    return (
        TriangularExpert(peak=a + 0.20 * w, left=a, right=a + 0.45 * w),
        TriangularExpert(peak=a + 0.50 * w, left=a + 0.25 * w, right=a + 0.75 * w),
        TriangularExpert(peak=a + 0.80 * w, left=a + 0.55 * w, right=b),
    )


def synth_stream(generators, schedule: MixtureSchedule, steps: int, seed: int) -> np.ndarray:
    """Sample one outcome per step: pick a generator by the step's mixture
    weights, then draw from its triangular density.  Bit-reproducible for
    a given seed."""
    if schedule.steps < steps:
        raise ValueError(f"schedule covers {schedule.steps} steps, need {steps}")
    if schedule.n_generators != len(generators):
        raise ValueError("schedule width must match the generator count")
    rng = rng_from_seed(seed)
    cum = np.cumsum(schedule.weights[:steps], axis=1)
    picks = (rng.random(steps)[:, None] > cum).sum(axis=1)
    left = np.array([g.left for g in generators])[picks]
    peak = np.array([g.peak for g in generators])[picks]
    right = np.array([g.right for g in generators])[picks]
    return rng.triangular(left, peak, right)


# ---------------------------------------------------------------------------
# Hourly load/temperature ingestion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LoadRecord:
    timestamp: datetime
    load: float
    temperature: float


@dataclass(frozen=True)
class CsvSchema:
    """Column mapping for hourly load CSVs, so any export with a header row
    can be ingested without reshaping."""

    timestamp_col: str = "timestamp"
    load_col: str = "load"
    temperature_col: str = "temperature"
    delimiter: str = ","
    timestamp_format: str | None = None  # None: ISO 8601
    clip: tuple[float, float] | None = None  # clip loads into [lo, hi]


@dataclass
class DataQualityReport:
    rows_parsed: int = 0
    row_errors: list[tuple[int, str]] = field(default_factory=list)
    gaps: list[tuple[datetime, int]] = field(default_factory=list)  # (last ts before gap, missing rows)
    clipped: int = 0

    def as_dict(self) -> dict:
        return {
            "rows_parsed": self.rows_parsed,
            "rows_failed": len(self.row_errors),
            "rows_clipped": self.clipped,
            "gaps": len(self.gaps),
            "hours_missing": sum(n for _, n in self.gaps),
        }


def _parse_timestamp(raw: str, fmt: str | None) -> datetime:
    if fmt is not None:
        return datetime.strptime(raw, fmt)
    return datetime.fromisoformat(raw.strip())


def load_csv(path, schema: CsvSchema = CsvSchema()):
    """Parse an hourly load/temperature CSV.

    Returns (records, report).  Unparsable rows are collected with their
    line numbers and are fatal only if more than 1% of rows fail.
    Duplicate or backward timestamps and non-hourly spacing are structural
    corruption and raise immediately; multi-hour jumps are flagged as gaps.
    """
    records: list[LoadRecord] = []
    report = DataQualityReport()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=schema.delimiter)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: empty file")
        for col in (schema.timestamp_col, schema.load_col, schema.temperature_col):
            if col not in reader.fieldnames:
                raise ValueError(f"{path}: missing column {col!r}")
        n_rows = 0
        for row in reader:
            n_rows += 1
            line = reader.line_num
            try:
                ts = _parse_timestamp(row[schema.timestamp_col], schema.timestamp_format)
                load = float(row[schema.load_col])
                temp = float(row[schema.temperature_col])
                if not (np.isfinite(load) and np.isfinite(temp)):
                    raise ValueError("non-finite load or temperature")
            except (ValueError, TypeError, KeyError) as exc:
                report.row_errors.append((line, str(exc)))
                continue
            if records:
                prev = records[-1].timestamp
                delta_h = (ts - prev).total_seconds() / 3600.0
                if delta_h <= 0:
                    raise ValueError(
                        f"{path}:{line}: timestamp {ts.isoformat()} does not "
                        f"advance past {prev.isoformat()}"
                    )
                if delta_h != int(delta_h):
                    raise ValueError(
                        f"{path}:{line}: spacing of {delta_h} hours is not hourly"
                    )
                if delta_h > 1:
                    report.gaps.append((prev, int(delta_h) - 1))
            if schema.clip is not None:
                lo, hi = schema.clip
                if load < lo or load > hi:
                    report.clipped += 1
                    load = min(max(load, lo), hi)
            records.append(LoadRecord(ts, load, temp))
        report.rows_parsed = len(records)
        if n_rows == 0:
            raise ValueError(f"{path}: no data rows")
        if len(report.row_errors) > 0.01 * n_rows:
            raise ValueError(
                f"{path}: {len(report.row_errors)} of {n_rows} rows failed to "
                f"parse (>1%); first: line {report.row_errors[0][0]}: "
                f"{report.row_errors[0][1]}"
            )
    if report.row_errors:
        logger.warning(
            "%s: %d rows skipped (first at line %d)",
            path, len(report.row_errors), report.row_errors[0][0],
        )
    if report.clipped:
        logger.warning("%s: %d load values clipped into %s", path, report.clipped, schema.clip)
    return records, report


def split_train_test(records, boundary: datetime):
    """Partition records: timestamps before `boundary` train, the rest test."""
    train = [r for r in records if r.timestamp < boundary]
    test = [r for r in records if r.timestamp >= boundary]
    if not train or not test:
        raise ValueError(
            f"boundary {boundary.isoformat()} leaves an empty side "
            f"({len(train)} train, {len(test)} test)"
        )
    return train, test


def default_test_boundary(records, test_hours: int = HOURS_PER_YEAR) -> datetime:
    """Boundary putting the last `test_hours` records into the test side."""
    if len(records) <= test_hours:
        raise ValueError(
            f"need more than {test_hours} records to reserve them for testing"
        )
    return records[-test_hours].timestamp


def season_of_month(month: int, mapping=None) -> int:
    return (mapping or DEFAULT_SEASON_OF_MONTH)[month]


def day_period_of_hour(hour: int) -> int:
    return hour // DAY_PERIOD_HOURS


def calendar_segments(records, season_mapping=None) -> np.ndarray:
    """(n, 2) integer labels: season index and day-period index per record."""
    out = np.empty((len(records), 2), dtype=int)
    for i, r in enumerate(records):
        out[i, 0] = season_of_month(r.timestamp.month, season_mapping)
        out[i, 1] = day_period_of_hour(r.timestamp.hour)
    return out


def hour_of_year(ts: datetime) -> int:
    """Hour index in a fixed 365-day year; Feb 29 counts as Feb 28."""
    day = min(ts.day, _MONTH_DAYS[ts.month - 1])
    return _CUM_MONTH_HOURS[ts.month - 1] + (day - 1) * 24 + ts.hour


def season_hour_interval(season: int, season_mapping=None):
    """(start_hour, end_hour_inclusive, duration) of a season within the
    fixed year; the interval may extend past HOURS_PER_YEAR when the
    season wraps December into the new year."""
    mapping = season_mapping or DEFAULT_SEASON_OF_MONTH
    months = [m for m in range(1, 13) if mapping[m] == season]
    if not months:
        raise ValueError(f"no months mapped to season {season}")
    member = set(months)
    # first month whose cyclic predecessor is outside the season
    start_month = next(m for m in months if ((m - 2) % 12) + 1 not in member)
    duration = sum(_MONTH_DAYS[m - 1] * 24 for m in months)
    start = _CUM_MONTH_HOURS[start_month - 1]
    return start, start + duration - 1, duration


def day_period_hour_interval(period: int):
    """(start_hour, end_hour_inclusive, duration) of a day period."""
    start = period * DAY_PERIOD_HOURS
    return start, start + DAY_PERIOD_HOURS - 1, DAY_PERIOD_HOURS
