"""Shared oracles, strategies and fixtures for the test suite."""

from __future__ import annotations

import csv
import math
import os
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import strategies as st

from crpsmix.grids import GridCDF, GridDomain


def numeric_crps(cdf_fn, y, a, b, n=20001):
    """Quadrature oracle for the integral form of the score:
    trapezoid rule on (F(u) - 1{u >= y})^2 over [a, b]."""
    u = np.linspace(a, b, n)
    integrand = (np.asarray(cdf_fn(u)) - (u >= y)) ** 2
    return float(np.trapezoid(integrand, u))


def step_cdf_fn(domain: GridDomain, values: np.ndarray):
    """The piecewise-constant function represented by grid values:
    F(u) = f_k for z_{k-1} < u <= z_k, F(a) = 0."""
    edges = np.concatenate(([domain.a], domain.grid))

    def fn(u):
        u = np.asarray(u, dtype=float)
        idx = np.searchsorted(edges[1:], u, side="left")
        idx = np.minimum(idx, domain.d - 1)
        out = np.asarray(values, dtype=float)[idx]
        return np.where(u <= domain.a, 0.0, out)

    return fn


def random_cdf_values(rng: np.random.Generator, d: int) -> np.ndarray:
    vals = np.sort(rng.random(d))
    vals[-1] = 1.0
    return vals


@st.composite
def grid_cdfs(draw, min_d=2, max_d=32):
    """Hypothesis strategy for valid grid CDFs on [0, 1]."""
    d = draw(st.integers(min_d, max_d))
    raw = draw(
        st.lists(st.floats(0.0, 1.0, allow_nan=False), min_size=d, max_size=d)
    )
    vals = np.sort(np.asarray(raw))
    vals[-1] = 1.0
    return GridCDF(GridDomain(0.0, 1.0, d), vals)


@st.composite
def probability_vectors(draw, min_n=1, max_n=6):
    n = draw(st.integers(min_n, max_n))
    raw = draw(
        st.lists(st.floats(0.01, 1.0, allow_nan=False), min_size=n, max_size=n)
    )
    q = np.asarray(raw)
    return q / q.sum()


def write_demo_load_csv(path, hours, start=datetime(2006, 1, 1), seed=11):
    """Synthetic hourly (timestamp, load, temperature) series whose
    temperature-load relation shifts with season and hour of day."""
    rng = np.random.default_rng(seed)
    rows = []
    ts = start
    for i in range(hours):
        doy = ts.timetuple().tm_yday
        season_phase = math.cos(2 * math.pi * (doy - 15) / 365.0)
        diurnal = math.sin(2 * math.pi * (ts.hour - 6) / 24.0)
        temp = 45.0 - 22.0 * season_phase + 8.0 * diurnal + rng.normal(0, 3.5)
        comfort = abs(temp - 62.0)
        occupancy = 1.0 + 0.45 * math.sin(2 * math.pi * (ts.hour - 9) / 24.0)
        load = 95.0 + 2.1 * comfort * occupancy + 14.0 * occupancy
        load += rng.normal(0, 6.0)
        rows.append((ts.isoformat(), round(load, 3), round(temp, 2)))
        ts += timedelta(hours=1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["timestamp", "load", "temperature"])
        writer.writerows(rows)
    return path


@pytest.fixture(scope="session")
def demo_load_csv(tmp_path_factory):
    """Two years of training data plus a short test stretch."""
    path = tmp_path_factory.mktemp("demo") / "demo_load.csv"
    return str(write_demo_load_csv(path, hours=2 * 8760 + 1200))


@pytest.fixture(scope="session")
def gefcom_csv():
    """User-supplied real dataset, if configured."""
    path = os.environ.get("CRPSMIX_GEFCOM_CSV")
    if not path:
        pytest.skip(
            "set CRPSMIX_GEFCOM_CSV to a GEFCom-format CSV "
            "(timestamp, load, temperature) to run this check"
        )
    return path
