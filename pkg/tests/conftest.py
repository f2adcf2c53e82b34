"""Shared fixtures: solved fields and synthetic cohorts, built once."""

from __future__ import annotations

import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from reachlearn.dynamics import DubinsParams
from reachlearn.levelset import Grid3, resample, solve_brs
from reachlearn.scenario import make_cohort


@pytest.fixture(scope="session")
def params() -> DubinsParams:
    return DubinsParams()


@pytest.fixture(scope="session")
def solve_timings() -> dict:
    """Wall-clock seconds of the shared solves, keyed by fixture name."""
    return {}


@pytest.fixture(scope="session")
def brs_coarse(params):
    """Fast low-resolution avoid-game solution for unit tests."""
    grid = Grid3(
        mins=(-20.0, -20.0, -np.pi), maxs=(20.0, 20.0, np.pi), dims=(41, 41, 24)
    )
    vf = solve_brs(grid, params, capture_radius=3.0)
    assert vf.converged
    return vf


@pytest.fixture(scope="session")
def brs_default(params, solve_timings):
    """Default-resolution solution used by the acceptance suite."""
    grid = Grid3(
        mins=(-20.0, -20.0, -np.pi), maxs=(20.0, 20.0, np.pi), dims=(81, 81, 40)
    )
    t0 = time.perf_counter()
    vf = solve_brs(grid, params, capture_radius=3.0)
    solve_timings["brs_default"] = time.perf_counter() - t0
    assert vf.converged
    return vf


@pytest.fixture(scope="session")
def brs_fine(params, brs_default, solve_timings):
    """Half-cell solution, warm-started, for refinement comparisons."""
    grid = Grid3(
        mins=(-20.0, -20.0, -np.pi), maxs=(20.0, 20.0, np.pi), dims=(161, 161, 80)
    )
    t0 = time.perf_counter()
    vf = solve_brs(
        grid,
        params,
        capture_radius=3.0,
        initial_values=resample(brs_default, grid),
        max_iters=4000,
    )
    solve_timings["brs_fine"] = time.perf_counter() - t0
    assert vf.converged
    return vf


@pytest.fixture(scope="session")
def cohort_small(brs_coarse):
    """Two simulated subjects with four scenes each."""
    return make_cohort(brs_coarse, n_subjects=2, n_scenes=4, seed=7)


@pytest.fixture(scope="session")
def cohort_full(brs_default):
    """Eight simulated subjects with fifty scenes each."""
    return make_cohort(brs_default, n_subjects=8, n_scenes=50, seed=0)
