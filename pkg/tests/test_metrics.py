"""Accuracy, avoidance-timing offsets, and the rank-sum test."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from reachlearn.metrics import (
    TrajectoryPrediction,
    accuracy,
    d_end,
    d_start,
    mann_whitney_u,
)

from oracles import rank_sum_exact


def _tp(pred, truth):
    return TrajectoryPrediction(np.array(pred, float), np.array(truth, float))


def test_prediction_validation():
    with pytest.raises(ValueError):
        _tp([0.0, 0.5], [0.0])
    with pytest.raises(ValueError):
        _tp([], [])


def test_accuracy_pools_over_trajectories():
    preds = [
        _tp([0, 0.5, 0.5], [0, 0.5, -0.5]),     # 2/3
        _tp([0, 0], [0, 0]),                     # 2/2
    ]
    assert accuracy(preds) == pytest.approx(4 / 5)


def test_timing_offsets():
    # truth avoids on steps 3..5, prediction on steps 5..6
    p = _tp([0, 0, 0, 0, 0, 0.5, 0.5, 0], [0, 0, 0, 0.5, 0.5, 0.5, 0, 0])
    assert d_start([p]) == pytest.approx(2.0)
    assert d_end([p]) == pytest.approx(1.0)


def test_timing_offset_when_one_side_never_avoids():
    p = _tp([0, 0, 0, 0], [0, 0.5, 0, 0])
    assert d_start([p]) == pytest.approx(4.0)
    q = _tp([0, 0.5, 0, 0], [0, 0, 0, 0])
    assert d_end([q]) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        d_start([])


def test_timing_offsets_average_across_trajectories():
    a = _tp([0, 0.5], [0.5, 0])    # offset 1 both ways
    b = _tp([0.5, 0], [0.5, 0])    # offset 0
    assert d_start([a, b]) == pytest.approx(0.5)
    assert d_end([a, b]) == pytest.approx(0.5)


def test_rank_sum_pinned_example():
    assert mann_whitney_u([1, 2, 3], [4, 5, 6]) == (0.0, pytest.approx(0.1))


def test_rank_sum_rejects_tiny_groups():
    with pytest.raises(ValueError):
        mann_whitney_u([1, 2], [3, 4, 5])


@given(
    st.lists(st.integers(0, 6), min_size=3, max_size=6),
    st.lists(st.integers(0, 6), min_size=3, max_size=6),
)
@settings(max_examples=40, deadline=None)
def test_rank_sum_complement_identity(a, b):
    ua, _ = mann_whitney_u(a, b)
    ub, _ = mann_whitney_u(b, a)
    assert ua + ub == pytest.approx(len(a) * len(b))


@given(
    st.lists(st.integers(0, 8), min_size=3, max_size=6),
    st.lists(st.integers(0, 8), min_size=3, max_size=6),
)
@settings(max_examples=25, deadline=None)
def test_exact_branch_matches_independent_enumeration(a, b):
    u, p = mann_whitney_u(a, b)
    u_ref, p_ref = rank_sum_exact(a, b)
    assert u == pytest.approx(u_ref)
    assert p == pytest.approx(p_ref, abs=1e-12)


def test_normal_branch_tracks_exact_p():
    """Forcing the approximation on a small sample stays near exact."""
    rng = np.random.default_rng(9)
    for _ in range(5):
        a = rng.normal(0.0, 1.0, size=8).round(1)
        b = rng.normal(0.8, 1.0, size=8).round(1)
        _, p_exact = mann_whitney_u(a, b)
        _, p_norm = mann_whitney_u(a, b, exact_max=0)
        assert abs(p_exact - p_norm) < 0.05


def test_identical_groups_are_insignificant():
    _, p = mann_whitney_u([1, 2, 3, 4], [1, 2, 3, 4])
    assert p == 1.0
