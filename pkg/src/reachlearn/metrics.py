"""Prediction-quality metrics for avoidance-control sequences.

Beyond pooled accuracy, two timing errors matter for a maneuver
classifier: how far off it is about when avoidance starts and when it
ends.  Both are mean absolute step offsets over trajectories.  Group
comparisons use a rank-sum test implemented here (exact for small
samples, tie-corrected normal otherwise) so results carry no
dependency on a stats package.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class TrajectoryPrediction:
    """Aligned per-step predicted and true control labels for one run."""

    predicted: np.ndarray
    truth: np.ndarray

    def __post_init__(self) -> None:
        p = np.asarray(self.predicted, dtype=float)
        t = np.asarray(self.truth, dtype=float)
        if p.shape != t.shape or p.ndim != 1 or p.size == 0:
            raise ValueError("predicted and truth must be equal-length 1-D")
        object.__setattr__(self, "predicted", p)
        object.__setattr__(self, "truth", t)


def accuracy(preds: list[TrajectoryPrediction]) -> float:
    """Pooled per-step accuracy over all trajectories."""
    hits = sum(int((p.predicted == p.truth).sum()) for p in preds)
    total = sum(p.predicted.size for p in preds)
    return hits / total


def _first_avoid(labels: np.ndarray) -> int | None:
    idx = np.flatnonzero(labels != 0.0)
    return int(idx[0]) if idx.size else None


def _last_avoid(labels: np.ndarray) -> int | None:
    idx = np.flatnonzero(labels != 0.0)
    return int(idx[-1]) if idx.size else None


def _timing_error(preds: list[TrajectoryPrediction], pick) -> float:
    """Mean |step offset| of an avoidance event across trajectories.

    If either sequence never avoids, that trajectory contributes its
    full length as the error (maximal miss).
    """
    if not preds:
        raise ValueError("no trajectories")
    errs = []
    for p in preds:
        a = pick(p.predicted)
        b = pick(p.truth)
        if a is None or b is None:
            errs.append(float(p.predicted.size))
        else:
            errs.append(float(abs(a - b)))
    return float(np.mean(errs))


def d_start(preds: list[TrajectoryPrediction]) -> float:
    """Mean absolute offset, in steps, of the first avoidance step."""
    return _timing_error(preds, _first_avoid)


def d_end(preds: list[TrajectoryPrediction]) -> float:
    """Mean absolute offset, in steps, of the last avoidance step."""
    return _timing_error(preds, _last_avoid)


def _u_statistic(a: np.ndarray, b: np.ndarray) -> float:
    """U for sample ``a``: wins over ``b`` counting ties as half."""
    return float((a[:, None] > b[None, :]).sum() + 0.5 * (a[:, None] == b[None, :]).sum())


def mann_whitney_u(a, b, exact_max: int = 8) -> tuple[float, float]:
    """Two-sided rank-sum test; returns (U of the first sample, p).

    Exact p by enumerating all pooled relabelings when both samples
    have at most ``exact_max`` points; otherwise the tie-corrected
    normal approximation with continuity correction.  Doubling in the
    two-sided exact branch is capped at 1.

    >>> u, p = mann_whitney_u([1, 2, 3], [4, 5, 6])
    >>> u, round(p, 6)
    (0.0, 0.1)
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = a.size, b.size
    if n < 3 or m < 3:
        raise ValueError("need at least 3 observations per group")
    U = _u_statistic(a, b)
    pooled = np.concatenate([a, b])
    if max(n, m) <= exact_max:
        # Pairwise win matrix lets every relabeling's U come from sums
        # of precomputed entries.
        C = (pooled[:, None] > pooled[None, :]) + 0.5 * (
            pooled[:, None] == pooled[None, :]
        )
        np.fill_diagonal(C, 0.0)
        le = ge = total = 0
        idx = range(n + m)
        for combo in itertools.combinations(idx, n):
            rest = [i for i in idx if i not in combo]
            u = C[np.ix_(combo, rest)].sum()
            le += u <= U + 1e-9
            ge += u >= U - 1e-9
            total += 1
        p = min(1.0, 2.0 * min(float(le) / total, float(ge) / total))
        return U, p
    mu = n * m / 2.0
    _, counts = np.unique(pooled, return_counts=True)
    tie_term = (counts**3 - counts).sum() / ((n + m) * (n + m - 1.0))
    var = n * m / 12.0 * (n + m + 1.0 - tie_term)
    if var <= 0.0:
        return U, 1.0
    z = (abs(U - mu) - 0.5) / math.sqrt(var)
    p = min(1.0, math.erfc(max(z, 0.0) / math.sqrt(2.0)))
    return U, p
