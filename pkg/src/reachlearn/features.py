"""Feature vectors for avoidance-behavior classification.

Every feature set starts from the five relative-pose features of the
other vehicle in the human's body frame and optionally appends the
planar separation and the two game values (the value in the robot's
frame and the value in the human's frame).  Feature order is fixed by
the layout so that saved models and datasets agree byte for byte.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .dynamics import VehicleState, relative_state
from .levelset import ValueFunction, value_at_flagged


class FeatureSetId(enum.Enum):
    """The eight ablation layouts.

    Suffix letters: ``d`` planar human-robot distance, ``h`` the game
    value in the robot's body frame, ``r`` the game value in the human's
    body frame.
    """

    B = "B"
    BD = "Bd"
    BH = "Bh"
    BR = "Br"
    BHD = "Bhd"
    BRD = "Brd"
    BHR = "Bhr"
    BHRD = "Bhrd"

    @property
    def has_distance(self) -> bool:
        return "d" in self.value

    @property
    def has_robot_frame_value(self) -> bool:
        return "h" in self.value

    @property
    def has_human_frame_value(self) -> bool:
        return "r" in self.value

    @property
    def names(self) -> tuple[str, ...]:
        base = ("abs_xr", "abs_yr", "theta_rel", "cos_theta_rel", "sin_theta_rel")
        extra: tuple[str, ...] = ()
        if self.has_distance:
            extra += ("distance",)
        if self.has_robot_frame_value:
            extra += ("value_robot_frame",)
        if self.has_human_frame_value:
            extra += ("value_human_frame",)
        return base + extra

    def __len__(self) -> int:
        return len(self.names)


@dataclass(frozen=True)
class FeatureVector:
    values: tuple[float, ...]
    layout: FeatureSetId

    def __post_init__(self) -> None:
        if len(self.values) != len(self.layout):
            raise ValueError(
                f"{self.layout.value} expects {len(self.layout)} features, "
                f"got {len(self.values)}"
            )
        if not all(math.isfinite(v) for v in self.values):
            raise ValueError("features must be finite")


def build_features_flagged(
    human: VehicleState,
    robot: VehicleState,
    vf_hr: ValueFunction,
    vf_rh: ValueFunction,
    layout: FeatureSetId,
) -> tuple[FeatureVector, bool]:
    """Feature vector plus a flag marking clamped (off-grid) game values.

    ``vf_hr`` is queried with the human seen from the robot's frame,
    ``vf_rh`` with the robot seen from the human's frame.  The shared
    symmetric game solution may be passed for both.  Relative-pose
    features always describe the robot in the human's body frame.
    """
    rel_rh = relative_state(robot, human)
    vals = [
        abs(rel_rh.xr),
        abs(rel_rh.yr),
        rel_rh.theta,
        math.cos(rel_rh.theta),
        math.sin(rel_rh.theta),
    ]
    clamped = False
    if layout.has_distance:
        vals.append(math.hypot(robot.x - human.x, robot.y - human.y))
    if layout.has_robot_frame_value:
        v, c = value_at_flagged(vf_hr, relative_state(human, robot))
        vals.append(v)
        clamped |= c
    if layout.has_human_frame_value:
        v, c = value_at_flagged(vf_rh, rel_rh)
        vals.append(v)
        clamped |= c
    return FeatureVector(tuple(vals), layout), clamped


def build_features(
    human: VehicleState,
    robot: VehicleState,
    vf_hr: ValueFunction,
    vf_rh: ValueFunction,
    layout: FeatureSetId,
) -> FeatureVector:
    return build_features_flagged(human, robot, vf_hr, vf_rh, layout)[0]


def build_feature_matrix(
    humans: list[VehicleState],
    robots: list[VehicleState],
    vf: ValueFunction,
    layout: FeatureSetId,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised features for paired state lists; returns (X, clamped).

    Uses the one symmetric game solution for both frame queries.  The
    row layout matches :func:`build_features` exactly.
    """
    n = len(humans)
    if n != len(robots):
        raise ValueError("state lists must have equal length")
    hx = np.array([s.as_tuple() for s in humans])
    rx = np.array([s.as_tuple() for s in robots])
    dxy = rx[:, :2] - hx[:, :2]
    c = np.cos(hx[:, 2])
    s = np.sin(hx[:, 2])
    xr = c * dxy[:, 0] + s * dxy[:, 1]
    yr = -s * dxy[:, 0] + c * dxy[:, 1]
    th = (rx[:, 2] - hx[:, 2] + math.pi) % (2.0 * math.pi) - math.pi
    cols = [np.abs(xr), np.abs(yr), th, np.cos(th), np.sin(th)]
    clamped = np.zeros(n, dtype=bool)
    if layout.has_distance:
        cols.append(np.hypot(dxy[:, 0], dxy[:, 1]))
    from .levelset import _interp  # local import to keep the helper private

    if layout.has_robot_frame_value:
        cr = np.cos(rx[:, 2])
        sr = np.sin(rx[:, 2])
        pts = np.stack(
            [
                cr * -dxy[:, 0] + sr * -dxy[:, 1],
                -sr * -dxy[:, 0] + cr * -dxy[:, 1],
                (hx[:, 2] - rx[:, 2] + math.pi) % (2.0 * math.pi) - math.pi,
            ],
            axis=1,
        )
        vals, cl = _interp(vf.grid, vf.values, pts)
        cols.append(vals)
        clamped |= cl
    if layout.has_human_frame_value:
        pts = np.stack([xr, yr, th], axis=1)
        vals, cl = _interp(vf.grid, vf.values, pts)
        cols.append(vals)
        clamped |= cl
    return np.stack(cols, axis=1), clamped
