"""Stochastic forward reachable sets around a predicted human.

One forward tube per confidence level: the innermost follows the
predictor's top-rated controls, each outer one widens the admissible
turn-rate band by a fraction of the remaining range, and the outermost
always spans the full range, so it contains every dynamically feasible
future.  The construction is Algorithm-style and deliberately simple:

1. Roll two anchor states forward, one under the lowest top-rated
   control, one under the highest, querying the predictor at each step.
2. At every step take the union of top-k control sets at both anchors;
   its min and max give the step's base turn-rate band.
3. Scale the band outward per confidence level and build one occupancy
   tube per level; nesting is then exact by construction.

Capture probabilities (the chance the human's real future stays inside
a given level's tube) are estimated offline on recorded trajectories and
served with the sets; the full-range level is certain by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import numpy as np

from .dynamics import (
    DubinsParams,
    VehicleState,
    discrete_controls,
    step_vehicle,
)
from .features import FeatureSetId, build_feature_matrix
from .levelset import (
    BoundedInterval,
    Grid3,
    TubeSchedule,
    ValueFunction,
    contains_state_flagged,
    default_frs_grid,
    is_subset,
    solve_frs_batch,
)

# Tie order when predictions rate controls equally: prefer the sharper
# avoid turn, then straight.
_TIE_ORDER = (0.5, 0.0, -0.5)


@dataclass(frozen=True)
class ShfrsConfig:
    """Shape of the nested-tube construction."""

    horizon_steps: int = 10
    dt: float = 0.2
    epsilons: tuple[float, ...] = (0.0, 0.15, 0.25, 0.4, 1.0)
    ks: tuple[int, ...] = (2, 2, 1, 1, 1, 1, 1, 1, 1, 1)

    def __post_init__(self) -> None:
        if self.horizon_steps < 1 or self.dt <= 0.0:
            raise ValueError("horizon_steps and dt must be positive")
        if len(self.ks) != self.horizon_steps:
            raise ValueError("need one top-k width per horizon step")
        if any(k not in (1, 2, 3) for k in self.ks):
            raise ValueError("top-k widths must be 1, 2, or 3")
        eps = self.epsilons
        if not eps or any(e < 0.0 for e in eps) or list(eps) != sorted(eps):
            raise ValueError("epsilons must be nonnegative and nondecreasing")
        if abs(eps[-1] - 1.0) > 1e-12:
            raise ValueError("last epsilon must be 1 (full-range outer set)")

    @property
    def horizon(self) -> float:
        return self.horizon_steps * self.dt

    @property
    def n_regions(self) -> int:
        return len(self.epsilons)


class Predictor(Protocol):
    """Anything that rates the human's next discrete control."""

    def predict(
        self, history: Sequence[tuple[VehicleState, VehicleState]]
    ) -> np.ndarray:
        """Probabilities over ascending discrete controls; sums to 1."""
        ...


@dataclass
class FixedPredictor:
    """Constant or scripted control distribution, mainly for tests."""

    probs: np.ndarray

    def __post_init__(self) -> None:
        self.probs = np.atleast_2d(np.asarray(self.probs, dtype=float))
        if self.probs.shape[1] != 3 or (self.probs < 0).any():
            raise ValueError("need nonnegative rows over three controls")
        self.probs = self.probs / self.probs.sum(axis=1, keepdims=True)
        self._calls = 0

    def predict(self, history) -> np.ndarray:
        row = self.probs[min(self._calls, self.probs.shape[0] - 1)]
        self._calls += 1
        return row.copy()


@dataclass
class ModelPredictor:
    """Learned three-class model driving the tube construction."""

    model: object
    vf: ValueFunction
    params: DubinsParams = field(default_factory=DubinsParams)

    def __post_init__(self) -> None:
        classes = np.asarray(self.model.classes, dtype=float)
        expected = np.array(discrete_controls(self.params))
        if classes.shape != (3,) or not np.allclose(classes, expected):
            raise ValueError(
                "predictor needs a model over the three turn-rate classes; "
                "binary avoid/no-avoid models cannot bound controls"
            )

    def predict(self, history) -> np.ndarray:
        human, robot = history[-1]
        X, _ = build_feature_matrix([human], [robot], self.vf, self.model.layout)
        return self.model.predict_proba(X)[0]


def top_k_controls(probs: np.ndarray, k: int, params: DubinsParams) -> list[float]:
    """The k best-rated discrete controls, ties broken by avoid-turn bias."""
    controls = discrete_controls(params)
    order = sorted(
        range(3),
        key=lambda i: (-probs[i], _TIE_ORDER.index(controls[i])),
    )
    return [controls[i] for i in order[:k]]


@dataclass
class BoundsTable:
    """Per-step control bands: base from predictions, one row per level."""

    base: list[tuple[float, float]]
    regions: list[list[BoundedInterval]]  # [region][step]


def algorithm1_bounds(
    predictor: Predictor,
    human0: VehicleState,
    robot0: VehicleState,
    config: ShfrsConfig,
    params: DubinsParams | None = None,
    robot_controls: Sequence[float] | None = None,
) -> BoundsTable:
    """Predicted control bands per step, widened per confidence level.

    Two anchor rollouts bracket the prediction: the low anchor always
    applies the step's lowest top-rated control, the high anchor the
    highest.  The robot's future inputs default to holding its heading.
    """
    params = params or DubinsParams()
    if robot_controls is None:
        robot_controls = [0.0] * config.horizon_steps
    if len(robot_controls) != config.horizon_steps:
        raise ValueError("need one robot control per horizon step")
    lo_state = hi_state = human0
    robot = robot0
    base: list[tuple[float, float]] = []
    regions: list[list[BoundedInterval]] = [[] for _ in config.epsilons]
    for i in range(config.horizon_steps):
        k = config.ks[i]
        cands = set(top_k_controls(predictor.predict([(lo_state, robot)]), k, params))
        cands |= set(top_k_controls(predictor.predict([(hi_state, robot)]), k, params))
        u_lo, u_hi = min(cands), max(cands)
        base.append((u_lo, u_hi))
        for j, eps in enumerate(config.epsilons):
            lo = max(params.omega_min, u_lo - eps * (u_lo - params.omega_min))
            hi = min(params.omega_max, u_hi + eps * (params.omega_max - u_hi))
            regions[j].append(BoundedInterval(lo, hi))
        lo_state = step_vehicle(lo_state, u_lo, config.dt, params)
        hi_state = step_vehicle(hi_state, u_hi, config.dt, params)
        robot = step_vehicle(robot, float(robot_controls[i]), config.dt, params)
    return BoundsTable(base=base, regions=regions)


@dataclass
class ShfrsResult:
    """Nested tubes plus provenance of the bands that shaped them."""

    fields: list[ValueFunction]
    bounds: BoundsTable
    config: ShfrsConfig
    human0: VehicleState
    robot0: VehicleState
    nesting_ok: bool
    probabilities: list[float | None] | None = None

    @property
    def grid(self) -> Grid3:
        return self.fields[0].grid


def build_shfrs(
    predictor: Predictor,
    human0: VehicleState,
    robot0: VehicleState,
    config: ShfrsConfig | None = None,
    params: DubinsParams | None = None,
    grid: Grid3 | None = None,
    robot_controls: Sequence[float] | None = None,
    snapshots: bool = False,
) -> ShfrsResult:
    """Nested forward tubes for the human from the current pair of poses."""
    config = config or ShfrsConfig()
    params = params or DubinsParams()
    grid = grid or default_frs_grid((human0.x, human0.y))
    bounds = algorithm1_bounds(
        predictor, human0, robot0, config, params, robot_controls
    )
    schedules = [
        TubeSchedule(tuple((config.dt, b) for b in region))
        for region in bounds.regions
    ]
    fields = solve_frs_batch(
        grid,
        human0,
        schedules,
        params,
        snapshots=snapshots,
        nested=True,
    )
    nesting_ok = all(
        is_subset(fields[j], fields[j + 1]) for j in range(len(fields) - 1)
    )
    return ShfrsResult(
        fields=fields,
        bounds=bounds,
        config=config,
        human0=human0,
        robot0=robot0,
        nesting_ok=nesting_ok,
    )


@dataclass
class ProbabilityReport:
    """Empirical chance of each level's tube capturing the real future."""

    counts: list[int]
    total: int
    off_grid: int

    @property
    def probabilities(self) -> list[float]:
        if self.total == 0:
            raise ValueError("no anchors evaluated")
        return [c / self.total for c in self.counts]


def _contained_step(
    result: ShfrsResult, state: VehicleState, step: int, sliced: bool
) -> np.ndarray:
    """Per-region containment of one state, cumulative across levels."""
    flags = np.zeros(len(result.fields), dtype=bool)
    off = False
    for j, vf in enumerate(result.fields):
        if sliced:
            vals = vf.snapshot_values[step]
            inside, clamped = contains_state_flagged(
                ValueFunction(
                    grid=vf.grid,
                    values=vals,
                    kind=vf.kind,
                    params=vf.params,
                    capture_radius=vf.capture_radius,
                    horizon=vf.horizon,
                ),
                state,
            )
        else:
            inside, clamped = contains_state_flagged(vf, state)
        off |= clamped
        flags[j] = inside and not clamped
    # A state inside level j is inside every wider level by nesting.
    return np.maximum.accumulate(flags), off


def estimate_probabilities(
    trajectories,
    predictor_for,
    config: ShfrsConfig | None = None,
    params: DubinsParams | None = None,
    stride: int = 5,
    sliced: bool = False,
) -> ProbabilityReport:
    """Fraction of real futures each tube level captures whole.

    ``predictor_for(trajectory)`` supplies the predictor used at every
    anchor of that trajectory (letting callers reset per-trajectory
    state).  An anchor at step ``l`` captures at level j when all states
    through ``l + horizon_steps`` stay inside level j's tube; ``sliced``
    checks each step against that step's occupancy slice instead of the
    whole-horizon tube.
    """
    config = config or ShfrsConfig()
    params = params or DubinsParams()
    counts = np.zeros(config.n_regions, dtype=int)
    total = 0
    off_grid = 0
    for traj in trajectories:
        predictor = predictor_for(traj)
        humans = traj.human_states()
        robots = traj.robot_states()
        if abs(traj.dt - config.dt) > 1e-9:
            raise ValueError("trajectory step does not match the tube step")
        last_anchor = len(traj) - 1 - config.horizon_steps
        for l in range(0, last_anchor + 1, stride):
            result = build_shfrs(
                predictor, humans[l], robots[l], config, params, snapshots=sliced
            )
            ok = np.ones(config.n_regions, dtype=bool)
            off = False
            for s in range(1, config.horizon_steps + 1):
                flags, o = _contained_step(result, humans[l + s], s - 1, sliced)
                ok &= flags
                off |= o
            counts += ok
            total += 1
            off_grid += off
    return ProbabilityReport(
        counts=[int(c) for c in counts], total=total, off_grid=off_grid
    )


def region_raster(result: ShfrsResult) -> np.ndarray:
    """Smallest containing level per spatial cell, 0 where none.

    Levels count from 1 (innermost); the heading axis is collapsed by
    taking each field's minimum over it, so a cell is marked when any
    heading at that position is inside the tube.
    """
    n = len(result.fields)
    raster = np.zeros(result.grid.dims[:2], dtype=np.uint8)
    for j in range(n - 1, -1, -1):
        inside = result.fields[j].values.min(axis=2) <= 0.0
        raster[inside] = j + 1
    return raster


def raster_pgm(raster: np.ndarray, levels: int) -> bytes:
    """Binary PGM image of a level raster, white background.

    Rows run north to south (y down the image), levels darken toward
    the innermost set.
    """
    if levels < 1:
        raise ValueError("need at least one level")
    img = np.full(raster.shape, 255, dtype=np.uint8)
    occupied = raster > 0
    # Innermost (1) darkest; step shades evenly toward light gray.
    img[occupied] = (40 + (raster[occupied] - 1) * (160 // levels)).astype(np.uint8)
    rows = img.T[::-1]
    header = f"P5\n{rows.shape[1]} {rows.shape[0]}\n255\n".encode()
    return header + rows.tobytes()
