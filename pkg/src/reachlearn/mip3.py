"""Joint avoidance assignment for three vehicles sharing a workspace.

Each vehicle may dedicate itself to avoiding at most one other vehicle
at a time.  Pairwise avoid-game values (queried from the converged
two-vehicle solution) grade every ordered pair: a pair is *active* when
its value sits in the alert band [0, K], already *unsafe* below 0, and
ignorable above K.  A small integer program picks who avoids whom:
binary assignment variables with unit row budget and no mutual
avoidance, rewards squared-rank weights that place every active pair
ahead of every inactive one.  With three vehicles the feasible set has
eighteen assignments, so the program is solved exactly by enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import (
    DubinsParams,
    VehicleState,
    relative_state,
    robot_policy,
    step_vehicle,
)
from .levelset import ValueFunction, value_at, value_gradient_many

# Ordered pairs, cycle orientation first; rank weights are the squares
# 6^2 .. 1^2 so any single higher-ranked pair outweighs all lower ranks
# combined (36 > 25 + 16 + ... is false, but 36 > 25 and the assignment
# budget caps how many lower ranks can combine against it).
CYCLE_PAIRS = ((0, 1), (1, 2), (2, 0))
REVERSE_PAIRS = ((0, 2), (1, 0), (2, 1))
ALL_PAIRS = CYCLE_PAIRS + REVERSE_PAIRS
RANK_WEIGHTS = (36.0, 25.0, 16.0, 9.0, 4.0, 1.0)
UNSAFE_REWARD = -1.0


def compute_safety_values(
    states: Sequence[VehicleState], vf: ValueFunction
) -> np.ndarray:
    """Matrix sv[i, j]: the avoid-game value of threat j seen from i.

    Row vehicle i is the frame owner (the one trying to stay clear);
    the diagonal is meaningless and set to +inf.
    """
    if len(states) != 3:
        raise ValueError("exactly three vehicles")
    sv = np.full((3, 3), np.inf)
    for i, j in ALL_PAIRS:
        sv[i, j] = value_at(vf, relative_state(states[j], states[i]))
    return sv


def active_pairs(sv: np.ndarray, K: float) -> list[tuple[int, int]]:
    """Ordered pairs currently in the alert band [0, K]."""
    return [(i, j) for (i, j) in ALL_PAIRS if 0.0 <= sv[i, j] <= K]


def build_reward_matrix(sv: np.ndarray, K: float = 2.0) -> np.ndarray:
    """Rewards for assigning i to avoid j.

    Pairs are ranked active-first (stable within the fixed pair order),
    weighted by descending squared ranks, and any pair whose value has
    already gone negative is marked with a flat negative reward so the
    optimizer never wastes a vehicle's budget on a lost cause.
    """
    if K <= 0.0:
        raise ValueError("alert band K must be positive")
    act = [p for p in ALL_PAIRS if 0.0 <= sv[p] <= K]
    rest = [p for p in ALL_PAIRS if p not in act]
    R = np.zeros((3, 3))
    for w, (i, j) in zip(RANK_WEIGHTS, act + rest):
        R[i, j] = w
    for i, j in ALL_PAIRS:
        if sv[i, j] < 0.0:
            R[i, j] = UNSAFE_REWARD
    return R


def enumerate_feasible() -> list[np.ndarray]:
    """All binary assignments: zero diagonal, row sum <= 1, no mutual pair."""
    out = []
    for rows in itertools.product(range(3), repeat=3):
        # Row choice r: 0 = avoid nobody, else avoid the r-th other.
        U = np.zeros((3, 3), dtype=int)
        for i, r in enumerate(rows):
            if r:
                others = [j for j in range(3) if j != i]
                U[i, others[r - 1]] = 1
        if any(U[i, j] and U[j, i] for i, j in CYCLE_PAIRS):
            continue
        out.append(U)
    return out


_FEASIBLE = enumerate_feasible()


def solve_assignment(R: np.ndarray) -> tuple[np.ndarray, float]:
    """Exact maximizer of sum R[i,j] * u[i,j] over feasible assignments.

    Ties resolve to the lexicographically smallest assignment in
    row-major order, so equal-reward situations stay reproducible.
    """
    best_obj = -np.inf
    best = None
    for U in _FEASIBLE:
        obj = float((R * U).sum())
        key = tuple(U.ravel())
        if obj > best_obj + 1e-9 or (
            abs(obj - best_obj) <= 1e-9 and best is not None and key < best[0]
        ):
            best_obj = obj
            best = (key, U)
    return best[1].copy(), best_obj


@dataclass
class PriorityCheck:
    pattern: tuple[int, ...]
    assignment: np.ndarray
    objective: float
    covered: bool
    dominance: bool


def verify_pairwise_priority(K: float = 2.0) -> tuple[bool, list[PriorityCheck]]:
    """Exhaustive check that active pairs always get an avoider.

    Over all eight activity patterns of the three unordered pairs
    (active values K/2, inactive 2K), the optimum must cover every
    active unordered pair in at least one direction, and must beat
    every feasible assignment that leaves some active pair uncovered
    by a strictly positive margin.
    """
    unordered = ((0, 1), (1, 2), (0, 2))
    checks = []
    all_ok = True
    for pattern in itertools.product((0, 1), repeat=3):
        sv = np.full((3, 3), np.inf)
        for bit, (i, j) in zip(pattern, unordered):
            sv[i, j] = sv[j, i] = K / 2.0 if bit else 2.0 * K
        R = build_reward_matrix(sv, K)
        U, obj = solve_assignment(R)
        act = [p for bit, p in zip(pattern, unordered) if bit]
        covered = all(U[i, j] + U[j, i] >= 1 for i, j in act)
        dominance = True
        for V in _FEASIBLE:
            if all(V[i, j] + V[j, i] >= 1 for i, j in act):
                continue
            if float((R * V).sum()) >= obj - 1e-9:
                dominance = False
        ok = covered and dominance
        all_ok &= ok
        checks.append(PriorityCheck(pattern, U, obj, covered, dominance))
    return all_ok, checks


def avoid_control(
    vehicle: VehicleState,
    threat: VehicleState,
    vf: ValueFunction,
    params: DubinsParams,
) -> float:
    """Value-ascending bang-bang turn rate against one threat.

    The frame owner's input enters the game Hamiltonian through the
    coefficient p1*yr - p2*xr - p3, so its maximizing control is the
    saturated turn with that sign.
    """
    rel = relative_state(threat, vehicle)
    g = value_gradient_many(vf, np.array([[rel.xr, rel.yr, rel.theta]]))[0]
    coeff = g[0] * rel.yr - g[1] * rel.xr - g[2]
    return params.omega_max if coeff >= 0.0 else params.omega_min


@dataclass
class ThreeVehicleRun:
    times: np.ndarray
    poses: np.ndarray  # (n, 3, 3): step, vehicle, (x, y, psi)
    assignments: np.ndarray  # (n, 3, 3)
    safety_values: np.ndarray  # (n, 3, 3)
    min_separation: float
    capture_radius: float

    def separations(self) -> np.ndarray:
        d = []
        for i, j in ((0, 1), (1, 2), (0, 2)):
            d.append(
                np.hypot(
                    self.poses[:, i, 0] - self.poses[:, j, 0],
                    self.poses[:, i, 1] - self.poses[:, j, 1],
                )
            )
        return np.stack(d, axis=1)


def simulate_three(
    initials: Sequence[VehicleState],
    vf: ValueFunction,
    goals: Sequence[tuple[float, float]],
    K: float = 2.0,
    horizon: float = 30.0,
    dt: float = 0.05,
    params: DubinsParams | None = None,
) -> ThreeVehicleRun:
    """Closed-loop three-vehicle run under the assignment controller.

    Every step solves the assignment program on fresh pairwise values;
    a vehicle assigned an active threat plays the bang-bang avoid turn,
    everyone else tracks their own goal.  Assignments to pairs outside
    the alert band (possible when nothing active needs the budget) do
    not override goal tracking.
    """
    params = params or DubinsParams()
    if len(initials) != 3 or len(goals) != 3:
        raise ValueError("exactly three vehicles and goals")
    n = int(round(horizon / dt))
    states = list(initials)
    times, poses, assigns, svs = [], [], [], []
    for k in range(n + 1):
        sv = compute_safety_values(states, vf)
        R = build_reward_matrix(sv, K)
        U, _ = solve_assignment(R)
        times.append(k * dt)
        poses.append([s.as_tuple() for s in states])
        assigns.append(U)
        svs.append(sv)
        if k == n:
            break
        nxt = []
        for i in range(3):
            target = next(
                (j for j in range(3) if U[i, j] and 0.0 <= sv[i, j] <= K), None
            )
            if target is None:
                omega = robot_policy(states[i], goals[i], params)
            else:
                omega = avoid_control(states[i], states[target], vf, params)
            nxt.append(step_vehicle(states[i], omega, dt, params))
        states = nxt
    poses_arr = np.array(poses)
    run = ThreeVehicleRun(
        times=np.array(times),
        poses=poses_arr,
        assignments=np.array(assigns),
        safety_values=np.array(svs),
        min_separation=0.0,
        capture_radius=vf.capture_radius,
    )
    run.min_separation = float(run.separations().min())
    return run
