"""Near-collision scene generation and a synthetic avoiding human.

Scenes are built backwards from the conflict: pick the robot's straight
line to its goal, pick a time and a small miss distance, then place the
human so its straight path arrives at that point at that time.  A human
who ignores the robot therefore passes inside the capture radius, which
forces every recorded run to contain a genuine avoidance decision.

The synthetic human is a hysteresis controller on the avoid-game value
of the robot's relative pose: start evading when the value dips under a
personal threshold, return to goal-seeking once it recovers past a
higher release threshold, with an occasional random control to emulate
sloppiness.  Thresholds and noise vary per simulated subject.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .dynamics import (
    DubinsParams,
    VehicleState,
    discrete_controls,
    relative_state,
    robot_policy,
    step_vehicle,
    wrap_angle,
)
from .features import FeatureSetId, build_feature_matrix
from .learn import Dataset
from .levelset import ValueFunction, value_at_flagged

ARENA_HALF = 25.0
STEP_DT = 0.2

Controller = Callable[[VehicleState, VehicleState], float]


@dataclass(frozen=True)
class Scene:
    """Initial conditions for one interaction episode."""

    human0: VehicleState
    robot0: VehicleState
    goal: tuple[float, float]
    duration: float = 10.0
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.duration <= 0.0:
            raise ValueError("duration must be positive")


def _straight_min_separation(
    a0: VehicleState, b0: VehicleState, speed: float, horizon: float
) -> float:
    """Closed-form minimum distance if both hold heading for ``horizon``."""
    dx = b0.x - a0.x
    dy = b0.y - a0.y
    vx = speed * (math.cos(b0.psi) - math.cos(a0.psi))
    vy = speed * (math.sin(b0.psi) - math.sin(a0.psi))
    vv = vx * vx + vy * vy
    if vv < 1e-15:
        return math.hypot(dx, dy)
    t = min(max(-(dx * vx + dy * vy) / vv, 0.0), horizon)
    return math.hypot(dx + vx * t, dy + vy * t)


def generate_scene(
    seed: int,
    params: DubinsParams | None = None,
    capture_radius: float = 3.0,
    duration: float = 10.0,
) -> Scene:
    """Random scene whose straight-line paths conflict mid-episode.

    Raises if ten thousand attempts fail to satisfy the geometry
    constraints, which for the default arena never happens in practice.
    """
    params = params or DubinsParams()
    rng = np.random.default_rng(seed)
    v = params.speed
    for _ in range(10_000):
        goal = rng.uniform(-15.0, 15.0, size=2)
        phi = rng.uniform(-math.pi, math.pi)
        robot0 = VehicleState(
            goal[0] - 20.0 * math.cos(phi), goal[1] - 20.0 * math.sin(phi), phi
        )
        if max(abs(robot0.x), abs(robot0.y)) > ARENA_HALF:
            continue
        # Conflict point: where the robot will be at t_star, nudged
        # sideways by less than the capture radius.
        t_star = rng.uniform(2.0, duration - 1.5)
        miss = rng.uniform(0.0, 0.8 * capture_radius)
        miss_ang = rng.uniform(-math.pi, math.pi)
        cx = robot0.x + v * t_star * math.cos(phi) + miss * math.cos(miss_ang)
        cy = robot0.y + v * t_star * math.sin(phi) + miss * math.sin(miss_ang)
        approach = rng.uniform(-math.pi, math.pi)
        human0 = VehicleState(
            cx - v * t_star * math.cos(approach),
            cy - v * t_star * math.sin(approach),
            approach,
        )
        if max(abs(human0.x), abs(human0.y)) > ARENA_HALF:
            continue
        sep0 = math.hypot(robot0.x - human0.x, robot0.y - human0.y)
        if sep0 < 2.0 * capture_radius:
            continue
        if (
            _straight_min_separation(human0, robot0, v, duration)
            >= capture_radius
        ):
            continue
        return Scene(human0, robot0, (float(goal[0]), float(goal[1])), duration, seed)
    raise RuntimeError(f"no valid scene found for seed {seed}")


@dataclass(frozen=True)
class SyntheticHumanPolicy:
    """Per-subject avoidance style: thresholds plus noise rate."""

    tau: float = 1.0
    tau_release: float = 2.0
    eta: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.tau < self.tau_release:
            raise ValueError("release threshold must exceed the entry threshold")
        if not 0.0 <= self.eta < 0.5:
            raise ValueError("noise rate must lie in [0, 0.5)")


def make_controller(
    policy: SyntheticHumanPolicy,
    vf: ValueFunction,
    params: DubinsParams | None = None,
    goal: tuple[float, float] | None = None,
) -> Controller:
    """Closure mapping (human, robot) to a discrete human turn rate.

    While not avoiding, steer toward ``goal`` if given, else hold
    heading.  While avoiding, pick the extreme turn whose one-step
    lookahead (robot assumed straight) raises the game value most.
    Draw counts from the policy RNG are fixed per call, so identical
    state sequences always see identical noise.
    """
    params = params or DubinsParams()
    rng = np.random.default_rng(policy.seed)
    controls = discrete_controls(params)
    state = {"avoiding": False}

    def lookahead_value(human: VehicleState, robot: VehicleState, omega: float) -> float:
        h2 = step_vehicle(human, omega, STEP_DT, params)
        r2 = step_vehicle(robot, 0.0, STEP_DT, params)
        val, _ = value_at_flagged(vf, relative_state(r2, h2))
        return val

    def controller(human: VehicleState, robot: VehicleState) -> float:
        noise_draw = rng.uniform()
        noise_pick = int(rng.integers(len(controls)))
        val, _ = value_at_flagged(vf, relative_state(robot, human))
        if state["avoiding"]:
            if val > policy.tau_release:
                state["avoiding"] = False
        elif val < policy.tau:
            state["avoiding"] = True
        if state["avoiding"]:
            lo = lookahead_value(human, robot, params.omega_min)
            hi = lookahead_value(human, robot, params.omega_max)
            u = params.omega_min if lo > hi else params.omega_max
        elif goal is not None:
            u = snap_control(
                robot_policy(human, goal, params), params
            )
        else:
            u = 0.0
        if noise_draw < policy.eta:
            u = controls[noise_pick]
        return u

    return controller


def snap_control(omega: float, params: DubinsParams | None = None) -> float:
    """Round a continuous turn rate to the nearest discrete control."""
    controls = discrete_controls(params or DubinsParams())
    return min(controls, key=lambda c: abs(c - omega))


@dataclass
class Trajectory:
    """One recorded episode: aligned times, poses, and human controls."""

    times: np.ndarray
    humans: np.ndarray  # (n, 3) rows (x, y, psi)
    robots: np.ndarray
    controls: np.ndarray
    traj_id: str
    subject_id: str = "anon"
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.humans = np.asarray(self.humans, dtype=float)
        self.robots = np.asarray(self.robots, dtype=float)
        self.controls = np.asarray(self.controls, dtype=float)
        n = self.times.size
        if n < 2:
            raise ValueError("trajectory needs at least two samples")
        if self.humans.shape != (n, 3) or self.robots.shape != (n, 3):
            raise ValueError("pose arrays must be (n, 3)")
        if self.controls.shape != (n,):
            raise ValueError("controls must align with times")
        dt = np.diff(self.times)
        if not np.allclose(dt, dt[0], atol=1e-9) or dt[0] <= 0.0:
            raise ValueError("times must advance by a constant positive step")
        allowed = discrete_controls(DubinsParams())
        if not np.isin(self.controls, allowed).all():
            raise ValueError(f"controls must come from {allowed}")

    def __len__(self) -> int:
        return self.times.size

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def human_states(self) -> list[VehicleState]:
        return [VehicleState(*row) for row in self.humans]

    def robot_states(self) -> list[VehicleState]:
        return [VehicleState(*row) for row in self.robots]

    def min_separation(self) -> float:
        d = self.humans[:, :2] - self.robots[:, :2]
        return float(np.hypot(d[:, 0], d[:, 1]).min())


def simulate_episode(
    scene: Scene,
    controller: Controller,
    params: DubinsParams | None = None,
    dt: float = STEP_DT,
    traj_id: str = "sim",
    subject_id: str = "anon",
) -> Trajectory:
    """Roll a scene forward; the robot tracks its goal, the human reacts.

    Records n+1 samples for n steps; the final sample's control is the
    controller's answer at the terminal state, so every row pairs a
    state with the control chosen there.
    """
    params = params or DubinsParams()
    n = int(round(scene.duration / dt))
    human = scene.human0
    robot = scene.robot0
    times, hs, rs, us = [], [], [], []
    for k in range(n + 1):
        u = controller(human, robot)
        times.append(k * dt)
        hs.append(human.as_tuple())
        rs.append(robot.as_tuple())
        us.append(u)
        if k == n:
            break
        omega_r = robot_policy(robot, scene.goal, params)
        human = step_vehicle(human, u, dt, params)
        robot = step_vehicle(robot, omega_r, dt, params)
    return Trajectory(
        times=np.array(times),
        humans=np.array(hs),
        robots=np.array(rs),
        controls=np.array(us),
        traj_id=traj_id,
        subject_id=subject_id,
        meta={"scene_seed": scene.seed, "goal": list(scene.goal)},
    )


@dataclass
class SubjectRecord:
    subject_id: str
    policy: SyntheticHumanPolicy
    trajectories: list[Trajectory]


def make_subject(
    subject_id: str,
    policy: SyntheticHumanPolicy,
    vf: ValueFunction,
    n_scenes: int,
    scene_seeds: Sequence[int],
    params: DubinsParams | None = None,
) -> SubjectRecord:
    params = params or DubinsParams()
    trajs = []
    for i in range(n_scenes):
        scene = generate_scene(int(scene_seeds[i]), params)
        controller = make_controller(policy, vf, params)
        trajs.append(
            simulate_episode(
                scene,
                controller,
                params,
                traj_id=f"{subject_id}/{i:03d}",
                subject_id=subject_id,
            )
        )
    return SubjectRecord(subject_id, policy, trajs)


def make_cohort(
    vf: ValueFunction,
    n_subjects: int = 8,
    n_scenes: int = 50,
    seed: int = 0,
    params: DubinsParams | None = None,
) -> list[SubjectRecord]:
    """Simulated data-collection campaign with per-subject styles.

    Subject thresholds, noise rates, and scene seeds all derive from
    one root seed through spawned generator streams, so the cohort is
    a pure function of ``seed``.
    """
    children = np.random.SeedSequence(seed).spawn(n_subjects)
    records = []
    for s, child in enumerate(children):
        rng = np.random.default_rng(child)
        tau = float(rng.uniform(0.5, 2.0))
        policy = SyntheticHumanPolicy(
            tau=tau,
            tau_release=tau + 1.0,
            eta=float(rng.uniform(0.05, 0.2)),
            seed=int(rng.integers(2**31)),
        )
        scene_seeds = [int(x) for x in rng.integers(2**31, size=n_scenes)]
        records.append(
            make_subject(f"s{s:02d}", policy, vf, n_scenes, scene_seeds, params)
        )
    return records


def dataset_from_trajectories(
    trajs: Sequence[Trajectory],
    vf: ValueFunction,
    layout: FeatureSetId,
    subject_id: str = "anon",
) -> Dataset:
    """Stack per-step features and labels from whole trajectories."""
    if not trajs:
        raise ValueError("no trajectories")
    Xs, ys, ids, clamps = [], [], [], []
    for tr in trajs:
        X, cl = build_feature_matrix(tr.human_states(), tr.robot_states(), vf, layout)
        Xs.append(X)
        ys.append(tr.controls)
        ids.append(np.full(len(tr), tr.traj_id, dtype=object))
        clamps.append(cl)
    return Dataset(
        features=np.concatenate(Xs),
        labels=np.concatenate(ys),
        traj_ids=np.concatenate(ids),
        layout=layout,
        subject_id=subject_id,
        clamped=np.concatenate(clamps),
    )


# ---------------------------------------------------------------------------
# Trajectory persistence: one JSON object per line, episodes separated by
# their t == 0 first sample.


def _row(t: float, h: np.ndarray, r: np.ndarray, u: float) -> dict:
    return {
        "t": round(float(t), 6),
        "human": {"x": h[0], "y": h[1], "psi": h[2]},
        "robot": {"x": r[0], "y": r[1], "psi": r[2]},
        "u": float(u),
    }


def write_trajectories(trajs: Sequence[Trajectory], path: str | Path) -> None:
    with Path(path).open("w") as fh:
        for tr in trajs:
            for k in range(len(tr)):
                fh.write(
                    json.dumps(
                        _row(tr.times[k], tr.humans[k], tr.robots[k], tr.controls[k]),
                        sort_keys=True,
                    )
                    + "\n"
                )


def read_trajectories(
    path: str | Path, subject_id: str = "anon", id_prefix: str | None = None
) -> list[Trajectory]:
    rows = [json.loads(line) for line in Path(path).read_text().splitlines() if line]
    if not rows:
        return []
    prefix = id_prefix if id_prefix is not None else Path(path).stem
    episodes: list[list[dict]] = []
    for row in rows:
        if row["t"] == 0.0 or not episodes:
            episodes.append([])
        episodes[-1].append(row)
    trajs = []
    for i, ep in enumerate(episodes):
        trajs.append(
            Trajectory(
                times=np.array([r["t"] for r in ep]),
                humans=np.array([[r["human"]["x"], r["human"]["y"], r["human"]["psi"]] for r in ep]),
                robots=np.array([[r["robot"]["x"], r["robot"]["y"], r["robot"]["psi"]] for r in ep]),
                controls=np.array([r["u"] for r in ep]),
                traj_id=f"{prefix}/{i:03d}",
                subject_id=subject_id,
            )
        )
    return trajs


def write_cohort(records: Sequence[SubjectRecord], out_dir: str | Path) -> None:
    """One JSONL per subject plus a manifest of policies and seeds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for rec in records:
        write_trajectories(rec.trajectories, out / f"{rec.subject_id}.jsonl")
        manifest[rec.subject_id] = {
            "tau": rec.policy.tau,
            "tau_release": rec.policy.tau_release,
            "eta": rec.policy.eta,
            "policy_seed": rec.policy.seed,
            "scene_seeds": [tr.meta.get("scene_seed") for tr in rec.trajectories],
            "n_trajectories": len(rec.trajectories),
        }
    (out / "subjects.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def read_cohort(data_dir: str | Path) -> dict[str, list[Trajectory]]:
    out = {}
    for path in sorted(Path(data_dir).glob("s*.jsonl")):
        sid = path.stem
        out[sid] = read_trajectories(path, subject_id=sid, id_prefix=sid)
    return out
