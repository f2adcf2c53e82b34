"""HTTP service for interactive avoidance-data collection.

The browser client is a thin terminal: every 200 ms tick it posts the
currently held arrow key and draws whatever state the server returns.
All simulation happens server-side at a fixed step, so recorded
trajectories are byte-compatible with the synthetic cohort and immune
to client-side timing jitter.  Completed episodes append to per-subject
trajectory files; the overlay endpoint renders the nested forward sets
around the live human state for display.
"""

from __future__ import annotations

import base64
import json
import secrets
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .dynamics import DubinsParams, VehicleState, robot_policy, step_vehicle
from .learn import load_model
from .levelset import ValueFunction, read_value_function
from .scenario import STEP_DT, Scene, Trajectory, generate_scene
from .shfrs import (
    FixedPredictor,
    ModelPredictor,
    ShfrsConfig,
    build_shfrs,
    raster_pgm,
    region_raster,
)

KEY_CONTROLS = {"left": 0.5, "straight": 0.0, "right": -0.5}
EPISODE_STEPS = 50


@dataclass
class ServiceConfig:
    data_dir: Path
    vf_path: Path
    models_dir: Path | None = None
    stats_path: Path | None = None
    shfrs: ShfrsConfig = dc_field(default_factory=ShfrsConfig)
    frontend_dir: Path | None = None

    def __post_init__(self) -> None:
        self.data_dir = Path(self.data_dir)
        self.vf_path = Path(self.vf_path)
        if self.models_dir is not None:
            self.models_dir = Path(self.models_dir)
        if self.stats_path is not None:
            self.stats_path = Path(self.stats_path)
        if self.frontend_dir is not None:
            self.frontend_dir = Path(self.frontend_dir)


class SessionRequest(BaseModel):
    seed: int
    subject: str = "anon"
    phase: str = "main"
    model_id: str | None = None


class StepRequest(BaseModel):
    key: str


@dataclass
class _Session:
    sid: str
    scene: Scene
    subject: str
    phase: str
    model_id: str | None
    human: VehicleState
    robot: VehicleState
    step: int = 0
    done: bool = False
    times: list = dc_field(default_factory=list)
    humans: list = dc_field(default_factory=list)
    robots: list = dc_field(default_factory=list)
    controls: list = dc_field(default_factory=list)


def _state_dict(s: VehicleState) -> dict:
    return {"x": s.x, "y": s.y, "psi": s.psi}


def _substr(subject: str) -> str:
    keep = "".join(c for c in subject if c.isalnum() or c in "-_")
    return keep or "anon"


def create_app(config: ServiceConfig) -> FastAPI:
    params = DubinsParams()
    vf = read_value_function(config.vf_path)
    config.data_dir.mkdir(parents=True, exist_ok=True)
    app = FastAPI(title="avoidance data service")
    sessions: dict[str, _Session] = {}
    models: dict[str, object] = {}

    if config.models_dir is not None and config.models_dir.is_dir():
        for p in sorted(config.models_dir.glob("*.json")):
            payload = json.loads(p.read_text())
            # The directory may also hold reports and manifests.
            if isinstance(payload, dict) and "family" in payload:
                models[p.stem] = load_model(p)

    stats: dict = {}
    if config.stats_path is not None and config.stats_path.is_file():
        stats = json.loads(config.stats_path.read_text())

    def predictor_for(sess: _Session):
        if sess.model_id is not None:
            return ModelPredictor(models[sess.model_id], vf, params)
        return FixedPredictor(np.array([1.0, 1.0, 1.0]))

    @app.get("/health")
    def health() -> dict:
        return {"ok": True, "sessions": len(sessions), "models": sorted(models)}

    @app.get("/models")
    def list_models() -> dict:
        return {
            "models": [
                {
                    "id": mid,
                    "family": m.training_meta.get("family"),
                    "layout": m.layout.value,
                    "task": m.task,
                }
                for mid, m in sorted(models.items())
            ]
        }

    @app.post("/sessions")
    def create_session(req: SessionRequest) -> dict:
        if req.phase not in ("practice", "main"):
            raise HTTPException(400, "phase must be practice or main")
        if req.model_id is not None and req.model_id not in models:
            raise HTTPException(404, f"unknown model {req.model_id}")
        scene = generate_scene(req.seed, params)
        sid = secrets.token_hex(8)
        sess = _Session(
            sid=sid,
            scene=scene,
            subject=_substr(req.subject),
            phase=req.phase,
            model_id=req.model_id,
            human=scene.human0,
            robot=scene.robot0,
        )
        sessions[sid] = sess
        return {
            "session_id": sid,
            "dt": STEP_DT,
            "steps": EPISODE_STEPS,
            "capture_radius": 3.0,
            "goal": list(scene.goal),
            "human": _state_dict(sess.human),
            "robot": _state_dict(sess.robot),
        }

    def _seal(sess: _Session, last_control: float) -> None:
        # Terminal sample: the state after the last advance, labeled
        # with the final held control.
        sess.times.append(sess.step * STEP_DT)
        sess.humans.append(sess.human.as_tuple())
        sess.robots.append(sess.robot.as_tuple())
        sess.controls.append(last_control)
        sess.done = True
        if sess.phase == "practice":
            return
        traj = Trajectory(
            times=np.array(sess.times),
            humans=np.array(sess.humans),
            robots=np.array(sess.robots),
            controls=np.array(sess.controls),
            traj_id=f"{sess.subject}/{sess.sid}",
            subject_id=sess.subject,
        )
        path = config.data_dir / f"{sess.subject}.jsonl"
        with path.open("a") as fh:
            for k in range(len(traj)):
                fh.write(
                    json.dumps(
                        {
                            "t": round(float(traj.times[k]), 6),
                            "human": dict(
                                zip(("x", "y", "psi"), traj.humans[k].tolist())
                            ),
                            "robot": dict(
                                zip(("x", "y", "psi"), traj.robots[k].tolist())
                            ),
                            "u": float(traj.controls[k]),
                        },
                        sort_keys=True,
                    )
                    + "\n"
                )
        manifest_path = config.data_dir / "sessions.json"
        manifest = (
            json.loads(manifest_path.read_text()) if manifest_path.is_file() else {}
        )
        manifest[sess.sid] = {
            "subject": sess.subject,
            "scene_seed": sess.scene.seed,
            "model_id": sess.model_id,
            "steps": sess.step,
        }
        manifest_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")

    @app.post("/sessions/{sid}/step")
    def step_session(sid: str, req: StepRequest) -> dict:
        sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(404, "unknown session")
        if sess.done:
            raise HTTPException(409, "session already complete")
        if req.key not in KEY_CONTROLS:
            raise HTTPException(400, f"key must be one of {sorted(KEY_CONTROLS)}")
        u = KEY_CONTROLS[req.key]
        sess.times.append(sess.step * STEP_DT)
        sess.humans.append(sess.human.as_tuple())
        sess.robots.append(sess.robot.as_tuple())
        sess.controls.append(u)
        omega_r = robot_policy(sess.robot, sess.scene.goal, params)
        sess.human = step_vehicle(sess.human, u, STEP_DT, params)
        sess.robot = step_vehicle(sess.robot, omega_r, STEP_DT, params)
        sess.step += 1
        if sess.step >= EPISODE_STEPS:
            _seal(sess, u)
        return {
            "step": sess.step,
            "t": sess.step * STEP_DT,
            "human": _state_dict(sess.human),
            "robot": _state_dict(sess.robot),
            "done": sess.done,
        }

    @app.get("/sessions/{sid}/shfrs")
    def session_shfrs(sid: str) -> dict:
        sess = sessions.get(sid)
        if sess is None:
            raise HTTPException(404, "unknown session")
        result = build_shfrs(
            predictor_for(sess),
            sess.human,
            sess.robot,
            config.shfrs,
            params,
        )
        raster = region_raster(result)
        pgm = raster_pgm(raster, config.shfrs.n_regions)
        key = sess.model_id or "default"
        probs: list[float | None]
        if key in stats:
            entry = stats[key]
            # Stats files either map keys straight to probability lists
            # or to full estimation records.
            probs = list(entry["probabilities"] if isinstance(entry, dict) else entry)
        else:
            probs = [None] * (config.shfrs.n_regions - 1) + [1.0]
        return {
            "step": sess.step,
            "levels": config.shfrs.n_regions,
            "epsilons": list(config.shfrs.epsilons),
            "probabilities": probs,
            "nesting_ok": result.nesting_ok,
            "pgm_base64": base64.b64encode(pgm).decode(),
            "extent": {
                "xmin": result.grid.mins[0],
                "xmax": result.grid.maxs[0],
                "ymin": result.grid.mins[1],
                "ymax": result.grid.maxs[1],
            },
        }

    @app.get("/trajectories")
    def list_trajectories() -> dict:
        out = []
        for p in sorted(config.data_dir.glob("*.jsonl")):
            lines = p.read_text().splitlines()
            episodes = sum(
                1 for line in lines if line and json.loads(line)["t"] == 0.0
            )
            out.append({"subject": p.stem, "episodes": episodes, "samples": len(lines)})
        return {"subjects": out}

    @app.get("/trajectories/{subject}/export")
    def export_trajectories(subject: str) -> dict:
        path = config.data_dir / f"{_substr(subject)}.jsonl"
        if not path.is_file():
            raise HTTPException(404, f"no data for subject {subject}")
        return {"subject": _substr(subject), "jsonl": path.read_text()}

    if config.frontend_dir is not None and config.frontend_dir.is_dir():
        app.mount(
            "/", StaticFiles(directory=config.frontend_dir, html=True), name="ui"
        )

    return app
