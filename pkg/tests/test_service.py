"""Data-collection HTTP API: sessions, storage, replay fidelity, overlays."""

from __future__ import annotations

import base64
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from reachlearn.features import FeatureSetId
from reachlearn.learn import save_model, train_logistic
from reachlearn.levelset import write_value_function
from reachlearn.scenario import (
    dataset_from_trajectories,
    generate_scene,
    read_trajectories,
    simulate_episode,
)
from reachlearn.service import EPISODE_STEPS, KEY_CONTROLS, ServiceConfig, create_app

# the estimation pipeline writes full records; bare lists also accepted
M1_PROBS = [0.42, 0.55, 0.71, 0.9, 1.0]
STATS = {"m1": {"probabilities": M1_PROBS, "total": 100, "off_grid": 0}}


@pytest.fixture(scope="module")
def client(tmp_path_factory, brs_coarse, cohort_small):
    root = tmp_path_factory.mktemp("service")
    vf_path = root / "field.hjvf"
    write_value_function(brs_coarse, vf_path)
    models = root / "models"
    models.mkdir()
    data = dataset_from_trajectories(
        cohort_small[0].trajectories, brs_coarse, FeatureSetId.BHRD
    )
    save_model(train_logistic(data), models / "m1.json")
    # non-model JSON files in the directory must be skipped, not crash
    (models / "report.json").write_text(json.dumps({"accuracy": 0.8}))
    stats_path = root / "stats.json"
    stats_path.write_text(json.dumps(STATS))
    config = ServiceConfig(
        data_dir=root / "data",
        vf_path=vf_path,
        models_dir=models,
        stats_path=stats_path,
    )
    with TestClient(create_app(config)) as c:
        c.root = root  # type: ignore[attr-defined]
        yield c


def test_health_and_model_listing(client):
    health = client.get("/health").json()
    assert health["ok"] and health["models"] == ["m1"]
    models = client.get("/models").json()["models"]
    assert models == [
        {"id": "m1", "family": "logreg", "layout": "Bhrd", "task": "exact"}
    ]


def test_session_validation_errors(client):
    assert client.post(
        "/sessions", json={"seed": 1, "phase": "warmup"}
    ).status_code == 400
    assert client.post(
        "/sessions", json={"seed": 1, "model_id": "nope"}
    ).status_code == 404
    assert client.post(
        "/sessions/deadbeef/step", json={"key": "left"}
    ).status_code == 404


def test_full_episode_stores_replayable_trajectory(client):
    res = client.post("/sessions", json={"seed": 21, "subject": "alice"}).json()
    sid = res["session_id"]
    assert res["steps"] == EPISODE_STEPS and res["dt"] == pytest.approx(0.2)
    scene = generate_scene(21)
    assert res["human"] == {"x": scene.human0.x, "y": scene.human0.y,
                            "psi": scene.human0.psi}
    for k in range(EPISODE_STEPS):
        step = client.post(f"/sessions/{sid}/step", json={"key": "left"}).json()
        assert step["step"] == k + 1
        assert step["done"] == (k + 1 == EPISODE_STEPS)
    # a sealed session refuses further steps
    assert client.post(
        f"/sessions/{sid}/step", json={"key": "left"}
    ).status_code == 409

    stored = read_trajectories(client.root / "data" / "alice.jsonl", "alice")
    assert len(stored) == 1
    traj = stored[0]
    assert len(traj) == EPISODE_STEPS + 1
    assert (traj.controls == KEY_CONTROLS["left"]).all()

    # identical dynamics: replaying the held key through the simulator
    replay = simulate_episode(scene, lambda h, r: KEY_CONTROLS["left"])
    assert np.max(np.abs(replay.humans - traj.humans)) < 1e-9
    assert np.max(np.abs(replay.robots - traj.robots)) < 1e-9

    manifest = json.loads((client.root / "data" / "sessions.json").read_text())
    assert manifest[sid] == {
        "subject": "alice", "scene_seed": 21, "model_id": None, "steps": 50,
    }


def test_practice_sessions_leave_no_files(client):
    res = client.post(
        "/sessions", json={"seed": 5, "subject": "bob", "phase": "practice"}
    ).json()
    sid = res["session_id"]
    for _ in range(EPISODE_STEPS):
        client.post(f"/sessions/{sid}/step", json={"key": "right"})
    assert not (client.root / "data" / "bob.jsonl").exists()


def test_bad_key_rejected(client):
    sid = client.post("/sessions", json={"seed": 2}).json()["session_id"]
    assert client.post(
        f"/sessions/{sid}/step", json={"key": "up"}
    ).status_code == 400


def test_overlay_with_model_probabilities(client):
    sid = client.post(
        "/sessions", json={"seed": 9, "model_id": "m1"}
    ).json()["session_id"]
    client.post(f"/sessions/{sid}/step", json={"key": "straight"})
    overlay = client.get(f"/sessions/{sid}/shfrs").json()
    assert overlay["levels"] == 5
    assert overlay["epsilons"] == [0.0, 0.15, 0.25, 0.4, 1.0]
    assert overlay["probabilities"] == M1_PROBS
    assert overlay["nesting_ok"] is True
    pgm = base64.b64decode(overlay["pgm_base64"])
    assert pgm.startswith(b"P5\n61 61\n255\n")
    assert len(pgm) == len(b"P5\n61 61\n255\n") + 61 * 61
    ext = overlay["extent"]
    assert ext["xmax"] - ext["xmin"] == pytest.approx(24.0)


def test_overlay_without_stats_falls_back_to_outer_one(client):
    sid = client.post("/sessions", json={"seed": 9}).json()["session_id"]
    overlay = client.get(f"/sessions/{sid}/shfrs").json()
    assert overlay["probabilities"] == [None, None, None, None, 1.0]
    assert client.get("/sessions/nosuch/shfrs").status_code == 404


def test_listing_and_export(client):
    listing = client.get("/trajectories").json()["subjects"]
    alice = next(s for s in listing if s["subject"] == "alice")
    assert alice["episodes"] == 1 and alice["samples"] == 51
    export = client.get("/trajectories/alice/export").json()
    assert export["jsonl"] == (client.root / "data" / "alice.jsonl").read_text()
    assert client.get("/trajectories/carol/export").status_code == 404


def test_subject_names_are_sanitised(client):
    res = client.post(
        "/sessions", json={"seed": 11, "subject": "weird/../name!"}
    ).json()
    sid = res["session_id"]
    for _ in range(EPISODE_STEPS):
        client.post(f"/sessions/{sid}/step", json={"key": "left"})
    assert (client.root / "data" / "weirdname.jsonl").exists()
