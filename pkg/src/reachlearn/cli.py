"""Command-line front end for the solver, data, learning, and service.

Every run writes a manifest next to its outputs: command, arguments,
input and output content hashes, package version, wall time.  Outputs
themselves are deterministic for fixed inputs and seeds; manifests are
the only files allowed to differ between identical reruns.

Exit codes: 2 usage error, 3 numerical failure (a solve that did not
converge), 4 verification failure (a checked property that did not
hold).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dynamics import DubinsParams, VehicleState
from .features import FeatureSetId
from .learn import cross_validate, cv_predictions, fit_family, save_model
from .levelset import (
    Grid3,
    read_value_function,
    resample,
    solve_brs,
    write_value_function,
)
from .metrics import TrajectoryPrediction, accuracy, d_start, d_end
from .mip3 import simulate_three, verify_pairwise_priority
from .scenario import dataset_from_trajectories, make_cohort, read_cohort, write_cohort
from .shfrs import ModelPredictor, FixedPredictor, ShfrsConfig, estimate_probabilities

USAGE_ERROR, NUMERICAL_ERROR, VERIFICATION_ERROR = 2, 3, 4
ENV_PREFIX = "REACHLEARN_"


class NumericalFailure(RuntimeError):
    pass


class VerificationFailure(RuntimeError):
    pass


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with path.open("rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _hash_tree(path: Path) -> dict[str, str]:
    if path.is_file():
        return {str(path): _sha256(path)}
    return {str(p): _sha256(p) for p in sorted(path.rglob("*")) if p.is_file()}


def write_manifest(
    out_path: Path, command: str, args: argparse.Namespace, inputs, outputs, t0: float
) -> None:
    manifest = {
        "command": command,
        "args": {k: str(v) for k, v in sorted(vars(args).items()) if k != "func"},
        "version": __version__,
        "inputs": {},
        "outputs": {},
        "wall_seconds": round(time.time() - t0, 3),
    }
    for p in inputs:
        manifest["inputs"].update(_hash_tree(Path(p)))
    for p in outputs:
        manifest["outputs"].update(_hash_tree(Path(p)))
    out_path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _parse_grid(text: str) -> tuple[int, int, int]:
    parts = tuple(int(p) for p in text.split(","))
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("grid must be NX,NY,NTHETA")
    return parts


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(p) for p in text.split(","))


def _parse_ints(text: str) -> tuple[int, ...]:
    return tuple(int(p) for p in text.split(","))


def cmd_brs(args: argparse.Namespace) -> int:
    t0 = time.time()
    grid = Grid3(
        mins=(-20.0, -20.0, -np.pi),
        maxs=(20.0, 20.0, np.pi),
        dims=tuple(args.grid),
    )
    warm = None
    inputs = []
    if args.warm_start:
        warm = resample(read_value_function(args.warm_start), grid)
        inputs.append(args.warm_start)
    vf = solve_brs(
        grid,
        DubinsParams(),
        capture_radius=args.capture_radius,
        tol=args.tol,
        max_iters=args.max_iters,
        order=args.order,
        initial_values=warm,
    )
    if not vf.converged:
        raise NumericalFailure(
            f"no fixed point after {vf.iterations} sweeps (residual {vf.residual:.2e})"
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_value_function(vf, out)
    print(
        f"converged in {vf.iterations} sweeps, residual {vf.residual:.2e}, "
        f"wrote {out}"
    )
    write_manifest(out.with_suffix(out.suffix + ".manifest.json"), "brs", args, inputs, [out], t0)
    return 0


def cmd_gendata(args: argparse.Namespace) -> int:
    t0 = time.time()
    vf = read_value_function(args.vf)
    records = make_cohort(
        vf, n_subjects=args.subjects, n_scenes=args.scenes, seed=args.seed
    )
    out = Path(args.out)
    write_cohort(records, out)
    n = sum(len(r.trajectories) for r in records)
    print(f"wrote {n} trajectories for {len(records)} subjects under {out}")
    write_manifest(out / "manifest.json", "gendata", args, [args.vf],
                   [out / f"{r.subject_id}.jsonl" for r in records] + [out / "subjects.json"], t0)
    return 0


def cmd_train_eval(args: argparse.Namespace) -> int:
    t0 = time.time()
    vf = read_value_function(args.vf)
    cohort = read_cohort(args.data)
    if not cohort:
        raise FileNotFoundError(f"no subject files under {args.data}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    layouts = [FeatureSetId(f) for f in args.features.split(",")]
    families = args.families.split(",")
    report: dict = {"task": args.task, "subjects": {}}
    for sid, trajs in cohort.items():
        report["subjects"][sid] = {}
        for layout in layouts:
            data = dataset_from_trajectories(trajs, vf, layout, subject_id=sid)
            for family in families:
                cv = cross_validate(
                    data, family, folds=args.folds, seed=args.seed, task=args.task
                )
                preds = [
                    TrajectoryPrediction(p, t)
                    for _, p, t in cv_predictions(
                        data, family, cv.best_hypers,
                        folds=args.folds, seed=args.seed, task=args.task,
                    )
                ]
                model = fit_family(family, data, cv.best_hypers, args.seed, args.task)
                model_id = f"{sid}_{family}_{layout.value}_{args.task}"
                save_model(model, out / f"{model_id}.json")
                report["subjects"][sid][f"{family}/{layout.value}"] = {
                    "model_id": model_id,
                    "best_hypers": cv.best_hypers,
                    "cv_accuracy": cv.mean_accuracy,
                    "fold_accuracies": cv.fold_accuracies,
                    "pooled_accuracy": accuracy(preds),
                    "d_start": d_start(preds),
                    "d_end": d_end(preds),
                }
                print(
                    f"{sid} {family:6s} {layout.value:5s} "
                    f"acc {cv.mean_accuracy:.3f} "
                    f"d_start {report['subjects'][sid][f'{family}/{layout.value}']['d_start']:.2f} "
                    f"d_end {report['subjects'][sid][f'{family}/{layout.value}']['d_end']:.2f}"
                )
    report_path = out / "report.json"
    report_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
    write_manifest(out / "manifest.json", "train-eval", args, [args.vf, args.data],
                   [report_path], t0)
    return 0


def cmd_shfrs(args: argparse.Namespace) -> int:
    t0 = time.time()
    vf = read_value_function(args.vf)
    cohort = read_cohort(args.data)
    trajs = [t for trs in cohort.values() for t in trs]
    if args.limit:
        trajs = trajs[: args.limit]
    if not trajs:
        raise FileNotFoundError(f"no trajectories under {args.data}")
    config = ShfrsConfig(
        horizon_steps=args.horizon_steps,
        dt=args.dt,
        epsilons=_parse_floats(args.eps),
        ks=_parse_ints(args.ks),
    )
    if args.model:
        from .learn import load_model

        model = load_model(args.model)
        key = Path(args.model).stem

        def predictor_for(traj):
            return ModelPredictor(model, vf)

    else:
        key = "default"

        def predictor_for(traj):
            return FixedPredictor(np.array([1.0, 1.0, 1.0]))

    rep = estimate_probabilities(
        trajs, predictor_for, config, stride=args.stride, sliced=args.sliced
    )
    probs = rep.probabilities
    if any(b < a - 1e-12 for a, b in zip(probs, probs[1:])):
        raise VerificationFailure(f"capture probabilities not nested: {probs}")
    if abs(probs[-1] - 1.0) > 1e-12:
        raise VerificationFailure(
            f"full-range level must capture everything, got {probs[-1]}"
        )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    existing = json.loads(out.read_text()) if out.is_file() else {}
    existing[key] = {
        "probabilities": probs,
        "counts": rep.counts,
        "total": rep.total,
        "off_grid": rep.off_grid,
        "epsilons": list(config.epsilons),
    }
    out.write_text(json.dumps(existing, sort_keys=True, indent=2) + "\n")
    print(
        f"{key}: anchors {rep.total}, capture probabilities "
        + " ".join(f"{p:.3f}" for p in probs)
    )
    write_manifest(out.with_suffix(".manifest.json"), "shfrs", args,
                   [args.vf, args.data], [out], t0)
    return 0


def cmd_mip3(args: argparse.Namespace) -> int:
    t0 = time.time()
    ok, checks = verify_pairwise_priority(K=args.k)
    for c in checks:
        print(
            f"pattern {c.pattern}: objective {c.objective:5.1f} "
            f"covered={c.covered} dominated={c.dominance}"
        )
    if not ok:
        raise VerificationFailure("an activity pattern left an active pair uncovered")
    vf = read_value_function(args.vf)
    inits, goals = [], []
    for a in (np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3):
        inits.append(
            VehicleState(args.radius * np.cos(a), args.radius * np.sin(a), a + np.pi)
        )
        goals.append((-args.radius * np.cos(a), -args.radius * np.sin(a)))
    run = simulate_three(
        inits, vf, goals, K=args.k, horizon=args.horizon, dt=args.dt
    )
    print(
        f"three-vehicle run: min separation {run.min_separation:.2f} "
        f"(capture radius {args.capture_radius})"
    )
    if run.min_separation < args.capture_radius:
        raise VerificationFailure(
            f"separation {run.min_separation:.2f} dips under {args.capture_radius}"
        )
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(
            json.dumps(
                {
                    "min_separation": run.min_separation,
                    "patterns_ok": ok,
                    "k": args.k,
                    "horizon": args.horizon,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n"
        )
        write_manifest(out.with_suffix(".manifest.json"), "mip3", args, [args.vf], [out], t0)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    config = ServiceConfig(
        data_dir=Path(args.data_dir),
        vf_path=Path(args.vf),
        models_dir=Path(args.models_dir) if args.models_dir else None,
        stats_path=Path(args.stats) if args.stats else None,
        frontend_dir=Path(args.frontend) if args.frontend else None,
    )
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reachlearn",
        description="avoid-game solver, human-avoidance learning, and data service",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("brs", help="solve the pairwise avoid game to convergence")
    p.add_argument("--grid", type=_parse_grid, default=(81, 81, 40))
    p.add_argument("--capture-radius", type=float, default=3.0)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=2000)
    p.add_argument("--order", type=int, choices=(1, 2), default=2)
    p.add_argument("--warm-start", default=None, help="coarser solution to resample")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_brs)

    p = sub.add_parser("gendata", help="simulate an avoidance data cohort")
    p.add_argument("--vf", required=True)
    p.add_argument("--subjects", type=int, default=8)
    p.add_argument("--scenes", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gendata)

    p = sub.add_parser("train-eval", help="cross-validate control predictors")
    p.add_argument("--data", required=True)
    p.add_argument("--vf", required=True)
    p.add_argument("--task", choices=("exact", "avoid"), default="exact")
    p.add_argument("--features", default="Bd,Bhrd")
    p.add_argument("--families", default="logreg,tree")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_eval)

    p = sub.add_parser("shfrs", help="estimate nested-tube capture probabilities")
    p.add_argument("--data", required=True)
    p.add_argument("--vf", required=True)
    p.add_argument("--model", default=None, help="predictor model file")
    p.add_argument("--eps", default="0.0,0.15,0.25,0.4,1.0")
    p.add_argument("--ks", default="2,2,1,1,1,1,1,1,1,1")
    p.add_argument("--horizon-steps", type=int, default=10)
    p.add_argument("--dt", type=float, default=0.2)
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--sliced", action="store_true")
    p.add_argument("--limit", type=int, default=0, help="cap trajectories evaluated")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_shfrs)

    p = sub.add_parser("mip3", help="verify the three-vehicle avoidance assignment")
    p.add_argument("--vf", required=True)
    p.add_argument("--k", type=float, default=2.0)
    p.add_argument("--radius", type=float, default=14.0)
    p.add_argument("--capture-radius", type=float, default=3.0)
    p.add_argument("--horizon", type=float, default=30.0)
    p.add_argument("--dt", type=float, default=0.05)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_mip3)

    p = sub.add_parser("serve", help="run the interactive data-collection service")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--vf", required=True)
    p.add_argument("--models-dir", default=None)
    p.add_argument("--stats", default=None)
    p.add_argument("--frontend", default=None)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def _apply_env_defaults(parser: argparse.ArgumentParser) -> None:
    """Let REACHLEARN_<OPTION> environment variables override defaults."""
    for action in parser._subparsers._group_actions[0].choices.values():  # type: ignore[union-attr]
        for opt in action._actions:
            if not opt.option_strings:
                continue
            env = ENV_PREFIX + opt.option_strings[-1].lstrip("-").replace("-", "_").upper()
            if env in os.environ:
                opt.default = (
                    opt.type(os.environ[env]) if opt.type else os.environ[env]
                )
                opt.required = False


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    _apply_env_defaults(parser)
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return NUMERICAL_ERROR
    except VerificationFailure as e:
        print(f"verification failure: {e}", file=sys.stderr)
        return VERIFICATION_ERROR


if __name__ == "__main__":
    sys.exit(main())
