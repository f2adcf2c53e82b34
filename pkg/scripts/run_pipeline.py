#!/usr/bin/env python3
"""Run the whole experiment chain into one output directory.

Solves the pairwise avoid game (reusing an existing field if present),
simulates a cohort, cross-validates the control predictors on both
feature layouts, estimates nested-tube capture probabilities with and
without a learned predictor, and closes with the three-vehicle
assignment rollout.  ``--quick`` shrinks every stage to desk scale
(about a minute end to end); the default configuration reproduces the
full study layout and takes tens of minutes, dominated by the solve.

Every stage is the CLI run in-process, so the artifacts and manifests
are identical to what the equivalent shell commands would produce.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from reachlearn.cli import main as cli


def stage(name: str, argv: list[str]) -> None:
    t0 = time.time()
    print(f"--- {name}: reachlearn {' '.join(argv)}", flush=True)
    rc = cli(argv)
    if rc != 0:
        sys.exit(rc)
    print(f"--- {name} done in {time.time() - t0:.1f} s", flush=True)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="runs/pipeline")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--subjects", type=int, default=8)
    ap.add_argument("--scenes", type=int, default=50)
    ap.add_argument("--grid", default="81,81,40")
    ap.add_argument("--folds", type=int, default=5)
    ap.add_argument(
        "--quick", action="store_true",
        help="coarse grid, 2 subjects x 4 scenes, 3 folds",
    )
    args = ap.parse_args()
    if args.quick:
        args.grid, args.subjects, args.scenes, args.folds = "41,41,24", 2, 4, 3

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    field = out / "field.hjvf"
    if field.exists():
        print(f"--- reusing {field}")
    else:
        stage("solve", ["brs", "--grid", args.grid, "--out", str(field)])

    data = out / "data"
    stage("cohort", [
        "gendata", "--vf", str(field), "--subjects", str(args.subjects),
        "--scenes", str(args.scenes), "--seed", str(args.seed),
        "--out", str(data),
    ])

    models = out / "models"
    stage("train", [
        "train-eval", "--data", str(data), "--vf", str(field),
        "--folds", str(args.folds), "--seed", str(args.seed),
        "--out", str(models),
    ])

    stats = out / "stats.json"
    stage("tubes", [
        "shfrs", "--data", str(data), "--vf", str(field), "--out", str(stats),
    ])
    learned = sorted(models.glob("*_logreg_Bhrd_*.json"))
    if learned:
        stage("tubes+model", [
            "shfrs", "--data", str(data), "--vf", str(field),
            "--model", str(learned[0]), "--out", str(stats),
        ])

    stage("assignment", [
        "mip3", "--vf", str(field), "--out", str(out / "mip3.json"),
    ])
    print(f"all artifacts under {out}")


if __name__ == "__main__":
    main()
