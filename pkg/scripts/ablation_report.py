#!/usr/bin/env python3
"""Summarize a cross-validation report as a feature-ablation table.

Reads the report.json written by ``reachlearn train-eval`` and prints,
per model family, the per-subject CV accuracies for each feature layout
plus the across-subject mean and the rank-test p-value of every layout
against the distance-only baseline.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from reachlearn.metrics import mann_whitney_u


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("report", help="report.json from train-eval")
    ap.add_argument("--metric", default="cv_accuracy",
                    choices=("cv_accuracy", "pooled_accuracy", "d_start", "d_end"))
    args = ap.parse_args()

    report = json.loads(Path(args.report).read_text())
    subjects = sorted(report["subjects"])
    combos = sorted({k for s in subjects for k in report["subjects"][s]})
    families = sorted({c.split("/")[0] for c in combos})
    layouts = sorted({c.split("/")[1] for c in combos})

    for family in families:
        cols = [l for l in layouts if f"{family}/{l}" in combos]
        print(f"\n{family} ({args.metric}, task {report['task']})")
        print(f"{'subject':>8s} " + " ".join(f"{l:>7s}" for l in cols))
        table = {l: [] for l in cols}
        for s in subjects:
            row = []
            for l in cols:
                v = report["subjects"][s][f"{family}/{l}"][args.metric]
                table[l].append(v)
                row.append(f"{v:7.3f}")
            print(f"{s:>8s} " + " ".join(row))
        print(f"{'mean':>8s} " + " ".join(
            f"{sum(table[l]) / len(table[l]):7.3f}" for l in cols
        ))
        if "Bd" in cols and len(subjects) >= 3:
            for l in cols:
                if l == "Bd":
                    continue
                _, p = mann_whitney_u(table[l], table["Bd"])
                print(f"{l} vs Bd: p = {p:.4f}")


if __name__ == "__main__":
    main()
