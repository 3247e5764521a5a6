"""Train every solver on a dataset and print one row per solver.

    python scripts/compare_solvers.py                       # bundled paraphrase fixture
    python scripts/compare_solvers.py --data my.jsonl --seeds 0 1 2 --preset default

The cosine baseline only runs when --embeddings is given.
"""
import argparse
from pathlib import Path

import numpy as np

from mwp.config import PRESETS, SOLVERS, build_experiment
from mwp.harness import run_experiment

FIXTURE = Path(__file__).resolve().parents[1] / "src" / "mwp" / "data" / "paraphrase_fixture.jsonl"


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default=str(FIXTURE))
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--preset", default="fixture", choices=PRESETS)
    ap.add_argument("--embeddings")
    ap.add_argument("--out", help="write each run's report under this directory")
    args = ap.parse_args()

    solvers = [s for s in SOLVERS if s != "cosine" or args.embeddings]
    print(f"{'solver':10s} {'solution':>9s} {'template':>9s} {'oracle':>7s}  seeds")
    for solver in solvers:
        rows = []
        for seed in args.seeds:
            settings = {"solver": solver, "data": args.data, "seed": str(seed), "preset": args.preset}
            if args.embeddings:
                settings["embeddings"] = args.embeddings
            out = Path(args.out) / f"{solver}-seed{seed}" if args.out else None
            report, *_ = run_experiment(build_experiment(settings), out)
            rows.append((report.solution_accuracy, report.template_accuracy, report.oracle_accuracy))
        sol, tmpl, oracle = np.mean(rows, axis=0)
        print(f"{solver:10s} {100 * sol:9.1f} {100 * tmpl:9.1f} {100 * oracle:7.1f}  {len(rows)}")


if __name__ == "__main__":
    main()
