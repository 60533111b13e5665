#!/usr/bin/env python3
"""Desk-scale versions of the three experiments, written under results/.

Usage: python scripts/run_experiments.py [--seed N] [--jobs J] [--quick]
"""

import argparse
import sys

from evdp.harness.cli import DEFAULT_SEED, main

RUNS = {
    "ci": ["--n", "1000,10000,100000", "--epsilon", "1,10,100", "--renyi-alpha", "2,10",
           "--mechanism", "gaussian,laplace", "--cells", "50", "--reps", "5"],
    "monitor": ["--epsilon", "0.05,0.5", "--mechanism", "gaussian,laplace", "--reps", "5"],
    "conformal": ["--epsilon", "0.1,1,10", "--mechanism", "gaussian,laplace", "--bins", "50",
                  "--reps", "5"],
}
QUICK = {"ci": ["--n", "1000,10000", "--reps", "1"], "monitor": ["--reps", "1"],
         "conformal": ["--reps", "1"]}


def run_all(seed: int, jobs: int, quick: bool, out: str) -> int:
    worst = 0
    for cmd, extra in RUNS.items():
        args = [cmd, "--seed", str(seed), "--jobs", str(jobs), "--out", f"{out}/{cmd}"] + extra
        if quick:
            args += QUICK[cmd]
        print("evdp " + " ".join(args), file=sys.stderr)
        code = main(args)
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="results")
    ap.add_argument("--quick", action="store_true", help="one repetition, smaller n")
    a = ap.parse_args()
    sys.exit(run_all(a.seed, a.jobs, a.quick, a.out))
