"""Full-budget end-to-end runs for both regimes.

    python3 scripts/run_ladder.py --out runs --workers 4
"""
import argparse
import os
import sys

from sumax.cli import main

INFINITE = ["--regime", "infinite-variance", "--alpha", "1.5", "--beta", "0.4",
            "--n_ladder", "1000,10000,100000", "--finite_draws", "10000", "--limit_draws", "100000",
            "--mc_budget", "1000000", "--agreement_draws", "1000", "--check_draws", "4000"]
FINITE = ["--regime", "finite-variance", "--alpha", "3", "--beta", "0.5",
          "--n_ladder", "1000,10000,100000", "--finite_draws", "10000", "--limit_draws", "20000",
          "--mc_budget", "100000", "--check_draws", "4000"]


def cli():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs")
    p.add_argument("--seed", default="2024")
    p.add_argument("--workers", default="0")
    p.add_argument("--only", choices=["infinite", "finite"])
    a = p.parse_args()
    codes = []
    for name, flags in [("infinite", INFINITE), ("finite", FINITE)]:
        if a.only and a.only != name:
            continue
        out = os.path.join(a.out, name)
        print(f"== {name}-variance run -> {out}")
        codes.append(main(["run", *flags, "--out", out, "--seed", a.seed, "--workers", a.workers]))
    return max(codes)


if __name__ == "__main__":
    sys.exit(cli())
