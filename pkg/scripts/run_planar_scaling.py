#!/usr/bin/env python3
"""Planar scaling sweep: E[stat] * (log n)^2 / n curves over an n-grid.

The output CSV is plot-ready (one row per statistic per n); reference
values pi^2/2, pi^2, 2 pi^2 and the harmonic first-passage constant land
in the summary JSON.
"""

import argparse

from rangelab.cli import main as cli_main

if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--n-grid", default="10000,100000,1000000")
    ap.add_argument("--reps", type=int, default=100)
    ap.add_argument("--p-max", type=int, default=4)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()
    cli_main(["scaling-2d", "--n-grid", args.n_grid, "--reps", str(args.reps),
              "--p-max", str(args.p_max), "--seed", str(args.seed),
              "--out", args.out, "--tag", "scaling"])
