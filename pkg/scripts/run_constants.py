#!/usr/bin/env python3
"""Estimate the headline constants with truncation brackets.

Produces, for the chosen dimension:
  * the boundary-density limit (event-family upper members on a k-grid plus
    the direct L_n/n companion),
  * the escape probability on a horizon grid,
  * for d=2: the two-point first-passage constant by Monte Carlo bracket
    and by the independent harmonic solver, and the pair-avoidance decay.

Writes one CSV per estimator via the CLI plumbing; a smaller default
configuration finishes in about a minute.
"""

import argparse

from rangelab.cli import main as cli_main


def run(d: int, reps: int, k: int, outdir: str, seed: int) -> None:
    common = ["--seed", str(seed), "--out", outdir]
    cli_main(["estimate", "q", "--d", str(d), "--k", str(k),
              "--reps", str(reps), "--n-direct", str(10 * k),
              "--reps-direct", str(max(50, reps // 200)),
              "--tag", f"q-d{d}", *common])
    cli_main(["estimate", "v", "--d", str(d),
              "--k-grid", f"{k // 100},{k // 10},{k}",
              "--reps", str(reps), "--tag", f"v-d{d}", *common])
    if d == 2:
        cli_main(["estimate", "gamma", "--n-grid", f"{k // 100},{k // 10},{k}",
                  "--reps", str(reps), "--tag", "gamma", *common])
        cli_main(["estimate", "ctilde", "--cap", str(k), "--reps", str(reps),
                  "--tag", "ctilde", *common])
        from rangelab.harmonic import harmonic_ctilde

        for radius in (128, 256):
            print(f"harmonic first-passage constant, R={radius}: "
                  f"{harmonic_ctilde(radius):.6f}")


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--d", type=int, default=3)
    ap.add_argument("--reps", type=int, default=20000)
    ap.add_argument("--k", type=int, default=10 ** 4)
    ap.add_argument("--out", default="runs")
    ap.add_argument("--seed", type=int, default=1234)
    args = ap.parse_args()
    run(args.d, args.reps, args.k, args.out, args.seed)
