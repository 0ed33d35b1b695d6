"""Command-line interface: every experiment and oracle as a subcommand.

Each run writes one CSV of results plus a manifest JSON capturing the full
configuration; `--from-manifest` replays a manifest and reproduces the CSV
byte for byte.  Exit codes: 0 success, 1 experiment error (budget refusals
included), 2 usage error.
"""

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

from . import __version__, dp, harmonic, oracle
from .engine import resolve_workers
from .errors import BudgetExceededError, InvalidDistributionError
from .estimators import (estimate_ctilde, estimate_gamma, estimate_q,
                         estimate_multiplicity_limits, estimate_v, ld_curve,
                         scaling_2d,
                         simulate_range_ratios)
from .lattice import StepDistribution

_ESTIMATE_COLUMNS = ["name", "d", "n_or_k", "reps", "mean", "stderr",
                     "ci_lo", "ci_hi", "extra"]


def _fmt(x) -> str:
    if isinstance(x, float):  # covers numpy scalars, which subclass float
        if math.isinf(x):
            return "inf"
        if math.isnan(x):
            return "nan"
        return repr(float(x))
    if isinstance(x, Fraction):
        return f"{x.numerator}/{x.denominator}"
    return str(x)


def _extra(d: dict) -> str:
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def _stat_row(name: str, d: int, n_or_k, stats, extra: dict | None = None) -> dict:
    lo, hi = stats.ci()
    return {"name": name, "d": d, "n_or_k": n_or_k, "reps": stats.count,
            "mean": stats.mean, "stderr": stats.stderr, "ci_lo": lo,
            "ci_hi": hi, "extra": _extra(extra or {})}


def _load_dist(args) -> StepDistribution:
    if getattr(args, "dist_file", None):
        return StepDistribution.from_file(args.dist_file)
    preset = getattr(args, "preset", None) or "simple"
    if preset != "simple":
        return StepDistribution.from_text(preset)
    return StepDistribution.simple(args.d)


# ---------------------------------------------------------------------------
# subcommand runners: each returns (columns, rows, summary_dict_or_None)


def _run_simulate(args):
    dist = _load_dist(args)
    res = simulate_range_ratios(dist, args.n, args.reps, args.seed,
                                p_max=args.p_max, workers=args.workers)
    rows = [_stat_row(name, dist.d, args.n, stats)
            for name, stats in res.items()]
    return _ESTIMATE_COLUMNS, rows, None


def _run_enumerate(args):
    dist = _load_dist(args)
    pmf = oracle.exact_distribution(dist, args.n, statistic=args.statistic,
                                    p=args.p, budget=args.budget)
    columns = ["value", "count", "numerator", "denominator"]
    rows = [dict(zip(columns, row)) for row in pmf.to_rows()]
    mean = pmf.mean()
    summary = {"statistic": pmf.statistic, "n": pmf.n,
               "normalizer": str(pmf.normalizer),
               "mean": {"numerator": str(mean.numerator),
                        "denominator": str(mean.denominator)},
               "support_size": len(pmf.support)}
    return columns, rows, summary


def _run_identity(args):
    columns = ["check", "d", "parameter", "value", "detail"]
    rows = []
    summary: dict = {"check": args.which}
    if args.which == "last-exit":
        exact = args.mode == "rational"
        for n in range(1, args.n + 1):
            res = dp.last_exit_identity_residual(n, exact=exact, budget=args.budget)
            rows.append({"check": "last_exit_residual", "d": 2, "parameter": n,
                         "value": res, "detail": args.mode})
        summary["max_abs_residual"] = _fmt(max((abs(r["value"]) for r in rows),
                                               default=0))
    elif args.which == "tail-shift":
        report = oracle.shifted_tail_check(args.d, args.n_max, args.v_max,
                                    budget=args.budget)
        rows.append({"check": "shifted_tail_violations", "d": args.d,
                     "parameter": f"n<={args.n_max},v<={args.v_max}",
                     "value": len(report.violations),
                     "detail": _extra({"violations": [
                         [n, v, y, _fmt(a), _fmt(b)]
                         for n, v, y, a, b in report.violations]})})
        rows.append({"check": "plain_monotonicity_witnesses", "d": args.d,
                     "parameter": f"n<={args.n_max},v<={args.v_max}",
                     "value": len(report.plain_witnesses),
                     "detail": _extra({"witnesses": [
                         [n, v, y, _fmt(a), _fmt(b)]
                         for n, v, y, a, b in report.plain_witnesses[:50]]})})
        summary["violations"] = len(report.violations)
        summary["plain_witnesses"] = len(report.plain_witnesses)
    elif args.which == "event-a":
        dist = StepDistribution.simple(args.d)
        prev = None
        for k in range(0, args.k + 1):
            val = oracle.exact_event_probability(dist, k, budget=args.budget)
            monotone = prev is None or val <= prev
            rows.append({"check": "event_A_probability", "d": args.d,
                         "parameter": k, "value": val,
                         "detail": f"nonincreasing={monotone}"})
            prev = val
    return columns, rows, summary


def _run_estimate(args):
    rows = []
    summary: dict = {"estimator": args.which}
    if args.which == "q":
        dist = _load_dist(args)
        est = estimate_q(dist, args.k, args.reps, args.seed,
                         n_direct=args.n_direct, reps_direct=args.reps_direct,
                         workers=args.workers)
        for k in est.curve.grid():
            rows.append(_stat_row("P(A_k)", dist.d, k, est.curve.points[k],
                                  est.curve.meta))
        if est.bracket:
            rows.append(_stat_row("L_over_n_direct", dist.d, est.n_direct,
                                  est.direct, {"bracket_upper_k": est.bracket.value,
                                               "bracket_gap": est.bracket.gap}))
    elif args.which == "v":
        dist = _load_dist(args)
        est = estimate_v(dist, args.k_grid, args.reps, args.seed,
                         workers=args.workers)
        for k in est.grid():
            rows.append(_stat_row("P(no_return_by_k)", dist.d, k,
                                  est.points[k], est.extras.get(k)))
    elif args.which == "gamma":
        est = estimate_gamma(args.n_grid, args.reps, args.seed,
                             workers=args.workers)
        for n in est.grid():
            rows.append(_stat_row("P(avoid_pair_by_n)", 2, n, est.points[n],
                                  est.extras.get(n)))
    elif args.which == "ctilde":
        est = estimate_ctilde(args.cap, args.reps, args.seed,
                              workers=args.workers)
        counts = {"hit_origin_first": est.hit_origin_first,
                  "hit_b_first": est.hit_b_first, "undecided": est.undecided}
        rows.append(_stat_row("ctilde_lower", 2, args.cap, est.bracket.lower, counts))
        rows.append(_stat_row("ctilde_upper", 2, args.cap, est.bracket.upper, counts))
        summary["bracket_gap"] = est.bracket.gap
    elif args.which == "theorem2":
        dist = _load_dist(args)
        est = estimate_multiplicity_limits(dist, args.p, args.k, args.reps,
                                           args.seed, workers=args.workers)
        for k in est.exact_curve.grid():
            rows.append(_stat_row(f"J_exact({args.p})_limit", dist.d, k,
                                  est.exact_curve.points[k], est.exact_curve.meta))
            rows.append(_stat_row(f"J_atleast({args.p})_limit", dist.d, k,
                                  est.atleast_curve.points[k]))
    return _ESTIMATE_COLUMNS, rows, summary


def _run_ld_curve(args):
    dist = _load_dist(args)
    curve = ld_curve(dist, args.n, args.x_grid, args.reps, args.seed,
                     workers=args.workers)
    columns = ["x", "n", "reps", "tail_count", "tail_prob", "psi"]
    rows = []
    psi_json = []
    for r in curve.rows():
        rows.append({"x": r["x"], "n": curve.n, "reps": curve.reps,
                     "tail_count": r["tail_count"], "tail_prob": r["tail_prob"],
                     "psi": r["psi"]})
        infinite = math.isinf(r["psi"])
        psi_json.append({"x": r["x"], "psi": None if infinite else r["psi"],
                         "infinite": infinite})
    return columns, rows, {"n": curve.n, "reps": curve.reps, "psi": psi_json}


def _run_scaling_2d(args):
    ctilde = harmonic.harmonic_ctilde(args.harmonic_r) if args.harmonic_r else None
    result = scaling_2d(args.n_grid, args.reps, args.seed, p_max=args.p_max,
                        workers=args.workers, ctilde=ctilde)
    rows = []
    for r in result.rows:
        extra = {"scaled_by": "log(n)^2", "raw_mean": r.raw.mean}
        if r.p is not None:
            extra["p"] = r.p
        name = r.statistic if r.p is None else f"{r.statistic}({r.p})"
        rows.append(_stat_row(name + "_norm", 2, r.n, r.scaled, extra))
    summary = {"references": {k: (list(v) if isinstance(v, tuple) else v)
                              for k, v in result.references.items()}}
    return _ESTIMATE_COLUMNS, rows, summary


def _run_validate_support(args):
    dist = _load_dist(args)
    from .lattice import sublattice_index, validate_support
    idx = sublattice_index(dist.support)
    valid = validate_support(dist)
    columns = ["d", "atoms", "sublattice_index", "generates_full_lattice"]
    rows = [{"d": dist.d, "atoms": len(dist.atoms), "sublattice_index": idx,
             "generates_full_lattice": valid}]
    return columns, rows, {"generates_full_lattice": valid}


_RUNNERS = {
    "simulate": _run_simulate,
    "enumerate": _run_enumerate,
    "identity": _run_identity,
    "estimate": _run_estimate,
    "ld-curve": _run_ld_curve,
    "scaling-2d": _run_scaling_2d,
    "validate-support": _run_validate_support,
}


# ---------------------------------------------------------------------------
# argument parsing


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.replace(",", " ").split()]


def _float_grid(text: str) -> list[float]:
    """Comma list, or start:stop:step (stop inclusive up to rounding)."""
    if ":" in text:
        start, stop, step = (float(x) for x in text.split(":"))
        out = []
        x = start
        while x <= stop + 1e-12:
            out.append(round(x, 12))
            x += step
        return out
    return [float(x) for x in text.replace(",", " ").split()]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=1234, help="master seed")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: $RANGELAB_WORKERS or 1)")
    p.add_argument("--out", default="runs", help="output directory")
    p.add_argument("--tag", default=None,
                   help="output file tag (default: UTC timestamp)")


def _add_dist(p: argparse.ArgumentParser, d_default: int = 2) -> None:
    p.add_argument("--d", type=int, default=d_default, help="dimension")
    p.add_argument("--preset", default="simple",
                   help='distribution preset ("simple") or inline atom lines')
    p.add_argument("--dist-file", default=None,
                   help="file with one atom per line: dx dy ... prob")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rangelab",
        description="Range and inner-boundary statistics of lattice random walks")
    parser.add_argument("--version", action="version", version=f"rangelab {__version__}")
    parser.add_argument("--from-manifest", default=None,
                        help="replay a previous run from its manifest JSON")
    sub = parser.add_subparsers(dest="subcommand")

    p = sub.add_parser("simulate", help="tracker statistics on generated walks")
    _add_dist(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--p-max", type=int, default=8)
    _add_common(p)

    p = sub.add_parser("enumerate", help="exact laws by exhaustive enumeration")
    _add_dist(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--statistic", default="L", choices=oracle.STATISTICS[:-1])
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_ENUM_BUDGET)
    _add_common(p)

    p = sub.add_parser("identity", help="exact identity and inequality checks")
    p.add_argument("which", choices=["last-exit", "tail-shift", "event-a"])
    p.add_argument("--n", type=int, default=8, help="last-exit: max n")
    p.add_argument("--mode", default="rational", choices=["rational", "double"])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--n-max", type=int, default=7)
    p.add_argument("--v-max", type=int, default=3)
    p.add_argument("--k", type=int, default=3, help="event-a: max horizon")
    p.add_argument("--budget", type=int, default=oracle.DEFAULT_ENUM_BUDGET)
    _add_common(p)

    p = sub.add_parser("estimate", help="Monte Carlo estimators of the constants")
    p.add_argument("which", choices=["q", "v", "ctilde", "gamma", "theorem2"])
    _add_dist(p, d_default=3)
    p.add_argument("--k", type=int, default=10000, help="truncation horizon")
    p.add_argument("--k-grid", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--n-grid", type=_int_list, default=[100, 1000, 10000])
    p.add_argument("--reps", type=int, default=10000)
    p.add_argument("--n-direct", type=int, default=None)
    p.add_argument("--reps-direct", type=int, default=None)
    p.add_argument("--cap", type=int, default=10 ** 6, help="ctilde horizon M")
    p.add_argument("--p", type=int, default=2,
                   help="multiplicity for the composite estimator")
    _add_common(p)

    p = sub.add_parser("ld-curve", help="empirical large-deviation rate curve")
    _add_dist(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--x-grid", type=_float_grid,
                   default=_float_grid("0:1.1:0.1"))
    p.add_argument("--reps", type=int, default=100000)
    _add_common(p)

    p = sub.add_parser("scaling-2d", help="planar (log n)^2/n scaling curves")
    p.add_argument("--n-grid", type=_int_list, default=[10000, 100000])
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--p-max", type=int, default=4)
    p.add_argument("--harmonic-r", type=int, default=256,
                   help="radius for the reference first-passage constant (0 = skip)")
    _add_common(p)

    p = sub.add_parser("validate-support", help="does the support generate Z^d?")
    _add_dist(p)
    _add_common(p)

    return parser


# ---------------------------------------------------------------------------
# output plumbing


def _config_of(args) -> dict:
    skip = {"from_manifest"}
    cfg = {k: v for k, v in vars(args).items() if k not in skip}
    if isinstance(cfg.get("x_grid"), list):
        cfg["x_grid"] = [float(x) for x in cfg["x_grid"]]
    return cfg


def _apply_config(parser: argparse.ArgumentParser, cfg: dict) -> argparse.Namespace:
    args = argparse.Namespace(**cfg)
    args.from_manifest = None
    return args


def _write_outputs(args, columns, rows, summary) -> Path:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    tag = args.tag or _dt.datetime.now(_dt.timezone.utc).strftime("%Y%m%dT%H%M%S%f")
    base = outdir / f"{args.subcommand}-{tag}"
    csv_path = base.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])
    cfg = _config_of(args)
    cfg_json = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    manifest = {
        "tool": "rangelab",
        "version": f"{__version__}+g{hashlib.sha256(cfg_json.encode()).hexdigest()[:8]}",
        "seed": args.seed,
        "config": cfg,
        "config_hash": hashlib.sha256(cfg_json.encode()).hexdigest(),
    }
    with open(base.with_suffix(".manifest.json"), "w") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if summary is not None:
        with open(base.with_suffix(".summary.json"), "w") as fh:
            json.dump(summary, fh, sort_keys=True, indent=2)
            fh.write("\n")
    return csv_path


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.from_manifest:
        with open(args.from_manifest) as fh:
            manifest = json.load(fh)
        args = _apply_config(parser, manifest["config"])
    if not getattr(args, "subcommand", None):
        parser.print_usage(sys.stderr)
        return 2
    args.workers = resolve_workers(args.workers)
    try:
        columns, rows, summary = _RUNNERS[args.subcommand](args)
    except BudgetExceededError as exc:
        print(f"budget refusal: {exc}", file=sys.stderr)
        return 1
    except (InvalidDistributionError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    csv_path = _write_outputs(args, columns, rows, summary)
    print(csv_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
