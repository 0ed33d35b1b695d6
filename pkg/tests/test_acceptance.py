"""Acceptance suite: one test per criterion, run at the stated scales.

Each test prints one PASS/FAIL line (run with `pytest -s` to see them all).
Several criteria share expensive Monte Carlo runs through session fixtures.
Expect several minutes of total runtime; this is the full-scale gate, the
per-module suites cover the same code at small scale.
"""

import math
from fractions import Fraction

import numpy as np
import pytest

from rangelab import dp, oracle
from rangelab.engine import SummaryStats
from rangelab.estimators import (estimate_ctilde, estimate_gamma, estimate_q,
                                 estimate_v, ld_curve, range_stats_from_positions,
                                 scaling_2d, simulate_range_ratios)
from rangelab.harmonic import harmonic_ctilde
from rangelab.lattice import SeedSpec, StepDistribution, walk_positions
from rangelab.oracle import _enumerate_nodes
from rangelab.tracker import stats_from_position_list

pytestmark = pytest.mark.acceptance

SIMPLE = {d: StepDistribution.simple(d) for d in (1, 2, 3)}
PI = math.pi


def _report(criterion: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {criterion:02d} {'PASS' if ok else 'FAIL'}: {detail}",
          flush=True)


def _combined_se(*stats: SummaryStats) -> float:
    return math.sqrt(sum(s.stderr ** 2 for s in stats))


# --------------------------------------------------------------------------
# shared expensive runs


@pytest.fixture(scope="session")
def enumeration_sweep_d2():
    """One pass over every d=2 simple path with n <= 10: tracker snapshot
    vs literal recomputation, plus all combinatorial invariants."""
    stats = {"nodes": 0, "mismatches": 0}

    def visit(depth, tracker, positions):
        snap = tracker.snapshot(p_max=8)
        expect = stats_from_position_list(positions, p_max=8)
        if snap != expect:
            stats["mismatches"] += 1
        snap.check_invariants()
        stats["nodes"] += 1

    _enumerate_nodes(SIMPLE[2], 10, visit)
    return stats


@pytest.fixture(scope="session")
def sampled_path_sweep():
    """10^4 random walks, n <= 64, d in {1,2,3}: streaming tracker vs
    recomputation plus invariants on every sampled path."""
    from rangelab.tracker import RangeTracker

    rng = np.random.default_rng(20260810)
    checked = 0
    mismatches = 0
    for i in range(10 ** 4):
        d = int(rng.integers(1, 4))
        n = int(rng.integers(1, 65))
        pos = walk_positions(SIMPLE[d], n, SeedSpec(31000 + i))
        tracker = RangeTracker(d)
        prev = pos[0]
        for row in pos[1:]:
            tracker.push_step(tuple(int(a - b) for a, b in zip(row, prev)))
            prev = row
        snap = tracker.snapshot(p_max=8)
        expect = stats_from_position_list([tuple(int(c) for c in row)
                                           for row in pos], p_max=8)
        if snap != expect:
            mismatches += 1
        snap.check_invariants()
        checked += 1
    return {"paths": checked, "mismatches": mismatches}


@pytest.fixture(scope="session")
def harmonic_values():
    return {r: harmonic_ctilde(r) for r in (128, 256, 512)}


@pytest.fixture(scope="session")
def scaling_run_1e6():
    return scaling_2d([10 ** 6], 100, SeedSpec(7101), p_max=4)


@pytest.fixture(scope="session")
def d3_ratios_1e5():
    return simulate_range_ratios(SIMPLE[3], 10 ** 5, 200, SeedSpec(7102), p_max=2)


@pytest.fixture(scope="session")
def exact_boundary_law_n10():
    return oracle.exact_distribution(SIMPLE[2], 10, "L")


# --------------------------------------------------------------------------
# criteria


def test_criterion_01_oracle_equivalence(enumeration_sweep_d2, sampled_path_sweep):
    enum_ok = (enumeration_sweep_d2["mismatches"] == 0
               and enumeration_sweep_d2["nodes"] == 1 + oracle.enumeration_cost(4, 10))
    sample_ok = (sampled_path_sweep["mismatches"] == 0
                 and sampled_path_sweep["paths"] == 10 ** 4)
    _report(1, enum_ok and sample_ok,
            f"snapshot == recompute on {enumeration_sweep_d2['nodes']:,} "
            f"enumerated d=2 paths (n<=10) and {sampled_path_sweep['paths']:,} "
            f"sampled paths (n<=64, d in 1..3)")
    assert enum_ok and sample_ok


def test_criterion_02_combinatorial_invariants(enumeration_sweep_d2,
                                               sampled_path_sweep):
    # check_invariants() raised nowhere during either sweep
    ok = (enumeration_sweep_d2["nodes"] > 0 and sampled_path_sweep["paths"] > 0)
    _report(2, ok, "L=J^1, monotone J^p, J<=Q, sum Q=R, sum pQ=n+1, "
                   "1<=L<=R<=n+1 on every enumerated and sampled path")
    assert ok


def test_criterion_03_d1_boundary_law():
    pmfs = oracle.exact_prefix_distributions(SIMPLE[1], 16, "L")
    enum_ok = all(set(pmfs[n].support) == {2} for n in range(1, 17))
    pos = walk_positions(SIMPLE[1], 10 ** 6, SeedSpec(7103))
    sim_l = range_stats_from_positions(pos).l
    _report(3, enum_ok and sim_l == 2,
            f"L_n = 2 exactly for n=1..16 by enumeration and at n=10^6 "
            f"by simulation (got {sim_l})")
    assert enum_ok and sim_l == 2


def test_criterion_04_last_exit_identity():
    exact_res = [dp.last_exit_identity_residual(n, exact=True) for n in range(1, 9)]
    exact_ok = all(r == 0 for r in exact_res)
    double_res = [abs(dp.last_exit_identity_residual(n, exact=False))
                  for n in range(1, 51)]
    double_ok = max(double_res) < 1e-12
    _report(4, exact_ok and double_ok,
            f"residual exactly 0 (rational, n<=8); max |residual| = "
            f"{max(double_res):.2e} < 1e-12 (double, n<=50)")
    assert exact_ok and double_ok


def test_criterion_05_shifted_tail_inequality():
    reports = {d: oracle.shifted_tail_check(d, 7, 3) for d in (1, 2)}
    ok = all(not r.violations for r in reports.values())
    witnesses = {d: len(r.plain_witnesses) for d, r in reports.items()}
    _report(5, ok, f"no violations of P(L_(n+v) >= y-2dv) >= P(L_n >= y) for "
                   f"d in (1,2), n<=7, v<=3; plain-monotonicity witnesses "
                   f"found: {witnesses}")
    assert ok


def test_criterion_06_avoidance_symmetry():
    s0 = dp.avoidance_series((0, 0), 200, exact=True)
    sb = dp.avoidance_series((1, 0), 200, exact=True)
    ok = s0 == sb
    _report(6, ok, "exact DP avoidance probabilities from 0 and from b "
                   "bit-identical for all n <= 200")
    assert ok


def test_criterion_07_pair_avoidance_asymptote(compiled_kernels):
    n = 10 ** 6
    est = estimate_gamma([n], 10 ** 6, SeedSpec(7107))
    point = est.points[n]
    value = point.mean * math.log(n)
    lo, hi = 0.75 * PI / 2, 1.25 * PI / 2
    ok = lo <= value <= hi
    _report(7, ok, f"avoidance estimate * log n = {value:.4f} in "
                   f"[{lo:.4f}, {hi:.4f}] (n=10^6, 10^6 replicates, "
                   f"stderr {point.stderr:.2e})")
    assert ok


def test_criterion_08_boundary_density_self_consistency(compiled_kernels,
                                                        d3_ratios_1e5):
    est = estimate_q(SIMPLE[3], 10 ** 4, 10 ** 5, SeedSpec(7108))
    grid = est.curve.grid()
    means = [est.curve.points[k].mean for k in grid]
    decreasing = means[0] > means[1] > means[2]
    direct = d3_ratios_1e5["L_over_n"]
    upper = est.curve.points[10 ** 4]
    margin = 3 * _combined_se(direct, upper)
    below = direct.mean <= upper.mean + margin
    ok = decreasing and below
    _report(8, ok, f"P(A_k) = {[round(m, 5) for m in means]} decreasing over "
                   f"k in (100, 1000, 10000); direct L/n = {direct.mean:.5f} "
                   f"<= {upper.mean:.5f} + {margin:.5f}")
    assert ok


def test_criterion_09_event_probability_d1(compiled_kernels):
    exact = oracle.exact_event_probability(SIMPLE[1], 1)
    est = estimate_q(SIMPLE[1], 10 ** 4, 2 * 10 ** 4, SeedSpec(7109),
                     k_grid=[10 ** 4])
    tail = est.curve.points[10 ** 4].mean
    ok = exact == Fraction(1, 2) and tail < 0.05
    _report(9, ok, f"exact P(A_1) = {exact} (= 1/2); d=1 estimate at k=10^4 "
                   f"is {tail:.4f} < 0.05 (recurrence)")
    assert ok


def test_criterion_10_ctilde_cross_method(compiled_kernels, harmonic_values):
    vals = harmonic_values
    spread = max(vals.values()) - min(vals.values())
    harmonic_ok = spread < 0.01
    est = estimate_ctilde(10 ** 6, 3 * 10 ** 4, SeedSpec(7110))
    lo = est.bracket.lower.mean - 3 * est.bracket.lower.stderr
    hi = est.bracket.upper.mean + 3 * est.bracket.upper.stderr
    target = vals[512]
    bracket_ok = lo <= target <= hi
    ok = harmonic_ok and bracket_ok
    _report(10, ok, f"harmonic values {({r: round(v, 6) for r, v in vals.items()})} "
                    f"spread {spread:.2e} < 0.01; MC bracket "
                    f"[{est.bracket.lower.mean:.4f}, {est.bracket.upper.mean:.4f}] "
                    f"contains {target:.4f}")
    assert ok


def test_criterion_11_planar_scaling_band(scaling_run_1e6, harmonic_values):
    n = 10 ** 6
    scale_l = scaling_run_1e6.row("L", n).scaled
    band_ok = 3.45 <= scale_l.mean <= 25.66
    ctilde = harmonic_values[512]
    ordered = True
    detail = [f"EL*(log n)^2/n = {scale_l.mean:.3f} in [3.45, 25.66]"]
    ratio_lo, ratio_hi = ctilde / 4, 4 * ctilde
    for p in (1, 2, 3):
        jx = scaling_run_1e6.row("J_exact", n, p).scaled
        jg = scaling_run_1e6.row("J_atleast", n, p).scaled
        ordered &= jx.mean <= jg.mean + 1e-12
        ordered &= jg.mean <= scale_l.mean + 1e-12
        if p > 1:
            prev_jx = scaling_run_1e6.row("J_exact", n, p - 1).scaled
            prev_jg = scaling_run_1e6.row("J_atleast", n, p - 1).scaled
            rx = jx.mean / prev_jx.mean
            rg = jg.mean / prev_jg.mean
            ordered &= ratio_lo <= rx <= ratio_hi
            ordered &= ratio_lo <= rg <= ratio_hi
            detail.append(f"J^({p})/J^({p - 1}) = {rx:.3f}, "
                          f"J^{p}/J^{p - 1} = {rg:.3f} in "
                          f"[{ratio_lo:.3f}, {ratio_hi:.3f}]")
    ok = band_ok and ordered
    _report(11, ok, "; ".join(detail))
    assert ok


def test_criterion_12_rate_curve_desk_scale(compiled_kernels,
                                            exact_boundary_law_n10):
    n = 10
    pmf = exact_boundary_law_n10
    xs = [k / 10 for k in range(13)]
    assert all((n * x).is_integer() for x in xs)
    curve = ld_curve(SIMPLE[2], n, xs, 10 ** 6, SeedSpec(7112))
    psi = curve.psi()
    monotone = all(b >= a for a, b in zip(psi, psi[1:]))
    ci_ok = True
    for x, count in zip(curve.xs, curve.tail_counts):
        exact_tail = pmf.tail_ge(n * x)
        if exact_tail == 0:
            ci_ok &= count == 0
            continue
        p_hat = count / curve.reps
        se = math.sqrt(max(p_hat * (1 - p_hat), 1e-12) / curve.reps)
        lo = -math.log(min(p_hat + 3 * se, 1.0)) / n if p_hat + 3 * se > 0 else 0.0
        hi = -math.log(max(p_hat - 3 * se, 1e-300)) / n
        exact_psi = -math.log(exact_tail) / n
        ci_ok &= lo <= exact_psi <= hi
    infinity_ok = all(math.isinf(s) == (x > (n + 1) / n)
                      for x, s in zip(curve.xs, psi))
    straight_line_ok = pmf.tail_ge(n) >= Fraction(4, 4 ** n)
    ok = monotone and ci_ok and infinity_ok and straight_line_ok
    _report(12, ok, f"exact psi_10 inside 3-se MC bands at all grid points "
                    f"with positive tail; monotone; psi = +inf exactly above "
                    f"x = 1.1; P(L_10 >= 10) = {float(pmf.tail_ge(10)):.2e} "
                    f">= 4/4^10 = {4 / 4 ** 10:.2e}")
    assert ok


def test_criterion_13_known_limit_cross_checks(compiled_kernels, d3_ratios_1e5,
                                               scaling_run_1e6):
    # multiplicity-one density against the squared escape probability (d=3)
    v_est = estimate_v(SIMPLE[3], [10 ** 5], 2 * 10 ** 4, SeedSpec(7113))
    v_hat = v_est.points[10 ** 5]
    q1 = d3_ratios_1e5["Q1_over_n"]
    v_sq = v_hat.mean ** 2
    se_v_sq = 2 * v_hat.mean * v_hat.stderr
    margin = 3 * math.sqrt(q1.stderr ** 2 + se_v_sq ** 2)
    escape_sq_ok = abs(q1.mean - v_sq) <= margin
    # planar multiplicity-one scaling band (d=2)
    q1_2d = scaling_run_1e6.row("Q", 10 ** 6, 1).scaled
    lo, hi = 0.6 * PI ** 2, 1.4 * PI ** 2
    planar_band_ok = lo <= q1_2d.mean <= hi
    ok = escape_sq_ok and planar_band_ok
    _report(13, ok, f"d=3: Q1/n = {q1.mean:.5f} vs vhat^2 = {v_sq:.5f} "
                    f"(|diff| <= {margin:.5f}); d=2: EQ1*(log n)^2/n = "
                    f"{q1_2d.mean:.3f} in [{lo:.3f}, {hi:.3f}]")
    assert ok


def test_criterion_14_worker_determinism(tmp_path, compiled_kernels):
    from rangelab.cli import main

    out = str(tmp_path)
    base = ["--seed", "7114", "--out", out]
    runs = {
        "simulate": ["simulate", "--d", "2", "--n", "1000", "--reps", "10"],
        "estimate": ["estimate", "v", "--d", "2", "--k-grid", "100,1000",
                     "--reps", "4000"],
    }
    ok = True
    for name, args in runs.items():
        assert main([*args, *base, "--workers", "1", "--tag", f"{name}-w1"]) == 0
        assert main([*args, *base, "--workers", "4", "--tag", f"{name}-w4"]) == 0
        prefix = args[0]
        a = (tmp_path / f"{prefix}-{name}-w1.csv").read_bytes()
        b = (tmp_path / f"{prefix}-{name}-w4.csv").read_bytes()
        ok &= a == b
    _report(14, ok, "CSV outputs byte-identical across worker counts "
                    "(simulate, estimate v)")
    assert ok
