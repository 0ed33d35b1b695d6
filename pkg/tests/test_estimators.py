import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangelab import dp, oracle
from rangelab.engine import SummaryStats
from rangelab.estimators import (estimate_ctilde, estimate_gamma, estimate_q,
                                 estimate_multiplicity_limits, estimate_v,
                                 ld_curve,
                                 pack_positions, range_stats_from_positions,
                                 scaling_2d, simulate_range_ratios)
from rangelab.harmonic import harmonic_ctilde
from rangelab.lattice import (SeedSpec, StepDistribution, WalkPath,
                              walk_positions)
from rangelab.tracker import recompute_from_scratch


def _combined_se(a: SummaryStats, b: SummaryStats) -> float:
    return math.sqrt(a.stderr ** 2 + b.stderr ** 2)


class TestPackedStats:
    @settings(max_examples=60)
    @given(st.sampled_from([1, 2, 3]), st.integers(0, 50), st.integers(0, 2 ** 30))
    def test_matches_recompute(self, d, n, seed):
        dist = StepDistribution.simple(d)
        pos = walk_positions(dist, n, SeedSpec(seed))
        fast = range_stats_from_positions(pos, p_max=6)
        path = WalkPath.from_arrays(np.diff(pos, axis=0)) if n else \
            WalkPath(d, (0,) * d, ())
        assert fast == recompute_from_scratch(path, p_max=6)

    def test_pack_unique(self):
        pos = walk_positions(StepDistribution.simple(3), 500, SeedSpec(3))
        keys = pack_positions(pos)
        assert len(np.unique(keys)) == len({tuple(r) for r in pos})

    def test_pack_bounds(self):
        with pytest.raises(OverflowError):
            pack_positions(np.array([[2 ** 40, 0]], dtype=np.int64))

    def test_unsupported_dimension(self):
        with pytest.raises(ValueError):
            pack_positions(np.zeros((2, 4), dtype=np.int64))


class TestSimulateRatios:
    def test_d1_is_deterministic_two_over_n(self):
        res = simulate_range_ratios(StepDistribution.simple(1), 50, 40, SeedSpec(5))
        l = res["L_over_n"]
        assert l.mean == pytest.approx(2 / 50)
        assert l.variance == 0.0

    def test_identity_channels(self):
        res = simulate_range_ratios(StepDistribution.simple(2), 200, 30, SeedSpec(6),
                                    p_max=3)
        # J^1 == L and the Q column partitions R
        assert res["Jatleast1_over_n"].mean == pytest.approx(res["L_over_n"].mean)
        q_total = sum(res[f"Q{p}_over_n"].mean for p in (1, 2, 3))
        assert q_total == pytest.approx(res["R_over_n"].mean)

    def test_worker_invariance(self):
        a = simulate_range_ratios(StepDistribution.simple(2), 100, 20, SeedSpec(7))
        b = simulate_range_ratios(StepDistribution.simple(2), 100, 20, SeedSpec(7),
                                  workers=4)
        assert a == b

    def test_d4_tracker_fallback(self):
        res = simulate_range_ratios(StepDistribution.simple(4), 30, 10, SeedSpec(8))
        # transient enough that nearly everything is boundary
        assert 0 < res["L_over_n"].mean <= res["R_over_n"].mean
        assert res["R_over_n"].count == 10


class TestEstimateQ:
    def test_matches_exact_event_probability(self, compiled_kernels):
        dist = StepDistribution.simple(1)
        est = estimate_q(dist, 1, 100000, SeedSpec(11), k_grid=[1])
        exact = float(oracle.exact_event_probability(dist, 1))
        point = est.curve.points[1]
        assert abs(point.mean - exact) < 3 * point.stderr

    def test_grid_monotone_pathwise(self, compiled_kernels):
        est = estimate_q(StepDistribution.simple(3), 1000, 20000, SeedSpec(12))
        grid = est.curve.grid()
        means = [est.curve.points[k].mean for k in grid]
        assert means == sorted(means, reverse=True)

    def test_recurrent_d1_vanishes(self, compiled_kernels):
        est = estimate_q(StepDistribution.simple(1), 2000, 20000, SeedSpec(13),
                         k_grid=[2000])
        assert est.curve.points[2000].mean < 0.05

    def test_bracket_members(self, compiled_kernels):
        est = estimate_q(StepDistribution.simple(3), 300, 20000, SeedSpec(14),
                         n_direct=3000, reps_direct=40)
        assert est.bracket is not None
        assert est.bracket.lower is est.direct
        assert est.bracket.upper is est.curve.points[300]

    def test_generic_engine_agrees(self):
        # forcing the slow path through a non-unit support that still has
        # the same event structure is impossible; instead verify the slow
        # path against the exact oracle directly on a biased walk
        dist = StepDistribution((((1,), Fraction(1, 4)), ((-1,), Fraction(3, 4))), 1)
        est = estimate_q(dist, 2, 30000, SeedSpec(15), k_grid=[1, 2])
        assert est.curve.meta["engine"] == "generic"
        # exact by hand: A_1 = {fwd_1, dual_1 don't cover {-1,1}} and no
        # return; coverage misses iff the signs agree.  fwd=+1 w.p. 1/4,
        # dual=-(X') so dual=+1 w.p. 3/4: P(same sign) = 1/4*3/4 + 3/4*1/4
        exact = 1 / 4 * 3 / 4 + 3 / 4 * 1 / 4
        point = est.curve.points[1]
        assert abs(point.mean - exact) < 4 * point.stderr


class TestMultiplicityLimits:
    def test_p1_reduces_to_event_family(self, compiled_kernels):
        dist = StepDistribution.simple(3)
        q = estimate_q(dist, 500, 15000, SeedSpec(21), k_grid=[50, 500])
        t2 = estimate_multiplicity_limits(dist, 1, 500, 15000, SeedSpec(21), k_grid=[50, 500])
        for k in (50, 500):
            assert t2.atleast_curve.points[k] == q.curve.points[k]

    def test_exact_below_atleast(self, compiled_kernels):
        t2 = estimate_multiplicity_limits(StepDistribution.simple(3), 2, 400, 15000,
                               SeedSpec(22))
        for k in t2.exact_curve.grid():
            assert t2.exact_curve.points[k].mean <= t2.atleast_curve.points[k].mean

    def test_recurrent_d1_vanishes(self, compiled_kernels):
        t2 = estimate_multiplicity_limits(StepDistribution.simple(1), 3, 2000, 20000,
                               SeedSpec(23), k_grid=[2000])
        assert t2.atleast_curve.points[2000].mean < 0.05

    def test_metadata_documents_cap_bias(self, compiled_kernels):
        t2 = estimate_multiplicity_limits(StepDistribution.simple(2), 2, 100, 1000, SeedSpec(1))
        assert "cap" in t2.exact_curve.meta["cap_bias"]

    @pytest.mark.slow
    def test_d3_p2_self_consistency(self, compiled_kernels):
        # direct J^(2)/n at n=10^5 sits below the horizon-10^4 member
        # within combined noise
        d3 = StepDistribution.simple(3)
        t2 = estimate_multiplicity_limits(d3, 2, 10 ** 4, 3 * 10 ** 4, SeedSpec(7200),
                               k_grid=[10 ** 4])
        upper = t2.exact_curve.points[10 ** 4]
        ratios = simulate_range_ratios(d3, 10 ** 5, 100, SeedSpec(7201), p_max=3)
        direct = ratios["Jexact2_over_n"]
        assert direct.mean <= upper.mean + 3 * _combined_se(direct, upper)


class TestEstimateV:
    def test_d1_decreases_to_zero(self, compiled_kernels):
        est = estimate_v(StepDistribution.simple(1), [4, 16, 64, 256], 30000,
                         SeedSpec(31))
        means = [est.points[k].mean for k in est.grid()]
        assert means == sorted(means, reverse=True)
        assert means[-1] < 0.1

    def test_d1_exact_small_values(self, compiled_kernels):
        est = estimate_v(StepDistribution.simple(1), [2, 4], 100000, SeedSpec(32))
        for k, expect in ((2, 0.5), (4, 0.375)):
            point = est.points[k]
            assert abs(point.mean - expect) < 4 * point.stderr

    def test_d2_reports_log_scaling(self, compiled_kernels):
        est = estimate_v(StepDistribution.simple(2), [100, 1000], 20000, SeedSpec(33))
        for k in (100, 1000):
            extra = est.extras[k]["value_times_log_k"]
            assert extra == pytest.approx(est.points[k].mean * math.log(k))

    def test_d3_monotone_with_shrinking_decrements(self, compiled_kernels):
        est = estimate_v(StepDistribution.simple(3), [100, 1000, 10000], 30000,
                         SeedSpec(34))
        m = [est.points[k].mean for k in est.grid()]
        assert m[0] >= m[1] >= m[2]
        assert m[0] - m[1] >= (m[1] - m[2]) - 3 * _combined_se(
            est.points[100], est.points[10000])

    @pytest.mark.slow
    def test_d2_log_rate_band(self, compiled_kernels):
        # no-return probability * log k near pi at k = 10^6 (slow log decay)
        k = 10 ** 6
        est = estimate_v(StepDistribution.simple(2), [k], 20000, SeedSpec(35))
        value = est.extras[k]["value_times_log_k"]
        assert 0.75 * math.pi <= value <= 1.25 * math.pi


class TestGammaAndCtilde:
    def test_one_step_value(self, compiled_kernels):
        est = estimate_gamma([1], 100000, SeedSpec(41))
        point = est.points[1]
        assert abs(point.mean - 0.75) < 4 * point.stderr

    def test_matches_dp_at_200(self, compiled_kernels):
        est = estimate_gamma([200], 100000, SeedSpec(42))
        exact = dp.avoidance_probability((0, 0), 200, exact=False)
        point = est.points[200]
        assert abs(point.mean - exact) < 3 * point.stderr
        # small grid points carry their own exact companion value
        assert est.extras[200]["dp_value"] == pytest.approx(exact)

    def test_dp_check_skipped_above_limit(self, compiled_kernels):
        est = estimate_gamma([1000], 2000, SeedSpec(44))
        assert "dp_value" not in est.extras[1000]

    def test_ctilde_bracket_orders(self, compiled_kernels):
        for seed in (1, 2, 3):
            est = estimate_ctilde(3000, 20000, SeedSpec(seed))
            assert est.bracket.lower.mean <= est.bracket.upper.mean
            assert est.hit_origin_first + est.hit_b_first + est.undecided == 20000

    def test_ctilde_bracket_contains_harmonic(self, compiled_kernels):
        est = estimate_ctilde(10000, 30000, SeedSpec(43))
        h = harmonic_ctilde(64)
        assert est.bracket.lower.mean - 3 * est.bracket.lower.stderr <= h
        assert h <= est.bracket.upper.mean + 3 * est.bracket.upper.stderr


class TestLdCurve:
    def test_endpoint_properties(self, compiled_kernels):
        n = 10
        curve = ld_curve(StepDistribution.simple(2), n, [0.0, 0.5, 1.0, 1.2],
                         50000, SeedSpec(51))
        psi = curve.psi()
        assert psi[0] == 0.0                      # x = 0: tail is certain
        assert math.isinf(psi[-1])                # x > (n+1)/n: impossible
        assert curve.tail_counts[-1] == 0

    def test_monotone_and_nested(self, compiled_kernels):
        curve = ld_curve(StepDistribution.simple(2), 12, np.linspace(0, 1.1, 12),
                         30000, SeedSpec(52))
        psi = curve.psi()
        assert all(b >= a for a, b in zip(psi, psi[1:]))
        counts = curve.tail_counts
        assert all(b <= a for a, b in zip(counts, counts[1:]))
        for c, s in zip(curve.tail_counts, psi):
            assert math.isinf(s) == (c == 0)

    def test_fast_path_matches_exact_tails(self, compiled_kernels):
        n = 8
        pmf = oracle.exact_distribution(StepDistribution.simple(2), n, "L")
        xs = [0.25, 0.5, 0.75, 1.0]
        curve = ld_curve(StepDistribution.simple(2), n, xs, 100000, SeedSpec(53))
        for x, count in zip(curve.xs, curve.tail_counts):
            exact = float(pmf.tail_ge(n * x))
            se = math.sqrt(max(exact * (1 - exact), 1e-9) / curve.reps)
            assert abs(count / curve.reps - exact) < 4 * se, x

    def test_generic_path_matches_exact_tails(self):
        # d=1 goes through the tracker-based route
        n = 6
        pmf = oracle.exact_distribution(StepDistribution.simple(1), n, "L")
        curve = ld_curve(StepDistribution.simple(1), n, [0.2, 0.4], 20000,
                         SeedSpec(54))
        for x, count in zip(curve.xs, curve.tail_counts):
            exact = float(pmf.tail_ge(n * x))
            se = math.sqrt(max(exact * (1 - exact), 1e-9) / curve.reps)
            assert abs(count / curve.reps - exact) < 4 * se

    def test_straight_line_lower_bound(self):
        # P(L_n >= n) >= 4 * (1/4)^n: the four straight paths alone
        pmf = oracle.exact_distribution(StepDistribution.simple(2), 10, "L")
        assert pmf.tail_ge(10) >= Fraction(4, 4 ** 10)


class TestScaling2D:
    def test_identity_channel_and_references(self, compiled_kernels):
        res = scaling_2d([64, 256], 40, SeedSpec(61), p_max=2, ctilde=0.5)
        for n in (64, 256):
            l_row = res.row("L", n)
            j1_row = res.row("J_atleast", n, 1)
            assert l_row.scaled.mean == pytest.approx(j1_row.scaled.mean)
            assert l_row.scaled.mean == pytest.approx(
                l_row.raw.mean * math.log(n) ** 2)
        assert res.references["pi2"] == pytest.approx(math.pi ** 2)
        assert res.references["J_exact(2)_band"][0] == pytest.approx(
            0.5 * math.pi ** 2 / 4)

    def test_rows_complete(self, compiled_kernels):
        res = scaling_2d([32], 10, SeedSpec(62), p_max=3)
        stats = {(r.statistic, r.p) for r in res.rows}
        assert ("L", None) in stats and ("Q", 3) in stats
        assert len(res.rows) == 2 + 3 * 3
