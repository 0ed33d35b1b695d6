import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rangelab.engine import (ReplicateError, SummaryStats,
                             block_ranges, fold_summaries, map_blocks,
                             resolve_workers, run_replicates,
                             run_replicates_table)
from rangelab.lattice import SeedSpec

floats = st.floats(-1e6, 1e6, allow_nan=False)
samples = st.lists(floats, min_size=0, max_size=40)


class TestSummaryStats:
    @given(st.lists(floats, min_size=2, max_size=50))
    def test_matches_numpy(self, xs):
        s = SummaryStats.from_samples(xs)
        assert s.count == len(xs)
        assert s.mean == pytest.approx(np.mean(xs), rel=1e-9, abs=1e-9)
        assert s.variance == pytest.approx(np.var(xs, ddof=1), rel=1e-6, abs=1e-6)
        assert s.stderr == pytest.approx(np.std(xs, ddof=1) / math.sqrt(len(xs)),
                                         rel=1e-6, abs=1e-9)

    @given(samples, samples)
    def test_merge_equals_concatenation(self, a, b):
        merged = SummaryStats.from_samples(a).merge(SummaryStats.from_samples(b))
        direct = SummaryStats.from_samples(a + b)
        assert merged.count == direct.count
        assert merged.mean == pytest.approx(direct.mean, rel=1e-9, abs=1e-9)
        assert merged.m2 == pytest.approx(direct.m2, rel=1e-7, abs=1e-6)

    @given(samples, samples)
    def test_merge_commutes(self, a, b):
        sa, sb = SummaryStats.from_samples(a), SummaryStats.from_samples(b)
        ab, ba = sa.merge(sb), sb.merge(sa)
        assert ab.count == ba.count
        assert ab.mean == pytest.approx(ba.mean, rel=1e-12, abs=1e-12)
        assert ab.m2 == pytest.approx(ba.m2, rel=1e-12, abs=1e-9)

    @given(samples, samples, samples)
    def test_merge_associates(self, a, b, c):
        sa, sb, sc = (SummaryStats.from_samples(x) for x in (a, b, c))
        left = sa.merge(sb).merge(sc)
        right = sa.merge(sb.merge(sc))
        assert left.count == right.count
        assert left.mean == pytest.approx(right.mean, rel=1e-12, abs=1e-12)
        assert left.m2 == pytest.approx(right.m2, rel=1e-9, abs=1e-6)

    @given(st.integers(0, 500), st.integers(0, 500))
    def test_bernoulli_matches_samples(self, successes, extra):
        trials = successes + extra
        xs = [1.0] * successes + [0.0] * extra
        a = SummaryStats.from_bernoulli(successes, trials)
        b = SummaryStats.from_samples(xs)
        assert a.count == b.count
        if trials:
            assert a.mean == pytest.approx(b.mean, abs=1e-12)
            assert a.m2 == pytest.approx(b.m2, abs=1e-9)

    def test_stderr_formula(self):
        s = SummaryStats.from_samples([1.0, 2.0, 3.0, 4.0])
        assert s.stderr == pytest.approx(math.sqrt(s.variance / 4))

    def test_ci_widens_with_level(self):
        s = SummaryStats.from_samples(list(range(50)))
        lo99, hi99 = s.ci(0.99)
        lo95, hi95 = s.ci(0.95)
        assert lo99 < lo95 < hi95 < hi99
        assert (lo99 + hi99) / 2 == pytest.approx(s.mean)

    def test_scaled(self):
        s = SummaryStats.from_samples([1.0, 3.0])
        t = s.scaled(10.0)
        assert t.mean == pytest.approx(10.0 * s.mean)
        assert t.variance == pytest.approx(100.0 * s.variance)

    def test_degenerate_counts(self):
        assert math.isnan(SummaryStats.empty().stderr)
        one = SummaryStats.from_samples([2.0])
        assert math.isnan(one.variance)
        assert SummaryStats.empty().merge(one) == one


class TestBlocking:
    def test_partition_is_fixed(self):
        ranges = block_ranges(10000, 1024)
        assert ranges[0] == (0, 1024)
        assert ranges[-1] == (9216, 10000)
        assert sum(hi - lo for lo, hi in ranges) == 10000

    def test_map_blocks_order(self):
        assert map_blocks(lambda i: i * i, 7, workers=3) == [i * i for i in range(7)]

    def test_resolve_workers(self, monkeypatch):
        monkeypatch.delenv("RANGELAB_WORKERS", raising=False)
        assert resolve_workers(None) == 1
        assert resolve_workers(5) == 5
        monkeypatch.setenv("RANGELAB_WORKERS", "3")
        assert resolve_workers(None) == 3
        assert resolve_workers(2) == 2  # flag beats environment


class TestRunReplicates:
    def test_constant_kernel(self):
        s = run_replicates(lambda i, rng: 1.0, 100, SeedSpec(1))
        assert s.count == 100 and s.mean == 1.0 and s.variance == 0.0

    def test_fair_coin(self):
        s = run_replicates(lambda i, rng: float(rng.random() < 0.5), 10000, 7)
        assert abs(s.mean - 0.5) < 4 * s.stderr

    def test_worker_invariance_bit_identical(self):
        kernel = lambda i, rng: rng.normal()
        a = run_replicates(kernel, 5000, SeedSpec(3), workers=1)
        b = run_replicates(kernel, 5000, SeedSpec(3), workers=8)
        assert a == b

    def test_block_size_fixed_by_caller(self):
        kernel = lambda i, rng: rng.random()
        a = run_replicates(kernel, 3000, 5, block_size=256)
        b = run_replicates(kernel, 3000, 5, block_size=256, workers=4)
        assert a == b

    def test_replicate_indices_drive_streams(self):
        seen = []
        run_replicates(lambda i, rng: seen.append(i) or 0.0, 10, 1)
        assert seen == list(range(10))

    def test_failure_carries_index(self):
        def kernel(i, rng):
            if i == 37:
                raise ValueError("boom")
            return 0.0

        with pytest.raises(ReplicateError) as err:
            run_replicates(kernel, 100, 1)
        assert err.value.replicate == 37

    def test_table_variant(self):
        res = run_replicates_table(lambda i, rng: (1.0, float(i)), ["a", "b"],
                                   50, 2, workers=2)
        assert res["a"].mean == 1.0 and res["a"].variance == 0.0
        assert res["b"].mean == pytest.approx(24.5)
        assert res["b"].count == 50

    def test_fold_summaries_empty(self):
        assert fold_summaries([]).count == 0
