"""Monte Carlo estimators for the limit constants and scaling curves of the
range and its inner boundary.

Infinite-horizon event probabilities (never returning, never covering the
origin's neighborhood) are only approximable; every estimator here reports
monotone finite-horizon approximants as explicit brackets with the bias
direction documented in its metadata, never a silently corrected point.

Coverage-event sampling uses a failure-time representation: one pass per
replicate records when each clause of the event first breaks, after which
the truncated indicator at ANY horizon k is a pure function of those times.
A whole k-grid is therefore evaluated on common random numbers, which makes
the monotone decrease of the event family hold pathwise, not only in
expectation.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .engine import (BracketEstimate, SummaryStats, block_ranges, map_blocks,
                     run_replicates_table)
from .lattice import Point, SeedSpec, StepDistribution, neighbors, origin
from .tracker import RangeStats

#: replicates per kernel invocation; fixed so results never depend on workers
KERNEL_BLOCK = 4096
PATH_BLOCK = 64

_SHIFTS = {1: 0, 2: 31, 3: 21}


def pack_positions(positions: np.ndarray) -> np.ndarray:
    """Pack (m, d) integer positions into unique int64 keys (d <= 3)."""
    d = positions.shape[1]
    if d not in _SHIFTS:
        raise ValueError(f"packing supports d <= 3, got d={d}")
    if d == 1:
        return positions[:, 0].astype(np.int64, copy=True)
    shift = _SHIFTS[d]
    cap = 1 << (shift - 1)
    if np.abs(positions).max(initial=0) >= cap - 1:
        raise OverflowError("coordinates exceed the packed key range")
    keys = positions[:, 0].astype(np.int64, copy=True)
    for i in range(1, d):
        keys += positions[:, i].astype(np.int64) << (shift * i)
    return keys


def _neighbor_offsets(d: int) -> list[int]:
    shift = _SHIFTS[d]
    out = []
    for i in range(d):
        stride = 1 << (shift * i) if i else 1
        out.extend((-stride, stride))
    return out


def range_stats_from_positions(positions: np.ndarray, p_max: int = 8) -> RangeStats:
    """Range statistics of a full path, vectorized (the estimator fast path;
    the streaming tracker and the literal recomputation are its oracles)."""
    d = positions.shape[1]
    n = positions.shape[0] - 1
    keys = np.sort(pack_positions(positions))
    u, counts = np.unique(keys, return_counts=True)
    r = len(u)
    interior = np.ones(r, dtype=bool)
    for off in _neighbor_offsets(d):
        probe = u + off
        idx = np.searchsorted(u, probe)
        idx_c = np.minimum(idx, r - 1)
        interior &= (idx < r) & (u[idx_c] == probe)
    boundary_mask = ~interior
    l = int(boundary_mask.sum())
    pooled = np.minimum(counts, p_max)
    q_hist = np.bincount(pooled, minlength=p_max + 1)
    overflow = int(counts[counts >= p_max].sum())
    jx_hist = np.bincount(pooled[boundary_mask], minlength=p_max + 1)
    q = {p: int(c) for p, c in enumerate(q_hist) if p >= 1 and c}
    j_exact = {p: int(c) for p, c in enumerate(jx_hist) if p >= 1 and c}
    j_atleast: dict[int, int] = {}
    tail = 0
    for p in range(p_max, 0, -1):
        tail += j_exact.get(p, 0)
        if tail:
            j_atleast[p] = tail
    return RangeStats(n=n, r=r, l=l, p_max=p_max, q=q, j_exact=j_exact,
                      j_atleast=j_atleast, overflow_visits=overflow)


# ---------------------------------------------------------------------------
# direct simulation of the per-step densities


def ratio_names(p_max: int) -> list[str]:
    names = ["L_over_n", "R_over_n"]
    names += [f"Q{p}_over_n" for p in range(1, p_max + 1)]
    names += [f"Jexact{p}_over_n" for p in range(1, p_max + 1)]
    names += [f"Jatleast{p}_over_n" for p in range(1, p_max + 1)]
    return names


def path_stats_any_d(positions: np.ndarray, p_max: int = 8) -> RangeStats:
    """Range statistics of a position array; vectorized for d <= 3, streamed
    through the tracker for higher dimensions."""
    d = positions.shape[1]
    if d <= 3:
        return range_stats_from_positions(positions, p_max=p_max)
    from .tracker import RangeTracker

    tracker = RangeTracker(d)
    prev = positions[0]
    for row in positions[1:]:
        tracker.push_step(tuple(int(a - b) for a, b in zip(row, prev)))
        prev = row
    return tracker.snapshot(p_max=p_max)


def simulate_range_ratios(dist: StepDistribution, n: int, reps: int,
                          seed: SeedSpec | int, p_max: int = 8,
                          workers: int = 1) -> dict[str, SummaryStats]:
    """Replicate-averaged L_n/n, R_n/n, Q_n^(p)/n, J densities at one n."""
    if n < 1:
        raise ValueError("n must be >= 1")

    def kernel(i, rng):
        pos = _rng_positions(dist, n, rng)
        stats = path_stats_any_d(pos, p_max=p_max)
        row = [stats.l / n, stats.r / n]
        row += [stats.q.get(p, 0) / n for p in range(1, p_max + 1)]
        row += [stats.j_exact.get(p, 0) / n for p in range(1, p_max + 1)]
        row += [stats.j_atleast.get(p, 0) / n for p in range(1, p_max + 1)]
        return row

    return run_replicates_table(kernel, ratio_names(p_max), reps, seed,
                                workers=workers, block_size=PATH_BLOCK)


def _rng_positions(dist: StepDistribution, n: int, rng,
                   negate_steps: bool = False) -> np.ndarray:
    from .lattice import _draw_atom_indices  # same chunking as iter_increments
    idx = np.concatenate(list(_draw_atom_indices(dist, n, rng))) if n else \
        np.empty(0, dtype=np.int64)
    inc = dist.increments_array()[idx]
    if negate_steps:
        inc = -inc
    pos = np.zeros((n + 1, dist.d), dtype=np.int64)
    np.cumsum(inc, axis=0, out=pos[1:])
    return pos


# ---------------------------------------------------------------------------
# coverage-event estimators (boundary density q and its multiplicity
# refinements)


def _use_compiled(dist: StepDistribution) -> bool:
    return dist.is_simple and dist.d in (1, 2, 3)


def _coverage_features(dist: StepDistribution, reps: int, kmax: int, p: int,
                       seed: SeedSpec | int, workers: int = 1) -> np.ndarray:
    """(reps, 4 + 4d) failure-time feature rows; see kernels.coverage_features."""
    master = seed.master if isinstance(seed, SeedSpec) else seed
    d = dist.d
    ranges = block_ranges(reps, KERNEL_BLOCK)
    if _use_compiled(dist):
        def one_block(b):
            lo, hi = ranges[b]
            return kernels.coverage_features(kernels.seed_word(master), lo, hi - lo, kmax, d, p)
    else:
        def one_block(b):
            lo, hi = ranges[b]
            return _coverage_features_generic(dist, master, lo, hi, kmax, p)
    return np.concatenate(map_blocks(one_block, len(ranges), workers), axis=0)


def _coverage_features_generic(dist: StepDistribution, master: int, lo: int,
                               hi: int, kmax: int, p: int) -> np.ndarray:
    """Feature rows for an arbitrary step law (slow path, any dimension is
    accepted but the event needs the unit neighbors of the origin)."""
    d = dist.d
    nbrs = neighbors(origin(d))
    sentinel = kmax + 1
    ncols = 4 + 4 * d
    out = np.full((hi - lo, ncols), sentinel, dtype=np.int64)
    for row, rep in enumerate(range(lo, hi)):
        spec = SeedSpec(master, rep)
        out[row, 2] = 0
        out[row, 3] = 0
        for leg in range(2):
            pos = _rng_positions(dist, kmax, spec.rng(leg), negate_steps=bool(leg))
            out[row, leg] = _first_visit(pos, origin(d), sentinel)
            for j, nb in enumerate(nbrs):
                out[row, 4 + 2 * d * leg + j] = _first_visit(pos, nb, sentinel)
        t_max = 0
        mask = 0
        for i in range(p - 1):
            pos = _rng_positions(dist, kmax, spec.rng(2 + i))
            t_ret = _first_visit(pos, origin(d), sentinel)
            t_max = max(t_max, t_ret)
            upto = pos[1:t_ret + 1] if t_ret <= kmax else pos[1:]
            for j, nb in enumerate(nbrs):
                if (upto == np.asarray(nb)).all(axis=1).any():
                    mask |= 1 << j
        out[row, 2] = t_max
        out[row, 3] = mask
    return out


def _first_visit(pos: np.ndarray, target: Point, sentinel: int) -> int:
    hits = (pos[1:] == np.asarray(target, dtype=np.int64)).all(axis=1)
    idx = int(np.argmax(hits))
    return idx + 1 if hits[idx] else sentinel


def _event_counts(features: np.ndarray, d: int, k_grid: list[int],
                  require_dual_noreturn: bool) -> dict[int, int]:
    """Successes of the truncated event at each horizon in the grid."""
    t_ret_f = features[:, 0]
    t_ret_d = features[:, 1]
    aux_tmax = features[:, 2]
    aux_mask = features[:, 3]
    cover = features[:, 4:4 + 2 * d]
    cover_dual = features[:, 4 + 2 * d:4 + 4 * d]
    first_cover = np.minimum(cover, cover_dual)
    out = {}
    for k in k_grid:
        leg_cov = first_cover <= k
        aux_cov = (aux_mask[:, None] >> np.arange(2 * d)[None, :]) & 1
        covered_all = (leg_cov | aux_cov.astype(bool)).all(axis=1)
        ok = (t_ret_f > k) & (aux_tmax <= k) & ~covered_all
        if require_dual_noreturn:
            ok &= t_ret_d > k
        out[k] = int(ok.sum())
    return out


@dataclass(frozen=True)
class CurveEstimate:
    """Per-parameter summaries of one statistic along a grid."""

    name: str
    parameter: str
    points: dict[int, SummaryStats]
    extras: dict[int, dict] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def grid(self) -> list[int]:
        return sorted(self.points)


def default_k_grid(k: int) -> list[int]:
    grid = sorted({max(1, k // 100), max(1, k // 10), k})
    return grid


@dataclass(frozen=True)
class QEstimate:
    """Bracketed estimate of the boundary density limit.

    The event curve P(A_k) decreases to the limit from above as the horizon
    grows (upper approximants); the direct mean of L_n/n at a large n is the
    converging companion.  The bracket pairs the direct member with the
    largest-horizon event member.
    """

    curve: CurveEstimate
    direct: SummaryStats | None
    n_direct: int | None
    bracket: BracketEstimate | None


def estimate_q(dist: StepDistribution, k: int, reps: int, seed: SeedSpec | int,
               k_grid: list[int] | None = None, n_direct: int | None = None,
               reps_direct: int | None = None, workers: int = 1) -> QEstimate:
    """Estimate the a.s. limit of L_n/n via the coverage event family."""
    grid = sorted(set(k_grid)) if k_grid else default_k_grid(k)
    kmax = max(grid)
    feats = _coverage_features(dist, reps, kmax, 1, seed, workers)
    counts = _event_counts(feats, dist.d, grid, require_dual_noreturn=False)
    points = {kk: SummaryStats.from_bernoulli(c, reps) for kk, c in counts.items()}
    curve = CurveEstimate(
        "P(A_k)", "k", points,
        meta={"direction": "nonincreasing in k; each member >= the limit",
              "engine": "compiled" if _use_compiled(dist) else "generic"})
    direct = None
    bracket = None
    if n_direct:
        nrep = reps_direct or max(32, reps // 100)
        ratios = simulate_range_ratios(dist, n_direct, nrep, seed,
                                       p_max=2, workers=workers)
        direct = ratios["L_over_n"]
        bracket = BracketEstimate(
            lower=direct, upper=points[kmax], parameter="k", value=kmax,
            note="upper member is the horizon-k event probability (>= limit); "
                 "lower member is the direct mean of L_n/n, which converges "
                 "to the limit from above but sits below the event member")
    return QEstimate(curve, direct, n_direct, bracket)


@dataclass(frozen=True)
class MultiplicityLimitEstimate:
    """Horizon-truncated estimates of the multiplicity-refined boundary
    densities: limits of J_n^(p)/n (exact multiplicity, dual return also
    forbidden) and J_n^p/n (at-least multiplicity)."""

    p: int
    exact_curve: CurveEstimate
    atleast_curve: CurveEstimate

    def bracket_pair(self, k: int) -> tuple[SummaryStats, SummaryStats]:
        return self.exact_curve.points[k], self.atleast_curve.points[k]


def estimate_multiplicity_limits(dist: StepDistribution, p: int, k: int,
                                 reps: int, seed: SeedSpec | int,
                                 k_grid: list[int] | None = None,
                                 workers: int = 1) -> MultiplicityLimitEstimate:
    """Composite sampling: forward and dual legs to the horizon plus p-1
    return-conditioned walks capped there.

    A capped auxiliary walk zeroes the indicator (downward bias on the
    return clause); the finite legs can only shrink the covering union and
    keep the no-return clauses alive (upward bias).  The net direction is
    not signed; both members are reported with the horizon.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    grid = sorted(set(k_grid)) if k_grid else default_k_grid(k)
    kmax = max(grid)
    feats = _coverage_features(dist, reps, kmax, p, seed, workers)
    meta = {"cap_bias": "capped auxiliary return -> indicator 0 (downward); "
                        "finite forward/dual horizon -> upward",
            "engine": "compiled" if _use_compiled(dist) else "generic"}
    exact_counts = _event_counts(feats, dist.d, grid, require_dual_noreturn=True)
    atleast_counts = _event_counts(feats, dist.d, grid, require_dual_noreturn=False)
    exact_curve = CurveEstimate(
        f"J_exact({p}) limit", "k",
        {kk: SummaryStats.from_bernoulli(c, reps) for kk, c in exact_counts.items()},
        meta=meta)
    atleast_curve = CurveEstimate(
        f"J_atleast({p}) limit", "k",
        {kk: SummaryStats.from_bernoulli(c, reps) for kk, c in atleast_counts.items()},
        meta=meta)
    return MultiplicityLimitEstimate(p, exact_curve, atleast_curve)


# ---------------------------------------------------------------------------
# hitting-time estimators


def _hit_time_sample(dist: StepDistribution, reps: int, cap: int,
                     seed: SeedSpec | int, workers: int = 1) -> np.ndarray:
    """First return times to the origin; cap + 1 encodes 'no return by cap'."""
    master = seed.master if isinstance(seed, SeedSpec) else seed
    ranges = block_ranges(reps, KERNEL_BLOCK)
    if _use_compiled(dist):
        def one_block(b):
            lo, hi = ranges[b]
            return kernels.hit_origin_times(kernels.seed_word(master), lo, hi - lo, cap, dist.d)
    else:
        def one_block(b):
            lo, hi = ranges[b]
            out = np.empty(hi - lo, dtype=np.int64)
            for row, rep in enumerate(range(lo, hi)):
                pos = _rng_positions(dist, cap, SeedSpec(master, rep).rng())
                out[row] = _first_visit(pos, origin(dist.d), cap + 1)
            return out
    return np.concatenate(map_blocks(one_block, len(ranges), workers))


def estimate_v(dist: StepDistribution, k_grid: list[int], reps: int,
               seed: SeedSpec | int, workers: int = 1) -> CurveEstimate:
    """No-return probability P(origin unvisited through time k) on a grid.

    Nonincreasing in k and decreasing to the escape probability; recurrent
    walks drive it to zero.  For d=2 each point also reports value*log(k)
    for comparison against the known pi/log k decay rate.
    """
    grid = sorted(set(k_grid))
    cap = max(grid)
    times = _hit_time_sample(dist, reps, cap, seed, workers)
    points = {}
    extras = {}
    for k in grid:
        survived = int((times > k).sum())  # no-hit replicates carry cap + 1
        points[k] = SummaryStats.from_bernoulli(survived, reps)
        if dist.d == 2:
            extras[k] = {"value_times_log_k": points[k].mean * math.log(k)}
    meta = {"direction": "nonincreasing in k; each member >= the escape probability",
            "engine": "compiled" if _use_compiled(dist) else "generic"}
    return CurveEstimate("P(no return by k)", "k", points, extras, meta)


#: grid points at or below this get an exact-DP companion value in the output
GAMMA_DP_CHECK_LIMIT = 256


def estimate_gamma(n_grid: list[int], reps: int, seed: SeedSpec | int,
                   workers: int = 1,
                   dp_check_limit: int = GAMMA_DP_CHECK_LIMIT) -> CurveEstimate:
    """One-sided pair-avoidance probability for the planar simple walk:
    P^0(walk misses {0, b} at all times 1..n) for a unit neighbor b, with
    value*log(n) reported against the pi/2 asymptote.

    Grid points small enough for the grid DP also carry the exact value in
    their extras, so every run cross-checks itself where that is affordable.
    """
    from . import dp as _dp

    master = seed.master if isinstance(seed, SeedSpec) else seed
    grid = sorted(set(n_grid))
    cap = max(grid)
    ranges = block_ranges(reps, KERNEL_BLOCK)

    def one_block(b):
        lo, hi = ranges[b]
        times, which = kernels.hit_times_two_d2(kernels.seed_word(master), lo, hi - lo, cap, 0, 0)
        return times, which

    parts = map_blocks(one_block, len(ranges), workers)
    times = np.concatenate([p[0] for p in parts])
    checkable = [n for n in grid if n <= dp_check_limit]
    dp_values = {}
    if checkable:
        series = _dp.avoidance_series((0, 0), max(checkable), exact=False)
        dp_values = {n: series[n] for n in checkable}
    points = {}
    extras = {}
    for n in grid:
        survived = int((times > n).sum())  # no-hit replicates carry cap + 1
        points[n] = SummaryStats.from_bernoulli(survived, reps)
        extras[n] = {"value_times_log_n": points[n].mean * math.log(n)}
        if n in dp_values:
            extras[n]["dp_value"] = float(dp_values[n])
    return CurveEstimate("P(avoid {0,b} through n)", "n", points, extras,
                         {"b": (1, 0), "direction": "nonincreasing in n"})


@dataclass(frozen=True)
class CtildeEstimate:
    """Bracket for P(first passage to 0 precedes first passage to b)."""

    bracket: BracketEstimate
    cap: int
    reps: int
    hit_origin_first: int
    hit_b_first: int
    undecided: int


def estimate_ctilde(cap: int, reps: int, seed: SeedSpec | int,
                    workers: int = 1) -> CtildeEstimate:
    """Monte Carlo bracket: lower member counts walks that reach 0 before b
    within the cap; the upper member concedes every undecided walk."""
    master = seed.master if isinstance(seed, SeedSpec) else seed
    ranges = block_ranges(reps, KERNEL_BLOCK)

    def one_block(b):
        lo, hi = ranges[b]
        _, which = kernels.hit_times_two_d2(kernels.seed_word(master), lo, hi - lo, cap, 0, 0)
        return (int((which == 0).sum()), int((which == 1).sum()),
                int((which == 2).sum()))

    parts = map_blocks(one_block, len(ranges), workers)
    n0 = sum(p[0] for p in parts)
    nb = sum(p[1] for p in parts)
    nu = sum(p[2] for p in parts)
    lower = SummaryStats.from_bernoulli(n0, reps)
    upper = SummaryStats.from_bernoulli(n0 + nu, reps)  # 1 - P(b first, decided)
    bracket = BracketEstimate(
        lower=lower, upper=upper, parameter="M", value=cap,
        note="complementary truncations: undecided walks (neither site hit "
             "by the cap) are excluded below and conceded above")
    return CtildeEstimate(bracket, cap, reps, n0, nb, nu)


# ---------------------------------------------------------------------------
# tail curves


@dataclass(frozen=True)
class RateCurve:
    """Empirical large-deviation rate curve of the boundary count.

    psi_n(x) = -log(tail frequency of {L_n >= n x}) / n, with +infinity
    exactly when the empirical tail count is zero.
    """

    n: int
    xs: tuple[float, ...]
    tail_counts: tuple[int, ...]
    reps: int

    def tail_probs(self) -> list[float]:
        return [c / self.reps for c in self.tail_counts]

    def psi(self) -> list[float]:
        out = []
        for c in self.tail_counts:
            out.append(math.inf if c == 0 else -math.log(c / self.reps) / self.n)
        return out

    def rows(self) -> list[dict]:
        rows = []
        for x, c, s in zip(self.xs, self.tail_counts, self.psi()):
            rows.append({"x": x, "tail_count": c, "tail_prob": c / self.reps,
                         "psi": s})
        return rows


def ld_curve(dist: StepDistribution, n: int, xs: list[float], reps: int,
             seed: SeedSpec | int, workers: int = 1) -> RateCurve:
    """Empirical psi_n on a grid of x values by plain Monte Carlo (tails out
    of reach stay +infinity; nothing is extrapolated)."""
    master = seed.master if isinstance(seed, SeedSpec) else seed
    xs_sorted = tuple(sorted(xs))
    thresholds = np.array([n * x for x in xs_sorted])
    ranges = block_ranges(reps, KERNEL_BLOCK)
    fast = dist.is_simple and dist.d == 2 and n <= 64

    def one_block(b):
        lo, hi = ranges[b]
        if fast:
            ls = kernels.short_walk_boundary_counts(kernels.seed_word(master), lo, hi - lo, n)
        else:
            ls = np.empty(hi - lo, dtype=np.int64)
            for row, rep in enumerate(range(lo, hi)):
                pos = _rng_positions(dist, n, SeedSpec(master, rep).rng())
                ls[row] = path_stats_any_d(pos, p_max=2).l
        return (ls[:, None] >= thresholds[None, :]).sum(axis=0)

    counts = sum(map_blocks(one_block, len(ranges), workers))
    return RateCurve(n, xs_sorted, tuple(int(c) for c in counts), reps)


# ---------------------------------------------------------------------------
# planar scaling curves


@dataclass(frozen=True)
class ScalingRow:
    statistic: str
    p: int | None
    n: int
    raw: SummaryStats      # statistic / n
    scaled: SummaryStats   # statistic * (log n)^2 / n


@dataclass(frozen=True)
class Scaling2DResult:
    rows: list[ScalingRow]
    reps: int
    p_max: int
    references: dict

    def row(self, statistic: str, n: int, p: int | None = None) -> ScalingRow:
        for r in self.rows:
            if r.statistic == statistic and r.n == n and r.p == p:
                return r
        raise KeyError((statistic, n, p))


def scaling_2d(n_grid: list[int], reps: int, seed: SeedSpec | int,
               p_max: int = 4, workers: int = 1,
               ctilde: float | None = None) -> Scaling2DResult:
    """Normalized planar curves E[stat]*(log n)^2/n for L, Q^(p), J^(p), J^p.

    Comparison lines (pi^2/2, pi^2, 2 pi^2, and the first-passage constant
    bands when a c-tilde value is supplied) ride along as references in the
    output; nothing here asserts them.
    """
    dist = StepDistribution.simple(2)
    rows: list[ScalingRow] = []
    for n in sorted(set(n_grid)):
        ratios = simulate_range_ratios(dist, n, reps, seed, p_max=p_max,
                                       workers=workers)
        scale = math.log(n) ** 2
        def put(stat_name, key, p=None):
            raw = ratios[key]
            rows.append(ScalingRow(stat_name, p, n, raw, raw.scaled(scale)))
        put("L", "L_over_n")
        put("R", "R_over_n")
        for p in range(1, p_max + 1):
            put("Q", f"Q{p}_over_n", p)
            put("J_exact", f"Jexact{p}_over_n", p)
            put("J_atleast", f"Jatleast{p}_over_n", p)
    pi2 = math.pi ** 2
    references = {"pi2_over_2": pi2 / 2, "pi2": pi2, "two_pi2": 2 * pi2}
    if ctilde is not None:
        references["ctilde"] = ctilde
        for p in range(1, p_max + 1):
            c = ctilde ** (p - 1)
            references[f"J_exact({p})_band"] = (c * pi2 / 4, c * pi2)
            references[f"J_atleast({p})_band"] = (c * pi2 / 2, 2 * c * pi2)
    return Scaling2DResult(rows, reps, p_max, references)
