"""Exhaustive small-scale computations: exact laws by path enumeration,
inequality sweeps over exact tails, and exact event probabilities.

Enumeration is a depth-first sweep with reversible tracker updates (undo
log), so memory stays O(n) while every path of every prefix length is
visited exactly once.  All probabilities are exact rationals: weights are
integer path counts over the normalizer (support size)^n.
"""

from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import BudgetExceededError, InvalidDistributionError
from .lattice import Point, StepDistribution, WalkPath, add, negate, neighbors, origin
from .tracker import (PatternSpec, RangeTracker, pattern_count,
                      stats_from_position_list)

DEFAULT_ENUM_BUDGET = 10 ** 8

STATISTICS = ("L", "R", "Q", "J_exact", "J_atleast", "pattern")


def enumeration_cost(support_size: int, n: int) -> int:
    """Nodes visited by the depth-first sweep: sum of S^k for k = 1..n."""
    return sum(support_size ** k for k in range(1, n + 1))


def _require_uniform(dist: StepDistribution) -> None:
    if not dist.is_uniform:
        raise InvalidDistributionError(
            "exact enumeration requires a uniform finite support")


def _require_budget(dist: StepDistribution, n: int, budget: int, what: str) -> None:
    cost = enumeration_cost(len(dist.atoms), n)
    if cost > budget:
        raise BudgetExceededError(what, cost, budget)


@dataclass(frozen=True)
class ExactPMF:
    """Exact law of an integer path statistic at a fixed length.

    ``support`` maps a value to the number of length-n paths attaining it;
    probabilities are weight / normalizer with normalizer = (support size)^n.
    """

    statistic: str
    n: int
    support: dict[int, int] = field(compare=True)
    normalizer: int = 1

    def prob(self, value: int) -> Fraction:
        return Fraction(self.support.get(value, 0), self.normalizer)

    def tail_count(self, y) -> int:
        """Number of paths with statistic >= y (y need not be attained)."""
        return sum(c for v, c in self.support.items() if v >= y)

    def tail_ge(self, y) -> Fraction:
        return Fraction(self.tail_count(y), self.normalizer)

    def mean(self) -> Fraction:
        return Fraction(sum(v * c for v, c in self.support.items()), self.normalizer)

    @property
    def min_value(self) -> int:
        return min(self.support)

    @property
    def max_value(self) -> int:
        return max(self.support)

    def check_normalization(self) -> bool:
        return sum(self.support.values()) == self.normalizer

    def to_rows(self) -> list[tuple[int, int, int, int]]:
        """(value, count, numerator, denominator) rows, values ascending."""
        rows = []
        for v in sorted(self.support):
            pr = self.prob(v)
            rows.append((v, self.support[v], pr.numerator, pr.denominator))
        return rows


def _enumerate_nodes(dist: StepDistribution, n: int, visit) -> None:
    """Call visit(depth, tracker, positions) at every node of the full
    S-ary tree of paths, root (empty path) included."""
    tracker = RangeTracker(dist.d)
    positions = [origin(dist.d)]
    support = dist.support

    def rec(depth: int) -> None:
        visit(depth, tracker, positions)
        if depth == n:
            return
        for step in support:
            tracker.push_step(step)
            positions.append(tracker.position)
            rec(depth + 1)
            positions.pop()
            tracker.undo_step()

    rec(0)


def _leaf_value_fn(statistic: str, p: int | None, pattern: PatternSpec | None,
                   n: int):
    if statistic == "L":
        return lambda tracker, positions: tracker.boundary_count
    if statistic == "R":
        return lambda tracker, positions: tracker.distinct_count
    if statistic in ("Q", "J_exact", "J_atleast"):
        if p is None or p < 1:
            raise ValueError(f"statistic {statistic} needs a multiplicity p >= 1")
        key = {"Q": "q", "J_exact": "j_exact", "J_atleast": "j_atleast"}[statistic]

        def value(tracker, positions, _key=key, _p=p):
            snap = tracker.snapshot(p_max=n + 2)  # no pooling: exact counts
            return getattr(snap, _key).get(_p, 0)

        return value
    if statistic == "pattern":
        if pattern is None:
            raise ValueError("statistic 'pattern' needs a PatternSpec")

        def value(tracker, positions, _spec=pattern):
            d = len(positions[0])
            path = WalkPath(d, positions[0],
                            tuple(tuple(b - a for a, b in zip(x, y))
                                  for x, y in zip(positions, positions[1:])))
            return pattern_count(path, _spec)

        return value
    raise ValueError(f"unknown statistic {statistic!r}; choose from {STATISTICS}")


def exact_distribution(dist: StepDistribution, n: int, statistic: str = "L",
                       p: int | None = None, pattern: PatternSpec | None = None,
                       budget: int = DEFAULT_ENUM_BUDGET) -> ExactPMF:
    """Exact law of a range statistic over all (support size)^n paths."""
    _require_uniform(dist)
    _require_budget(dist, n, budget, f"exact {statistic} law at n={n}")
    value_fn = _leaf_value_fn(statistic, p, pattern, n)
    counts: Counter = Counter()

    def visit(depth, tracker, positions):
        if depth == n:
            counts[value_fn(tracker, positions)] += 1

    _enumerate_nodes(dist, n, visit)
    name = statistic if p is None else f"{statistic}({p})"
    return ExactPMF(name, n, dict(counts), len(dist.atoms) ** n)


def exact_prefix_distributions(dist: StepDistribution, n_max: int,
                               statistic: str = "L",
                               budget: int = DEFAULT_ENUM_BUDGET) -> list[ExactPMF]:
    """Exact laws of L or R at every prefix length 0..n_max in one sweep."""
    if statistic not in ("L", "R"):
        raise ValueError("prefix sweep supports the O(1) statistics L and R")
    _require_uniform(dist)
    _require_budget(dist, n_max, budget, f"prefix laws to n={n_max}")
    tallies: list[Counter] = [Counter() for _ in range(n_max + 1)]

    def visit(depth, tracker, positions):
        value = tracker.boundary_count if statistic == "L" else tracker.distinct_count
        tallies[depth][value] += 1

    _enumerate_nodes(dist, n_max, visit)
    s = len(dist.atoms)
    return [ExactPMF(statistic, k, dict(t), s ** k) for k, t in enumerate(tallies)]


def verify_tracker_by_enumeration(dist: StepDistribution, n: int, p_max: int = 8,
                                  budget: int = DEFAULT_ENUM_BUDGET) -> int:
    """Compare the incremental snapshot against the literal recomputation at
    every node of the enumeration tree; returns the number of nodes checked.
    """
    _require_budget(dist, n, budget, f"tracker verification at n={n}")
    checked = 0

    def visit(depth, tracker, positions):
        nonlocal checked
        expect = stats_from_position_list(positions, p_max=p_max)
        got = tracker.snapshot(p_max=p_max)
        if got != expect:
            raise AssertionError(
                f"tracker snapshot diverges from recomputation at depth {depth}: "
                f"{got} != {expect} (positions {positions})")
        checked += 1

    _enumerate_nodes(dist, n, visit)
    return checked


@dataclass(frozen=True)
class ShiftedTailReport:
    """Result of the shifted-threshold monotonicity sweep.

    ``violations`` must be empty: P(L_{n+v} >= y - 2dv) >= P(L_n >= y) holds
    for every n, v, y.  ``plain_witnesses`` lists any (n, v, y) where the
    unshifted P(L_{n+v} >= y) >= P(L_n >= y) fails; such witnesses may or
    may not exist at enumerable sizes.
    """

    d: int
    n_max: int
    v_max: int
    violations: list
    plain_witnesses: list


def shifted_tail_check(d: int, n_max: int, v_max: int,
                       budget: int = DEFAULT_ENUM_BUDGET) -> ShiftedTailReport:
    """Exhaustively test the shifted tail inequality on exact laws of L."""
    dist = StepDistribution.simple(d)
    pmfs = exact_prefix_distributions(dist, n_max + v_max, "L", budget=budget)
    s = len(dist.atoms)
    violations = []
    plain = []
    for n in range(n_max + 1):
        for v in range(v_max + 1):
            big = pmfs[n + v]
            small = pmfs[n]
            for y in range(0, n_max + v_max + 3):
                rhs = small.tail_count(y)  # / s^n
                lhs = big.tail_count(y - 2 * d * v)  # / s^(n+v)
                if lhs < rhs * s ** v:
                    violations.append((n, v, y, big.tail_ge(y - 2 * d * v),
                                       small.tail_ge(y)))
                if v >= 1 and big.tail_count(y) < rhs * s ** v:
                    plain.append((n, v, y, big.tail_ge(y), small.tail_ge(y)))
    return ShiftedTailReport(d, n_max, v_max, violations, plain)


def _cover_profiles(dist: StepDistribution, k: int, dual: bool) -> Counter:
    """Tally (covered-neighbor bitmask, returned flag) over all S^k
    increment sequences of one leg; the dual leg walks negated increments."""
    zero = origin(dist.d)
    bit_of = {nb: 1 << i for i, nb in enumerate(neighbors(zero))}
    support = [negate(s) for s in dist.support] if dual else dist.support
    counts: Counter = Counter()

    def rec(depth: int, pos: Point, mask: int, returned: bool) -> None:
        if depth == k:
            counts[(mask, returned)] += 1
            return
        for step in support:
            nxt = add(pos, step)
            rec(depth + 1, nxt, mask | bit_of.get(nxt, 0), returned or nxt == zero)

    rec(0, zero, 0, False)
    return counts


def exact_event_probability(dist: StepDistribution, k: int, event: str = "A",
                            budget: int = DEFAULT_ENUM_BUDGET) -> Fraction:
    """Exact probability of the horizon-k coverage event A_k: the forward
    and dual k-prefixes together miss some neighbor of the origin, and the
    forward walk does not return to the origin by time k.

    Only the "A" family is defined here; the two legs are enumerated
    separately and combined through their coverage-mask profiles.
    """
    if event != "A":
        raise ValueError(f"unknown event selector {event!r}")
    _require_uniform(dist)
    cost = 2 * enumeration_cost(len(dist.atoms), k)
    if cost > budget:
        raise BudgetExceededError(f"event enumeration at k={k}", cost, budget)
    full = (1 << (2 * dist.d)) - 1
    fwd = _cover_profiles(dist, k, dual=False)
    dua = _cover_profiles(dist, k, dual=True)
    hits = 0
    for (mf, returned), cf in fwd.items():
        if returned:
            continue
        for (md, _), cd in dua.items():
            if (mf | md) != full:
                hits += cf * cd
    s = len(dist.atoms)
    return Fraction(hits, s ** (2 * k))
