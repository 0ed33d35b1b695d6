"""Streaming range statistics for a single walk.

The tracker maintains, one step at a time, the set of visited points, the
inner boundary (visited points with at least one unvisited neighbor), and
per-point visit counts, where visits are counted over the time indices
0..n so the starting point counts as one visit.  Updates are reversible,
which is what makes exhaustive depth-first path enumeration affordable.

Performance note: the visited-set probe dominates runtime, so points are
packed into single machine integers whenever the coordinates provably fit
(d <= 3); generic tuple keys are the fallback.
"""

import warnings
from collections import Counter
from dataclasses import dataclass

from .lattice import Point, WalkPath, add, neighbors, origin

# Field widths for packed point keys.  d<=2 walks get 31-bit coordinate
# fields (effectively unbounded for desk-scale runs); d=3 gets 21-bit
# fields, enough for any unit-step walk of < 2^20 - 2 steps.
_WIDE_SHIFT = 31
_WIDE_CAP = (1 << 30) - 2
_NARROW_SHIFT = 21
_NARROW_CAP = (1 << 20) - 2


def _packing_for(d: int, start: Point) -> tuple[int, int] | None:
    """Return (shift, safe_steps) for packed keys, or None for tuple keys."""
    start_norm = max((abs(c) for c in start), default=0)
    if d <= 2:
        return _WIDE_SHIFT, _WIDE_CAP - start_norm
    if d == 3:
        return _NARROW_SHIFT, _NARROW_CAP - start_norm
    return None


@dataclass(frozen=True)
class RangeStats:
    """Snapshot of the range statistics of one walk prefix.

    ``q`` maps multiplicity p to the number of strictly p-multiple visited
    points; ``j_exact`` and ``j_atleast`` are the same counts restricted to
    inner-boundary points, exact and at-least versions.  Multiplicities
    >= p_max are pooled into the p_max bucket; ``overflow_visits`` records
    the total number of time indices spent at pooled points so that the
    visit-count identity stays checkable under pooling.
    """

    n: int
    r: int
    l: int
    p_max: int
    q: dict[int, int]
    j_exact: dict[int, int]
    j_atleast: dict[int, int]
    overflow_visits: int = 0

    def visit_total(self) -> int:
        """Sum of p * Q(p) with the overflow bucket expanded; equals n+1."""
        partial = sum(p * c for p, c in self.q.items() if p < self.p_max)
        return partial + self.overflow_visits

    def check_invariants(self) -> None:
        assert 1 <= self.l <= self.r <= self.n + 1
        assert self.l == self.j_atleast.get(1, 0)
        assert sum(self.q.values()) == self.r
        assert self.visit_total() == self.n + 1
        for p in range(1, self.p_max + 1):
            assert self.j_exact.get(p, 0) <= self.q.get(p, 0)
            tail = sum(self.j_exact.get(m, 0) for m in range(p, self.p_max + 1))
            assert self.j_atleast.get(p, 0) == tail
            if p > 1:
                assert self.j_atleast.get(p, 0) <= self.j_atleast.get(p - 1, 0)


class RangeTracker:
    """Incrementally maintained range state of one walk.

    Single-owner and mutable; move whole instances between workers, never
    share one.  ``push_step`` advances the walk by one increment and
    ``undo_step`` reverses the most recent push exactly.
    """

    def __init__(self, d: int, start: Point | None = None,
                 packed: bool | None = None, undo: bool = True):
        self.d = d
        start = start if start is not None else origin(d)
        packing = _packing_for(d, start) if packed is not False else None
        if packed is True and packing is None:
            raise ValueError(f"packed keys unsupported for d={d}")
        self._packed = packing is not None
        if packing is not None:
            shift, safe = packing
            self._shift = shift
            self._safe_steps = safe
            self._strides = [1 << (shift * i) for i in range(d)]
            self._bias = 1 << (shift - 1)
            self._offsets = []
            for i in range(d):
                self._offsets.extend((-self._strides[i], self._strides[i]))
        else:
            self._safe_steps = 1 << 62  # never hit; tuple keys cannot overflow
            self._offsets = None  # neighbor offsets computed per point
        self._delta_cache: dict = {}
        self._key = self._encode(start)
        self._n = 0
        self._mult: dict = {self._key: 1}
        self._boundary: set = {self._key}
        self._undo: list | None = [] if undo else None

    # -- key packing -------------------------------------------------------

    def _encode(self, p: Point):
        if not self._packed:
            return p
        key = 0
        for i, c in enumerate(p):
            key += (c + self._bias) * self._strides[i]
        return key

    def _decode(self, key) -> Point:
        if not self._packed:
            return key
        coords = []
        for i in range(self.d):
            c = (key >> (self._shift * i)) & ((1 << self._shift) - 1)
            coords.append(c - self._bias)
        return tuple(coords)

    def _delta(self, increment: Point):
        if not self._packed:
            return increment
        return sum(c * s for c, s in zip(increment, self._strides))

    # -- public state ------------------------------------------------------

    @property
    def n(self) -> int:
        return self._n

    @property
    def distinct_count(self) -> int:
        return len(self._mult)

    @property
    def boundary_count(self) -> int:
        return len(self._boundary)

    @property
    def position(self) -> Point:
        return self._decode(self._key)

    def visited_points(self) -> list[Point]:
        return [self._decode(k) for k in self._mult]

    def boundary_points(self) -> list[Point]:
        return [self._decode(k) for k in self._boundary]

    def multiplicity_of(self, p: Point) -> int:
        return self._mult.get(self._encode(p), 0)

    # -- updates -----------------------------------------------------------

    def push_step(self, increment: Point) -> None:
        """Advance by one increment, updating visited/boundary incrementally.

        The new point enters the boundary iff some neighbor is unvisited;
        each previously visited neighbor is re-tested and leaves the
        boundary once all of its neighbors are covered.
        """
        n = self._n
        if n >= self._safe_steps:
            raise OverflowError(
                "walk exceeds the packed-coordinate range; "
                "construct the tracker with packed=False")
        self._n = n + 1
        mult = self._mult
        prev_key = self._key
        if self._packed:
            delta = self._delta_cache.get(increment)
            if delta is None:
                delta = self._delta(increment)
                self._delta_cache[increment] = delta
            key = prev_key + delta
        else:
            key = add(prev_key, increment)
        self._key = key
        undo = self._undo
        count = mult.get(key)
        if count is not None:
            mult[key] = count + 1
            if undo is not None:
                undo.append((prev_key, False, False, None))
            return
        mult[key] = 1
        boundary = self._boundary
        removed = None
        has_unvisited = False
        offsets = self._offsets
        if offsets is not None:
            for off in offsets:
                nb = key + off
                if nb in mult:
                    if nb in boundary:
                        # the new point may be nb's last missing neighbor
                        full = True
                        for off2 in offsets:
                            if nb + off2 not in mult:
                                full = False
                                break
                        if full:
                            boundary.discard(nb)
                            if removed is None:
                                removed = [nb]
                            else:
                                removed.append(nb)
                else:
                    has_unvisited = True
        else:
            for nb in neighbors(key):
                if nb in mult:
                    if nb in boundary:
                        if all(nb2 in mult for nb2 in neighbors(nb)):
                            boundary.discard(nb)
                            if removed is None:
                                removed = [nb]
                            else:
                                removed.append(nb)
                else:
                    has_unvisited = True
        if has_unvisited:
            boundary.add(key)
        if undo is not None:
            undo.append((prev_key, True, has_unvisited, removed))

    def undo_step(self) -> None:
        """Reverse the most recent push exactly (coverage is insertion-only,
        so the undo log carries every boundary change to replay backwards)."""
        if self._undo is None:
            raise RuntimeError("tracker constructed with undo=False")
        prev_key, was_new, added, removed = self._undo.pop()
        key = self._key
        if was_new:
            del self._mult[key]
            if added:
                self._boundary.discard(key)
            if removed:
                self._boundary.update(removed)
        else:
            self._mult[key] -= 1
        self._key = prev_key
        self._n -= 1

    def push_path(self, path: WalkPath) -> None:
        for s in path.steps:
            self.push_step(s)

    # -- snapshots ----------------------------------------------------------

    def snapshot(self, p_max: int = 8) -> RangeStats:
        """All statistics of the current prefix, pooled at p_max."""
        q: dict[int, int] = {}
        overflow = 0
        for count in self._mult.values():
            if count >= p_max:
                q[p_max] = q.get(p_max, 0) + 1
                overflow += count
            else:
                q[count] = q.get(count, 0) + 1
        j_exact: dict[int, int] = {}
        for bkey in self._boundary:
            p = min(self._mult[bkey], p_max)
            j_exact[p] = j_exact.get(p, 0) + 1
        j_atleast: dict[int, int] = {}
        tail = 0
        for p in range(p_max, 0, -1):
            tail += j_exact.get(p, 0)
            j_atleast[p] = tail
        return RangeStats(
            n=self._n, r=len(self._mult), l=len(self._boundary), p_max=p_max,
            q=q, j_exact=j_exact, j_atleast={p: c for p, c in j_atleast.items() if c},
            overflow_visits=overflow)


def recompute_from_scratch(path: WalkPath, p_max: int = 8) -> RangeStats:
    """Evaluate the range statistics literally from the definitions.

    Builds the visited multiset, then tests every visited point's full
    neighborhood.  Deliberately independent of the tracker's incremental
    bookkeeping (tuples and plain sets, no key packing): this is the in-repo
    oracle for ``push_step``/``snapshot``.
    """
    return stats_from_position_list(path.positions(), p_max)


def stats_from_position_list(positions: list[Point], p_max: int = 8) -> RangeStats:
    """recompute_from_scratch on an explicit position sequence (time indices
    0..n), for callers that already hold the positions."""
    mult = Counter(positions)
    visited = set(mult)
    boundary = {x for x in visited
                if any(nb not in visited for nb in neighbors(x))}
    q: dict[int, int] = {}
    overflow = 0
    for count in mult.values():
        if count >= p_max:
            q[p_max] = q.get(p_max, 0) + 1
            overflow += count
        else:
            q[count] = q.get(count, 0) + 1
    j_exact: dict[int, int] = {}
    for x in boundary:
        p = min(mult[x], p_max)
        j_exact[p] = j_exact.get(p, 0) + 1
    j_atleast: dict[int, int] = {}
    tail = 0
    for p in range(p_max, 0, -1):
        tail += j_exact.get(p, 0)
        if tail:
            j_atleast[p] = tail
    return RangeStats(
        n=len(positions) - 1, r=len(visited), l=len(boundary), p_max=p_max,
        q=q, j_exact=j_exact, j_atleast=j_atleast,
        overflow_visits=overflow)


@dataclass(frozen=True)
class PatternSpec:
    """A window of offsets H plus the window contents to count.

    A visited point S_i matches when the range, intersected with the window
    translated to S_i, equals S_i + pattern for one of the patterns.  Since
    the anchor S_i itself is visited, a pattern that omits the zero offset
    (while 0 is in H) can never match; the constructor warns about such
    always-false patterns instead of silently counting nothing.
    """

    offsets: frozenset[Point]
    patterns: tuple[frozenset[Point], ...]

    def __post_init__(self):
        for pat in self.patterns:
            if not pat <= self.offsets:
                raise ValueError(f"pattern {set(pat)} is not a subset of the window")
        zero = origin(len(next(iter(self.offsets))))
        if zero in self.offsets and any(zero not in pat for pat in self.patterns):
            warnings.warn("pattern without the zero offset can never match "
                          "at a visited anchor", stacklevel=2)


def pattern_count(path: WalkPath, spec: PatternSpec) -> int:
    """Number of distinct visited points whose window contents match one of
    the spec's patterns (each qualifying point counted once)."""
    visited = set(path.positions())
    wanted = set(spec.patterns)
    count = 0
    for s in visited:
        window = frozenset(h for h in spec.offsets if add(s, h) in visited)
        if window in wanted:
            count += 1
    return count


def boundary_pattern_spec(d: int) -> PatternSpec:
    """The pattern family whose count equals the inner boundary size: all
    windows on {0} + N(0) that contain the anchor but miss some neighbor."""
    zero = origin(d)
    nbrs = neighbors(zero)
    full = frozenset([zero, *nbrs])
    pats = []
    for mask in range(1 << len(nbrs)):
        present = frozenset(nb for i, nb in enumerate(nbrs) if mask >> i & 1)
        if len(present) < len(nbrs):
            pats.append(present | {zero})
    return PatternSpec(full, tuple(pats))


def interior_pattern_spec(d: int) -> PatternSpec:
    """Complement family: anchor plus all its neighbors visited (count R - L)."""
    zero = origin(d)
    full = frozenset([zero, *neighbors(zero)])
    return PatternSpec(full, (full,))
