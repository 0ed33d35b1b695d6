"""Lattice geometry, step distributions, and reproducible walk generation.

Points of Z^d are plain tuples of Python ints.  A walk is defined by a
finite-support step distribution; walks are generated from a counter-based
generator keyed by (master seed, stream index) so that any replicate can be
regenerated independently of all others.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path as FilePath
from typing import Iterable, Iterator

import numpy as np

from .errors import InvalidDistributionError

Point = tuple[int, ...]

#: probability mass drawn per RNG request; fixed so that streaming and
#: materialized consumption of the same walk see identical increments
_CHUNK = 1 << 16

_MASK64 = (1 << 64) - 1

#: substreams per (seed, stream) pair reserved for multi-walk experiments
#: (forward / dual / auxiliary legs of a single replicate)
SUBSTREAMS_PER_REPLICATE = 64


def origin(d: int) -> Point:
    return (0,) * d


def neighbors(a: Point) -> list[Point]:
    """The 2d lattice neighbors of ``a`` at L1-distance 1.

    Order is fixed: coordinate index ascending, minus before plus, so that
    serialized outputs relying on neighbor order are byte-stable.
    """
    out = []
    for i in range(len(a)):
        out.append(a[:i] + (a[i] - 1,) + a[i + 1:])
        out.append(a[:i] + (a[i] + 1,) + a[i + 1:])
    return out


def add(a: Point, b: Point) -> Point:
    return tuple(x + y for x, y in zip(a, b))


def negate(a: Point) -> Point:
    return tuple(-x for x in a)


@dataclass(frozen=True)
class StepDistribution:
    """Finite-support step law on Z^d.

    Probabilities are either all exact ``Fraction`` values (rational mode,
    required by the enumeration oracles) or all floats (Monte Carlo mode).
    """

    atoms: tuple[tuple[Point, Fraction | float], ...]
    d: int

    def __post_init__(self):
        if not self.atoms:
            raise InvalidDistributionError("empty support")
        seen = set()
        for point, prob in self.atoms:
            if len(point) != self.d:
                raise InvalidDistributionError(
                    f"dimension mismatch: atom {point} in d={self.d}")
            if point in seen:
                raise InvalidDistributionError(f"duplicate atom {point}")
            seen.add(point)
            if prob <= 0:
                raise InvalidDistributionError(f"nonpositive probability for {point}")
        total = sum(prob for _, prob in self.atoms)
        if self.is_rational:
            if total != 1:
                raise InvalidDistributionError(f"probabilities sum to {total}, not 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise InvalidDistributionError(f"probabilities sum to {total}, not 1")

    @property
    def is_rational(self) -> bool:
        return all(isinstance(p, Fraction) for _, p in self.atoms)

    @property
    def support(self) -> list[Point]:
        return [point for point, _ in self.atoms]

    @property
    def is_simple(self) -> bool:
        """True for the uniform nearest-neighbor walk (the 2d unit vectors)."""
        return (len(self.atoms) == 2 * self.d
                and set(self.support) == set(neighbors(origin(self.d)))
                and self.is_uniform)

    @property
    def is_uniform(self) -> bool:
        probs = [p for _, p in self.atoms]
        return all(p == probs[0] for p in probs)

    @property
    def is_unit_step(self) -> bool:
        return all(sum(abs(c) for c in point) == 1 for point in self.support)

    def mean(self) -> tuple[Fraction, ...]:
        """Exact mean step, for documenting experiment preconditions."""
        acc = [Fraction(0)] * self.d
        for point, prob in self.atoms:
            q = prob if isinstance(prob, Fraction) else Fraction(prob)
            for i, c in enumerate(point):
                acc[i] += c * q
        return tuple(acc)

    def increments_array(self) -> np.ndarray:
        return np.array(self.support, dtype=np.int64).reshape(len(self.atoms), self.d)

    def cumulative(self) -> np.ndarray:
        c = np.cumsum([float(p) for _, p in self.atoms])
        c[-1] = 1.0  # guard against rounding in the last bucket
        return c

    @classmethod
    def simple(cls, d: int) -> "StepDistribution":
        if d < 1:
            raise InvalidDistributionError(f"dimension must be >= 1, got {d}")
        p = Fraction(1, 2 * d)
        return cls(tuple((nb, p) for nb in neighbors(origin(d))), d)

    @classmethod
    def from_text(cls, text: str) -> "StepDistribution":
        """Parse "dx dy ... prob" lines; prob is "num/den" or a decimal.

        A line "simple d=<k>" selects the built-in nearest-neighbor preset.
        """
        lines = [ln.strip() for ln in text.splitlines()
                 if ln.strip() and not ln.strip().startswith("#")]
        if len(lines) == 1 and lines[0].startswith("simple"):
            return cls.simple(_parse_simple_preset(lines[0]))
        atoms = []
        d = None
        rational = None
        for ln in lines:
            parts = ln.split()
            if len(parts) < 2:
                raise InvalidDistributionError(f"malformed atom line: {ln!r}")
            point = tuple(int(x) for x in parts[:-1])
            if d is None:
                d = len(point)
            elif len(point) != d:
                raise InvalidDistributionError(f"dimension mismatch in line: {ln!r}")
            raw = parts[-1]
            if "/" in raw:
                prob: Fraction | float = Fraction(raw)
                this_rational = True
            else:
                prob = float(raw)
                this_rational = False
            if rational is None:
                rational = this_rational
            elif rational != this_rational:
                raise InvalidDistributionError("mixed rational and decimal probabilities")
            atoms.append((point, prob))
        return cls(tuple(atoms), d)

    @classmethod
    def from_file(cls, path: str | FilePath) -> "StepDistribution":
        return cls.from_text(FilePath(path).read_text())

    def dual(self) -> "StepDistribution":
        """The step law of the dual walk: every increment negated."""
        return StepDistribution(tuple((negate(p), q) for p, q in self.atoms), self.d)


def _parse_simple_preset(spec: str) -> int:
    # accepted forms: "simple d=2", "simple 2"
    token = spec[len("simple"):].strip()
    if token.startswith("d="):
        token = token[2:]
    try:
        return int(token)
    except ValueError:
        raise InvalidDistributionError(f"cannot parse preset {spec!r}") from None


def sublattice_index(vectors: Iterable[Point]) -> int:
    """Index in Z^d of the lattice generated by ``vectors`` over the integers.

    Returns 0 when the vectors do not span rank d.  Computed by exact integer
    row reduction (Euclidean elimination, unimodular row operations only); the
    index is the product of the pivot magnitudes of the row-echelon form.
    """
    rows = [list(v) for v in vectors]
    if not rows:
        return 0
    d = len(rows[0])
    for r in rows:
        if len(r) != d:
            raise InvalidDistributionError("dimension mismatch among vectors")
    mat = [r[:] for r in rows]
    top = 0
    index = 1
    for col in range(d):
        while True:
            nz = [i for i in range(top, len(mat)) if mat[i][col] != 0]
            if not nz:
                return 0  # rank deficient
            if len(nz) == 1:
                break
            i0 = min(nz, key=lambda i: abs(mat[i][col]))
            for i in nz:
                if i != i0:
                    q = mat[i][col] // mat[i0][col]
                    mat[i] = [a - q * b for a, b in zip(mat[i], mat[i0])]
        i0 = nz[0]
        mat[top], mat[i0] = mat[i0], mat[top]
        index *= abs(mat[top][col])
        top += 1
    return index


def validate_support(dist: StepDistribution) -> bool:
    """True iff the support atoms generate all of Z^d over the integers."""
    return sublattice_index(dist.support) == 1


@dataclass(frozen=True)
class SeedSpec:
    """Counter-based randomness coordinates: (master seed, stream index).

    Distinct (master, stream) pairs yield statistically independent Philox
    streams; the same pair always reproduces the same bit stream.  Each
    replicate owns one stream index; experiments that run several walks per
    replicate (forward / dual / auxiliary) multiplex them into the 128-bit
    key through a substream slot, so every leg is independent too.
    """

    master: int
    stream: int = 0

    def __post_init__(self):
        if self.stream < 0:
            raise ValueError("stream index must be nonnegative")

    def streamword(self, substream: int = 0) -> int:
        if not 0 <= substream < SUBSTREAMS_PER_REPLICATE:
            raise ValueError(f"substream must be in [0, {SUBSTREAMS_PER_REPLICATE})")
        return (self.stream * SUBSTREAMS_PER_REPLICATE + substream) & _MASK64

    def rng(self, substream: int = 0) -> np.random.Generator:
        key = (self.master & _MASK64) | (self.streamword(substream) << 64)
        return np.random.Generator(np.random.Philox(key=key))

    def replicate(self, stream: int) -> "SeedSpec":
        return SeedSpec(self.master, stream)


@dataclass(frozen=True)
class WalkPath:
    """A finite walk: a start point plus a sequence of increments."""

    d: int
    start: Point
    steps: tuple[Point, ...]

    @property
    def n(self) -> int:
        return len(self.steps)

    def positions(self) -> list[Point]:
        """All n+1 positions, start included (prefix sums of the increments)."""
        out = [self.start]
        cur = self.start
        for s in self.steps:
            cur = add(cur, s)
            out.append(cur)
        return out

    @property
    def end(self) -> Point:
        cur = self.start
        for s in self.steps:
            cur = add(cur, s)
        return cur

    def to_text(self) -> str:
        lines = [f"{self.d} {self.n}"]
        lines.extend(" ".join(str(c) for c in s) for s in self.steps)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "WalkPath":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        d, n = (int(x) for x in lines[0].split())
        steps = tuple(tuple(int(x) for x in ln.split()) for ln in lines[1:])
        if len(steps) != n or any(len(s) != d for s in steps):
            raise ValueError("path header does not match body")
        return cls(d, origin(d), steps)

    @classmethod
    def from_arrays(cls, increments: np.ndarray, start: Point | None = None) -> "WalkPath":
        d = increments.shape[1]
        return cls(d, start or origin(d),
                   tuple(tuple(int(c) for c in row) for row in increments))


def _draw_atom_indices(dist: StepDistribution, n: int, rng: np.random.Generator) -> Iterator[np.ndarray]:
    """Yield chunks of atom indices; the chunk layout is part of the
    determinism contract (streaming and bulk consumers see one stream)."""
    cum = dist.cumulative()
    produced = 0
    while produced < n:
        m = min(_CHUNK, n - produced)
        u = rng.random(m)
        yield np.searchsorted(cum, u, side="right").astype(np.int64)
        produced += m


def iter_increments(dist: StepDistribution, n: int, seed: SeedSpec,
                    substream: int = 0) -> Iterator[Point]:
    """Stream the n increments of a walk one at a time."""
    support = dist.support
    rng = seed.rng(substream)
    for chunk in _draw_atom_indices(dist, n, rng):
        for idx in chunk:
            yield support[idx]


def walk_increment_indices(dist: StepDistribution, n: int, seed: SeedSpec,
                           substream: int = 0) -> np.ndarray:
    rng = seed.rng(substream)
    if n == 0:
        return np.empty(0, dtype=np.int64)
    return np.concatenate(list(_draw_atom_indices(dist, n, rng)))


def walk_positions(dist: StepDistribution, n: int, seed: SeedSpec,
                   substream: int = 0, negate_steps: bool = False) -> np.ndarray:
    """Positions S_0..S_n from the origin as an (n+1, d) int64 array.

    ``negate_steps`` generates a dual-walk leg (an independent copy with
    every increment negated).
    """
    idx = walk_increment_indices(dist, n, seed, substream)
    inc = dist.increments_array()[idx]
    if negate_steps:
        inc = -inc
    pos = np.zeros((n + 1, dist.d), dtype=np.int64)
    np.cumsum(inc, axis=0, out=pos[1:])
    return pos


def generate_walk(dist: StepDistribution, n: int, seed: SeedSpec) -> WalkPath:
    """Materialize a walk of n steps from the origin.

    Deterministic in (dist, n, seed); equals the stream from
    :func:`iter_increments` consumed to exhaustion.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    idx = walk_increment_indices(dist, n, seed)
    support = dist.support
    return WalkPath(dist.d, origin(dist.d), tuple(support[i] for i in idx))


def binomial_occupation_d1(j: int, u: int) -> Fraction:
    """Exact P(1d simple walk is at u after j steps); closed form used as an
    independent cross-check of the grid dynamic programs."""
    if (j + u) % 2 != 0 or abs(u) > j:
        return Fraction(0)
    return Fraction(math.comb(j, (j + u) // 2), 2 ** j)


def binomial_occupation_d2(j: int, x: Point) -> Fraction:
    """Exact P(2d simple walk at x after j steps) via the diagonal
    decomposition into two independent 1d walks (u, v) = (x1+x2, x1-x2)."""
    u, v = x[0] + x[1], x[0] - x[1]
    return binomial_occupation_d1(j, u) * binomial_occupation_d1(j, v)
