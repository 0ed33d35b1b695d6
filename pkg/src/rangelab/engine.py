"""Replicate execution engine and mergeable summary statistics.

Aggregation is a commutative monoid over per-block summaries.  Replicates
are partitioned into fixed-size blocks (a function of the replicate count
only, never of the worker count), each block is reduced independently, and
block results are folded in block order.  That makes every experiment's
output bit-identical across worker counts and schedulings.
"""

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Iterable, Sequence

import numpy as np

from .lattice import SeedSpec

DEFAULT_BLOCK_SIZE = 1024
WORKERS_ENV_VAR = "RANGELAB_WORKERS"


class ReplicateError(RuntimeError):
    """A replicate kernel raised; carries the failing replicate index."""

    def __init__(self, replicate: int, cause: BaseException):
        super().__init__(f"replicate {replicate} failed: {cause!r}")
        self.replicate = replicate


@dataclass(frozen=True)
class SummaryStats:
    """Count / mean / sum-of-squared-deviations triple.

    Merging two summaries equals summarizing the concatenated samples
    (count-weighted moment combination), so partial results from blocks or
    machines can be combined in any grouping.
    """

    count: int
    mean: float
    m2: float

    @classmethod
    def empty(cls) -> "SummaryStats":
        return cls(0, 0.0, 0.0)

    @classmethod
    def from_samples(cls, xs: Iterable[float]) -> "SummaryStats":
        count = 0
        mean = 0.0
        m2 = 0.0
        for x in xs:
            count += 1
            delta = x - mean
            mean += delta / count
            m2 += delta * (x - mean)
        return cls(count, mean, m2)

    @classmethod
    def from_bernoulli(cls, successes: int, trials: int) -> "SummaryStats":
        """Exact moments of an indicator sample: integer inputs keep the
        high-replicate estimators deterministic by construction."""
        if trials == 0:
            return cls.empty()
        p = successes / trials
        return cls(trials, p, p * (1.0 - p) * trials)

    def merge(self, other: "SummaryStats") -> "SummaryStats":
        if self.count == 0:
            return other
        if other.count == 0:
            return self
        n = self.count + other.count
        mean = (self.count * self.mean + other.count * other.mean) / n
        delta = other.mean - self.mean
        m2 = self.m2 + other.m2 + delta * delta * (self.count * other.count / n)
        return SummaryStats(n, mean, m2)

    @property
    def variance(self) -> float:
        """Unbiased sample variance."""
        if self.count < 2:
            return math.nan
        return self.m2 / (self.count - 1)

    @property
    def stderr(self) -> float:
        if self.count < 2:
            return math.nan
        return math.sqrt(self.variance / self.count)

    def ci(self, level: float = 0.99) -> tuple[float, float]:
        """Central-limit confidence interval at the given level."""
        if self.count < 2:
            return (math.nan, math.nan)
        z = NormalDist().inv_cdf(0.5 + level / 2.0)
        half = z * self.stderr
        return (self.mean - half, self.mean + half)

    def scaled(self, c: float) -> "SummaryStats":
        """Summary of the samples multiplied by the constant c."""
        return SummaryStats(self.count, self.mean * c, self.m2 * c * c)


def fold_summaries(parts: Iterable[SummaryStats]) -> SummaryStats:
    acc = SummaryStats.empty()
    for part in parts:
        acc = acc.merge(part)
    return acc


@dataclass(frozen=True)
class BracketEstimate:
    """A pair of truncation estimates that straddle an infinite-horizon
    constant; the width is part of the result, never hidden."""

    lower: SummaryStats
    upper: SummaryStats
    parameter: str
    value: int
    note: str = ""

    @property
    def gap(self) -> float:
        return self.upper.mean - self.lower.mean


def block_ranges(reps: int, block_size: int = DEFAULT_BLOCK_SIZE) -> list[tuple[int, int]]:
    """Fixed partition of [0, reps) into blocks; depends on reps only."""
    if block_size <= 0:
        raise ValueError("block_size must be positive")
    return [(lo, min(lo + block_size, reps)) for lo in range(0, reps, block_size)]


def resolve_workers(requested: int | None) -> int:
    """Worker count: explicit flag wins, else the environment default, else 1."""
    if requested is not None:
        return max(1, requested)
    env = os.environ.get(WORKERS_ENV_VAR)
    if env:
        return max(1, int(env))
    return 1


def map_blocks(fn: Callable[[int], object], n_blocks: int, workers: int = 1) -> list:
    """Apply fn to 0..n_blocks-1, returning results in index order.

    Worker threads only affect scheduling; the returned order (and hence any
    fold over it) is fixed.
    """
    if workers <= 1 or n_blocks <= 1:
        return [fn(i) for i in range(n_blocks)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, range(n_blocks)))


def run_replicates(kernel: Callable[[int, np.random.Generator], float],
                   reps: int, seed: SeedSpec | int, workers: int = 1,
                   block_size: int = DEFAULT_BLOCK_SIZE) -> SummaryStats:
    """Run a pure per-replicate kernel and aggregate its values.

    The kernel receives (replicate index, that replicate's own generator)
    and must depend on nothing else.  Results are deterministic in
    (seed, reps, block_size) and independent of the worker count.
    """
    master = seed.master if isinstance(seed, SeedSpec) else seed
    ranges = block_ranges(reps, block_size)

    def one_block(b: int) -> SummaryStats:
        lo, hi = ranges[b]
        count = 0
        mean = 0.0
        m2 = 0.0
        for i in range(lo, hi):
            try:
                x = kernel(i, SeedSpec(master, i).rng())
            except Exception as exc:
                raise ReplicateError(i, exc) from exc
            count += 1
            delta = x - mean
            mean += delta / count
            m2 += delta * (x - mean)
        return SummaryStats(count, mean, m2)

    return fold_summaries(map_blocks(one_block, len(ranges), workers))


def run_replicates_table(kernel: Callable[[int, np.random.Generator], Sequence[float]],
                         names: Sequence[str], reps: int, seed: SeedSpec | int,
                         workers: int = 1,
                         block_size: int = DEFAULT_BLOCK_SIZE) -> dict[str, SummaryStats]:
    """Vector-valued variant: one SummaryStats per named output column."""
    master = seed.master if isinstance(seed, SeedSpec) else seed
    ranges = block_ranges(reps, block_size)
    ncols = len(names)

    def one_block(b: int) -> list[SummaryStats]:
        lo, hi = ranges[b]
        count = 0
        mean = np.zeros(ncols)
        m2 = np.zeros(ncols)
        for i in range(lo, hi):
            try:
                row = np.asarray(kernel(i, SeedSpec(master, i).rng()), dtype=float)
            except Exception as exc:
                raise ReplicateError(i, exc) from exc
            count += 1
            delta = row - mean
            mean += delta / count
            m2 += delta * (row - mean)
        return [SummaryStats(count, float(mean[j]), float(m2[j])) for j in range(ncols)]

    parts = map_blocks(one_block, len(ranges), workers)
    out = {}
    for j, name in enumerate(names):
        out[name] = fold_summaries(p[j] for p in parts)
    return out
