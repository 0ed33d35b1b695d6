"""Compiled hot loops for the throughput-bound estimators.

Randomness here is a splittable counter-style generator: each (master seed,
streamword) pair derives an independent splitmix-type stream with its own
odd gamma, so replicate r's walk is reproducible from (master, r) alone and
blocks of replicates can run on any worker without coordination.  The
streamword layout matches :class:`rangelab.lattice.SeedSpec`: replicate r,
leg l -> r * SUBSTREAMS_PER_REPLICATE + l.

All kernels are nogil so thread pools can overlap them.
"""

import numpy as np
from numba import njit, uint64, int64

from .lattice import SUBSTREAMS_PER_REPLICATE

_MASK64 = (1 << 64) - 1

# splitmix64 constants
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_GAMMA_SALT = 0x5851F42D4C957F2D


def seed_word(master: int) -> np.uint64:
    """Clamp a Python int master seed into the kernels' uint64 domain."""
    return np.uint64(master & _MASK64)


def mix64_py(z: int) -> int:
    """Reference implementation of the 64-bit finalizer (test oracle for the
    compiled version)."""
    z = (z + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


def popcount_py(x: int) -> int:
    return bin(x & _MASK64).count("1")


def stream_init_py(master: int, streamword: int) -> tuple[int, int]:
    """Derive (state, gamma) for one stream; gamma is forced odd and mixed
    enough (the usual weak-gamma fixup) so distinct streams never share a
    sequence."""
    base = mix64_py((mix64_py(master) + streamword) & _MASK64)
    state = mix64_py(base ^ _GAMMA_SALT)
    gamma = (mix64_py((base + _GOLDEN) & _MASK64) | 1) & _MASK64
    if popcount_py(gamma ^ (gamma >> 1)) < 24:
        gamma ^= 0xAAAAAAAAAAAAAAAA
    return state, gamma


@njit(uint64(uint64), cache=True, inline="always")
def _mix64(z):
    z = z + uint64(_GOLDEN)
    z = (z ^ (z >> uint64(30))) * uint64(_MIX1)
    z = (z ^ (z >> uint64(27))) * uint64(_MIX2)
    return z ^ (z >> uint64(31))


@njit(uint64(uint64), cache=True, inline="always")
def _popcount(x):
    x = x - ((x >> uint64(1)) & uint64(0x5555555555555555))
    x = (x & uint64(0x3333333333333333)) + ((x >> uint64(2)) & uint64(0x3333333333333333))
    x = (x + (x >> uint64(4))) & uint64(0x0F0F0F0F0F0F0F0F)
    return (x * uint64(0x0101010101010101)) >> uint64(56)


@njit(cache=True, inline="always")
def _stream_init(master, streamword):
    base = _mix64(_mix64(master) + streamword)
    state = _mix64(base ^ uint64(_GAMMA_SALT))
    gamma = _mix64(base + uint64(_GOLDEN)) | uint64(1)
    if _popcount(gamma ^ (gamma >> uint64(1))) < uint64(24):
        gamma = gamma ^ uint64(0xAAAAAAAAAAAAAAAA)
    return state, gamma


@njit(cache=True, nogil=True)
def stream_words(master, streamword, count):
    """First `count` outputs of one stream (exposed for stream tests)."""
    out = np.empty(count, dtype=np.uint64)
    state, gamma = _stream_init(uint64(master), uint64(streamword))
    for i in range(count):
        state = state + gamma
        out[i] = _mix64(state)
    return out


_LEGS = SUBSTREAMS_PER_REPLICATE


@njit(cache=True, nogil=True)
def hit_times_two_d2(master, rep_lo, count, cap, start_x, start_y):
    """First passage (times >= 1) of the planar simple walk into {0, (1,0)}.

    Returns (t, which): on a hit by time `cap`, t is the hit time and which
    is 0 for the origin, 1 for (1,0); otherwise t = cap + 1 and which = 2.
    Other unit neighbors b reduce to (1,0) by lattice symmetry.
    """
    times = np.empty(count, dtype=np.int64)
    which = np.empty(count, dtype=np.int8)
    for r in range(count):
        word = uint64(rep_lo + r) * uint64(_LEGS)
        state, gamma = _stream_init(uint64(master), word)
        x = int64(start_x)
        y = int64(start_y)
        t = int64(0)
        hit_t = int64(cap + 1)
        w = np.int8(2)
        while t < cap:
            state = state + gamma
            rr = _mix64(state)
            d2 = rr >> uint64(62)
            x += int64(d2 == uint64(0)) - int64(d2 == uint64(1))
            y += int64(d2 == uint64(2)) - int64(d2 == uint64(3))
            t += 1
            if ((x >> 1) | y) == 0:  # x in {0,1} and y == 0
                hit_t = t
                w = np.int8(x)
                break
        times[r] = hit_t
        which[r] = w
    return times, which


@njit(cache=True, nogil=True)
def hit_origin_times(master, rep_lo, count, cap, d):
    """First return time to the origin for the simple walk in dimension
    d <= 3; cap + 1 means no return by the cap."""
    times = np.empty(count, dtype=np.int64)
    ndir = uint64(2 * d)
    for r in range(count):
        word = uint64(rep_lo + r) * uint64(_LEGS)
        state, gamma = _stream_init(uint64(master), word)
        x = int64(0)
        y = int64(0)
        z = int64(0)
        t = int64(0)
        hit_t = int64(cap + 1)
        while t < cap:
            state = state + gamma
            rr = _mix64(state)
            dir_ = int64((rr >> uint64(32)) * ndir >> uint64(32))
            axis = dir_ >> 1
            sgn = int64(2) * (dir_ & 1) - int64(1)
            if axis == 0:
                x += sgn
            elif axis == 1:
                y += sgn
            else:
                z += sgn
            t += 1
            if (x | y | z) == 0:
                hit_t = t
                break
        times[r] = hit_t
    return times


@njit(cache=True, nogil=True)
def coverage_features(master, rep_lo, count, kmax, d, p):
    """Per-replicate failure-time features for the neighborhood-coverage
    events behind the boundary-density constants.

    Legs per replicate: forward (substream 0), dual (1, increments negated),
    and p-1 auxiliary walks (2+i) each run to its first return to the origin
    or the kmax cap.  Columns of the output (sentinel kmax+1 = "never"):

      0  forward first-return time
      1  dual first-return time
      2  latest auxiliary return time (kmax+1 if any was capped)
      3  bitmask of origin-neighbors covered by the auxiliary walks
      4..4+2d-1    first time the forward leg covers neighbor j
      4+2d..4+4d-1 same for the dual leg

    Any truncated event indicator at horizon k <= kmax is a pure function
    of these columns, so one sample serves a whole k-grid with common
    random numbers.
    """
    ncols = 4 + 4 * d
    sentinel = int64(kmax + 1)
    out = np.empty((count, ncols), dtype=np.int64)
    ndir = uint64(2 * d)
    pos = np.empty(3, dtype=np.int64)
    for r in range(count):
        base_word = uint64(rep_lo + r) * uint64(_LEGS)
        for c in range(ncols):
            out[r, c] = sentinel
        out[r, 2] = 0  # no auxiliary walks -> constraint vacuous
        out[r, 3] = 0
        # forward (leg 0, sgn +1) and dual (leg 1, sgn -1) legs
        for leg in range(2):
            state, gamma = _stream_init(uint64(master), base_word + uint64(leg))
            pos[0] = 0
            pos[1] = 0
            pos[2] = 0
            covered = 0
            flip = int64(1 - 2 * leg)
            for t in range(1, kmax + 1):
                state = state + gamma
                rr = _mix64(state)
                dir_ = int64((rr >> uint64(32)) * ndir >> uint64(32))
                axis = dir_ >> 1
                pos[axis] += (int64(2) * (dir_ & 1) - int64(1)) * flip
                norm = 0
                for a in range(d):
                    norm += pos[a] if pos[a] >= 0 else -pos[a]
                if norm == 0:
                    if out[r, leg] == sentinel:
                        out[r, leg] = t
                        if covered == (1 << (2 * d)) - 1:
                            break
                elif norm == 1:
                    nb = 0
                    for a in range(d):
                        if pos[a] != 0:
                            nb = 2 * a + (1 if pos[a] > 0 else 0)
                            break
                    col = 4 + 2 * d * leg + nb
                    if out[r, col] == sentinel:
                        out[r, col] = t
                        covered |= 1 << nb
                        if covered == (1 << (2 * d)) - 1 and out[r, leg] != sentinel:
                            break
        # auxiliary walks: run to first origin return or the cap
        for i in range(p - 1):
            state, gamma = _stream_init(uint64(master), base_word + uint64(2 + i))
            pos[0] = 0
            pos[1] = 0
            pos[2] = 0
            t_ret = sentinel
            for t in range(1, kmax + 1):
                state = state + gamma
                rr = _mix64(state)
                dir_ = int64((rr >> uint64(32)) * ndir >> uint64(32))
                axis = dir_ >> 1
                pos[axis] += int64(2) * (dir_ & 1) - int64(1)
                norm = 0
                for a in range(d):
                    norm += pos[a] if pos[a] >= 0 else -pos[a]
                if norm == 0:
                    t_ret = int64(t)
                    break
                if norm == 1:
                    for a in range(d):
                        if pos[a] != 0:
                            out[r, 3] |= 1 << (2 * a + (1 if pos[a] > 0 else 0))
                            break
            if t_ret > out[r, 2]:
                out[r, 2] = t_ret
    return out


@njit(cache=True, nogil=True)
def short_walk_boundary_counts(master, rep_lo, count, n):
    """Inner-boundary size of planar simple walks of length n <= 64,
    one replicate per stream (fast path for tail curves at small n)."""
    ls = np.empty(count, dtype=np.int64)
    xs = np.empty(n + 1, dtype=np.int64)
    ys = np.empty(n + 1, dtype=np.int64)
    for r in range(count):
        word = uint64(rep_lo + r) * uint64(_LEGS)
        state, gamma = _stream_init(uint64(master), word)
        xs[0] = 0
        ys[0] = 0
        for t in range(1, n + 1):
            state = state + gamma
            rr = _mix64(state)
            d2 = rr >> uint64(62)
            xs[t] = xs[t - 1] + (int64(d2 == uint64(0)) - int64(d2 == uint64(1)))
            ys[t] = ys[t - 1] + (int64(d2 == uint64(2)) - int64(d2 == uint64(3)))
        l = int64(0)
        for i in range(n + 1):
            first = True
            for j in range(i):
                if xs[j] == xs[i] and ys[j] == ys[i]:
                    first = False
                    break
            if not first:
                continue
            missing = False
            for nb in range(4):
                nx = xs[i] + (int64(nb == 0) - int64(nb == 1))
                ny = ys[i] + (int64(nb == 2) - int64(nb == 3))
                present = False
                for j in range(n + 1):
                    if xs[j] == nx and ys[j] == ny:
                        present = True
                        break
                if not present:
                    missing = True
                    break
            if missing:
                l += 1
        ls[r] = l
    return ls


def warm_up():
    """Trigger compilation of every kernel on tiny inputs."""
    stream_words(1, 0, 1)
    hit_times_two_d2(1, 0, 1, 4, 0, 0)
    hit_origin_times(1, 0, 1, 4, 2)
    coverage_features(1, 0, 1, 4, 2, 2)
    short_walk_boundary_counts(1, 0, 1, 4)
