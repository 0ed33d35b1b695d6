"""Exact lattice dynamic programs for the planar simple walk.

Two backends share one recursion (mass splits equally over the four
neighbors, absorbed on the forbidden set):

* exact: dict-of-integer path counts with denominator 4^steps, bit-exact;
* float: dense arrays on the 45-degree rotated grid, where the reachable
  diamond becomes a square and parity pruning is a lossless change of
  coordinates.

Budgets are hard refusals, never silent truncation.
"""

from fractions import Fraction

import numpy as np

from .errors import BudgetExceededError
from .lattice import Point

DEFAULT_DP_BUDGET = 2000

ORIGIN2: Point = (0, 0)

_KEY_STRIDE = 1 << 32  # packs (x, y) as x * stride + y; unique for |x|,|y| < 2^31


def _check_budget(n: int, budget: int, what: str) -> None:
    if n > budget:
        raise BudgetExceededError(f"{what} of {n} steps", n, budget)


def _pack(p: Point) -> int:
    return p[0] * _KEY_STRIDE + p[1]


# ---------------------------------------------------------------------------
# exact backend: integer path counts keyed by packed points


def _exact_sweep(start: Point, n: int, forbidden: tuple[Point, ...] = (),
                 targets: tuple[Point, ...] = ()) -> tuple[list[int], dict[Point, list[int]]]:
    """Step the counting measure n times.

    Returns (survival, occupation): survival[m] is the number of m-step
    paths from start avoiding `forbidden` at times 1..m, and
    occupation[t][m] the number of m-step paths ending at t (counted after
    absorption, so with an empty forbidden set it is the plain law).
    Denominator at step m is 4^m.
    """
    cells: dict[int, int] = {_pack(start): 1}
    forb = [_pack(f) for f in forbidden]
    targ = {t: _pack(t) for t in targets}
    survival = [1]
    occupation: dict[Point, list[int]] = {
        t: [1 if t == start else 0] for t in targets}
    for _ in range(n):
        new: dict[int, int] = {}
        get = new.get
        for key, c in cells.items():
            for nb in (key + 1, key - 1, key + _KEY_STRIDE, key - _KEY_STRIDE):
                prev = get(nb)
                new[nb] = c if prev is None else prev + c
        for fkey in forb:
            new.pop(fkey, None)
        cells = new
        survival.append(sum(cells.values()))
        for t, tkey in targ.items():
            occupation[t].append(cells.get(tkey, 0))
    return survival, occupation


# ---------------------------------------------------------------------------
# float backend: rotated compact grid
#
# Coordinates (u, v) = (x + y, x - y).  After m steps from (x0, y0) the
# support is { u0 - m <= u <= u0 + m, u = u0 + m (mod 2) } (same for v), so
# the in-parity cells index as iu = (u - u0 + m) / 2 in [0, m].  One step is
# the 2x2 box filter: every cell feeds its four diagonal successors.


def _float_sweep(start: Point, n: int, forbidden: tuple[Point, ...] = (),
                 targets: tuple[Point, ...] = ()) -> tuple[np.ndarray, dict[Point, np.ndarray]]:
    u0 = start[0] + start[1]
    v0 = start[0] - start[1]
    rot_forb = [(f[0] + f[1], f[0] - f[1]) for f in forbidden]
    rot_targ = {t: (t[0] + t[1], t[0] - t[1]) for t in targets}
    grid = np.ones((1, 1))
    survival = np.empty(n + 1)
    survival[0] = 1.0
    occupation = {t: np.zeros(n + 1) for t in targets}
    for t, (u, v) in rot_targ.items():
        if (u, v) == (u0, v0):
            occupation[t][0] = 1.0
    for m in range(1, n + 1):
        nxt = np.zeros((m + 1, m + 1))
        nxt[:m, :m] += grid
        nxt[1:, :m] += grid
        nxt[:m, 1:] += grid
        nxt[1:, 1:] += grid
        nxt *= 0.25
        for u, v in rot_forb:
            iu, ok_u = _rot_index(u, u0, m)
            iv, ok_v = _rot_index(v, v0, m)
            if ok_u and ok_v:
                nxt[iu, iv] = 0.0
        grid = nxt
        survival[m] = grid.sum()
        for t, (u, v) in rot_targ.items():
            iu, ok_u = _rot_index(u, u0, m)
            iv, ok_v = _rot_index(v, v0, m)
            if ok_u and ok_v:
                occupation[t][m] = grid[iu, iv]
    return survival, occupation


def _rot_index(u: int, u0: int, m: int) -> tuple[int, bool]:
    s = u - u0 + m
    if s % 2 != 0:
        return 0, False
    iu = s // 2
    return iu, 0 <= iu <= m


# ---------------------------------------------------------------------------
# public operations (planar simple walk)


def occupation_series(x: Point, n_max: int, exact: bool = False,
                      budget: int = DEFAULT_DP_BUDGET) -> list:
    """P(S_j = x) for j = 0..n_max, walk from the origin."""
    _check_budget(n_max, budget, "occupation DP")
    if exact:
        _, occ = _exact_sweep(ORIGIN2, n_max, targets=(x,))
        return [Fraction(c, 4 ** m) for m, c in enumerate(occ[x])]
    _, occ = _float_sweep(ORIGIN2, n_max, targets=(x,))
    return list(occ[x])


def occupation_probability(j: int, x: Point, exact: bool = False,
                           budget: int = DEFAULT_DP_BUDGET):
    """Exact P(S_j = x) by convolution DP (rational or float)."""
    return occupation_series(x, j, exact=exact, budget=budget)[j]


def avoidance_series(start: Point, n_max: int, b: Point = (1, 0),
                     exact: bool = False, budget: int = DEFAULT_DP_BUDGET) -> list:
    """P^start(walk misses {0, b} at every time 1..m) for m = 0..n_max,
    computed with the two sites absorbing."""
    _check_budget(n_max, budget, "avoidance DP")
    if exact:
        surv, _ = _exact_sweep(start, n_max, forbidden=(ORIGIN2, b))
        return [Fraction(c, 4 ** m) for m, c in enumerate(surv)]
    surv, _ = _float_sweep(start, n_max, forbidden=(ORIGIN2, b))
    return list(surv)


def avoidance_probability(start: Point, n: int, b: Point = (1, 0),
                          exact: bool = False, budget: int = DEFAULT_DP_BUDGET):
    return avoidance_series(start, n, b=b, exact=exact, budget=budget)[n]


def last_exit_identity_residual(n: int, b: Point = (1, 0), exact: bool = True,
                                budget: int = DEFAULT_DP_BUDGET):
    """Residual of the last-exit decomposition over the pair {0, b}.

    Partitioning 2n-step walks from the origin by their last visit to
    {0, b} (even times can only sit at 0, odd times only at b) gives

        1 = sum_{k=0..n}   P(S_2k = 0)   * P^0(avoid {0,b} for 2n-2k)
          + sum_{k=0..n-1} P(S_2k+1 = b) * P^b(avoid {0,b} for 2n-2k-1).

    Returns 1 minus the right-hand side; exactly zero in rational mode.
    """
    _check_budget(2 * n, budget, "last-exit DP")
    if exact:
        _, occ = _exact_sweep(ORIGIN2, 2 * n, targets=(ORIGIN2, b))
        surv0, _ = _exact_sweep(ORIGIN2, 2 * n, forbidden=(ORIGIN2, b))
        survb, _ = _exact_sweep(b, max(2 * n - 1, 0), forbidden=(ORIGIN2, b))
        # common denominator 4^(2n): occupation count at step j carries
        # 4^j, the matching survival factor carries 4^(2n-j)
        total = 0
        for k in range(n + 1):
            total += occ[ORIGIN2][2 * k] * surv0[2 * n - 2 * k]
        for k in range(n):
            total += occ[b][2 * k + 1] * survb[2 * n - 2 * k - 1]
        return Fraction(4 ** (2 * n) - total, 4 ** (2 * n))
    _, occ = _float_sweep(ORIGIN2, 2 * n, targets=(ORIGIN2, b))
    surv0, _ = _float_sweep(ORIGIN2, 2 * n, forbidden=(ORIGIN2, b))
    survb, _ = _float_sweep(b, max(2 * n - 1, 0), forbidden=(ORIGIN2, b))
    total = 0.0
    for k in range(n + 1):
        total += occ[ORIGIN2][2 * k] * surv0[2 * n - 2 * k]
    for k in range(n):
        total += occ[b][2 * k + 1] * survb[2 * n - 2 * k - 1]
    return 1.0 - total
