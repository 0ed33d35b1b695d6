"""Discrete harmonic solver for the two-point first-passage constant.

Solves h(x) = P^x(hit 0 before b) on the box of radius R: h is discrete
harmonic away from the two sites, h(0) = 1, h(b) = 0, and the outer ring
carries the far-field value 1/2 (the two sites look identical from far
away).  The constant is then read off through one step from the origin:

    P(T_0 < T_b) = (1/4) * sum over unit neighbors y of h(y).

This route shares no code with the Monte Carlo bracket it cross-checks.
"""

import numpy as np
import scipy.sparse as sp

from .lattice import Point


def harmonic_field(R: int, b: Point = (1, 0)) -> np.ndarray:
    """h on the (2R+1)^2 grid, boundary conditions included."""
    if R < 2:
        raise ValueError("radius must be >= 2")
    size = 2 * R + 1
    fixed = np.zeros((size, size), dtype=bool)
    values = np.zeros((size, size))
    fixed[0, :] = fixed[-1, :] = fixed[:, 0] = fixed[:, -1] = True
    values[fixed] = 0.5
    cx = cy = R
    fixed[cx, cy] = True
    values[cx, cy] = 1.0
    fixed[cx + b[0], cy + b[1]] = True
    values[cx + b[0], cy + b[1]] = 0.0

    unknown = ~fixed
    index = -np.ones((size, size), dtype=np.int64)
    index[unknown] = np.arange(unknown.sum())
    n_unknown = int(unknown.sum())

    rows = [np.arange(n_unknown)]
    cols = [np.arange(n_unknown)]
    data = [np.ones(n_unknown)]
    rhs = np.zeros(n_unknown)
    ux, uy = np.nonzero(unknown)
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nx, ny = ux + dx, uy + dy
        nb_unknown = unknown[nx, ny]
        rows.append(index[ux, uy][nb_unknown])
        cols.append(index[nx, ny][nb_unknown])
        data.append(np.full(int(nb_unknown.sum()), -0.25))
        known = ~nb_unknown
        np.add.at(rhs, index[ux, uy][known], 0.25 * values[nx[known], ny[known]])

    A = sp.csr_matrix((np.concatenate(data),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(n_unknown, n_unknown))
    h_unknown = _solve(A, rhs)
    h = values.copy()
    h[unknown] = h_unknown
    return h


def _solve(A: sp.csr_matrix, rhs: np.ndarray) -> np.ndarray:
    # I - 0.25 * adjacency on the unknowns: symmetric positive definite
    if A.shape[0] <= 20000:
        return sp.linalg.spsolve(A.tocsc(), rhs)
    import pyamg

    ml = pyamg.ruge_stuben_solver(A.tocsr())
    return ml.solve(rhs, tol=1e-12, accel="cg", maxiter=300)


def harmonic_ctilde(R: int, b: Point = (1, 0)) -> float:
    """First-passage constant P(T_0 < T_b) from the harmonic field."""
    h = harmonic_field(R, b)
    c = 0.0
    for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        c += h[R + dx, R + dy]
    return c / 4.0
