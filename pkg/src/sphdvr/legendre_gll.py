"""Legendre polynomials, Gauss-Legendre-Lobatto nodes/weights and cardinal
derivative tables.

Every radial operator in the package is assembled from the tables held by
:class:`GllGrid`. Nodes are stored in ascending order, ``x[0] = -1`` and
``x[N] = 1``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

NEWTON_TOL = 1e-14
NEWTON_MAXITER = 100


class GridConstructionError(RuntimeError):
    pass


def legendre_eval(n, x):
    """Return ``(P_n(x), P_n'(x))`` from the three-term recurrence.

    ``x`` may be a scalar or an array. The derivative uses
    ``P'_{k+1} = P'_{k-1} + (2k+1) P_k`` which stays exact at ``x = +-1``.
    """
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    x = np.asarray(x, dtype=float)
    p_prev, p = np.ones_like(x), x.copy()
    dp_prev, dp = np.zeros_like(x), np.ones_like(x)
    if n == 0:
        return _unwrap(p_prev), _unwrap(dp_prev)
    for k in range(1, n):
        p_next = ((2 * k + 1) * x * p - k * p_prev) / (k + 1)
        dp_next = dp_prev + (2 * k + 1) * p
        p_prev, p = p, p_next
        dp_prev, dp = dp, dp_next
    return _unwrap(p), _unwrap(dp)


def _unwrap(a):
    return float(a) if a.ndim == 0 else a


def _lobatto_interior(N):
    # Newton on P'_N, seeded by Chebyshev-Gauss-Lobatto points
    x = np.sort(np.cos(np.pi * np.arange(1, N) / N))
    for _ in range(NEWTON_MAXITER):
        p, dp = legendre_eval(N, x)
        # P''_N from the Legendre ODE: (1 - x^2) P'' = 2x P' - N(N+1) P
        ddp = (2.0 * x * dp - N * (N + 1) * p) / (1.0 - x**2)
        dx = dp / ddp
        x = x - dx
        if np.max(np.abs(dx)) <= 4 * np.finfo(float).eps:
            break
    else:
        _, dp = legendre_eval(N, x)
        if np.max(np.abs(dp)) > NEWTON_TOL * N**2:
            raise GridConstructionError(
                f"Lobatto root search for N={N} did not converge in "
                f"{NEWTON_MAXITER} iterations (max |P'_N| = {np.max(np.abs(dp)):.3e})"
            )
    # exact mirror symmetry x_i = -x_{N-i}
    return 0.5 * (x - x[::-1])


@dataclass(frozen=True)
class GllGrid:
    """Gauss-Legendre-Lobatto grid of polynomial order ``N`` (``N+1`` points).

    Attributes
    ----------
    nodes, weights, pn_at_nodes : (N+1,) arrays
    d1_tilde : (N+1, N+1) array
        ``d1_tilde[i, j]`` is the scaled cardinal derivative at ``x_i``,
        ``g'_j(x_i) = d1_tilde[i, j] * P_N(x_i) / P_N(x_j)``.
    d2_tilde : (N-1, N-1) array
        Scaled second derivative on interior nodes only (row/column ``k``
        corresponds to node ``k + 1``).
    """

    order: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    pn_at_nodes: np.ndarray = field(repr=False)
    d1_tilde: np.ndarray = field(repr=False)
    d2_tilde: np.ndarray = field(repr=False)

    @property
    def interior(self):
        return self.nodes[1:-1]

    @property
    def n_interior(self):
        return self.order - 1

    def cardinal(self, j, x):
        return cardinal_eval(self, j, x)

    def integrate(self, samples):
        return quadrature(self, samples)


def build_grid(order):
    N = int(order)
    if N < 2:
        raise ValueError(f"GLL order must be >= 2, got {order}")

    x = np.empty(N + 1)
    x[0], x[-1] = -1.0, 1.0
    x[1:-1] = _lobatto_interior(N)
    pn, _ = legendre_eval(N, x)
    pn = np.asarray(pn)
    w = 2.0 / (N * (N + 1) * pn**2)

    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    d1 = 1.0 / diff
    np.fill_diagonal(d1, 0.0)
    # ascending order: the left endpoint carries the negative corner
    d1[0, 0] = -0.25 * N * (N + 1)
    d1[N, N] = 0.25 * N * (N + 1)

    xi = x[1:-1]
    dint = diff[1:-1, 1:-1]
    d2 = -2.0 / dint**2
    np.fill_diagonal(d2, -N * (N + 1) / (3.0 * (1.0 - xi**2)))

    for a in (x, w, pn, d1, d2):
        a.setflags(write=False)
    return GllGrid(order=N, nodes=x, weights=w, pn_at_nodes=pn, d1_tilde=d1, d2_tilde=d2)


def cardinal_eval(grid, j, x):
    """Cardinal function ``g_j`` at ``x`` (scalar or array); ``g_j(x_j) = 1``."""
    N = grid.order
    if not 0 <= j <= N:
        raise IndexError(f"cardinal index {j} outside 0..{N}")
    xj = grid.nodes[j]
    x = np.asarray(x, dtype=float)
    _, dp = legendre_eval(N, x)
    with np.errstate(divide="ignore", invalid="ignore"):
        g = -(1.0 - x**2) * dp / ((x - xj) * N * (N + 1) * grid.pn_at_nodes[j])
    g = np.where(x == xj, 1.0, g)
    return _unwrap(g)


def quadrature(grid, samples):
    samples = np.asarray(samples)
    if samples.shape[-1:] != grid.weights.shape:
        raise ValueError(
            f"expected {grid.order + 1} samples on the last axis, got shape {samples.shape}"
        )
    return samples @ grid.weights
