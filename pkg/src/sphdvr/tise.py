"""Radial Hamiltonian on the mapped GLL grid and its bound-state spectrum.

Unknowns live on the interior nodes ``x_1 .. x_{N-1}`` (Dirichlet walls at
``r = 0`` and ``r = r_max``) in the scaled representation
``f~_i = f(x_i) / P_N(x_i)`` with ``psi(r(x)) = r'(x)^{-1/2} f(x)``. In this
representation the weights cancel and ``H_l`` is a plain real symmetric
matrix.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .legendre_gll import GllGrid
from .radial_map import RadialMap, extra_potential_from_derivatives, map_eval

log = logging.getLogger(__name__)


class HamiltonianError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class RadialOperatorSet:
    """Interior-node radial operators, shapes ``(N-1, N-1)`` / ``(N-1,)``."""

    grid: GllGrid = field(repr=False)
    rmap: RadialMap
    d2: np.ndarray = field(repr=False)
    d1: np.ndarray = field(repr=False)
    r_nodes: np.ndarray = field(repr=False)
    inv_r: np.ndarray = field(repr=False)
    extra_pot: np.ndarray = field(repr=False)
    rdot: np.ndarray = field(repr=False)

    @property
    def size(self):
        return self.r_nodes.size

    def centrifugal(self, l):
        return 0.5 * l * (l + 1) * self.inv_r**2

    def kinetic(self, l):
        """``T_l = -D2/2 + l(l+1)/(2 r^2)``."""
        t = -0.5 * self.d2
        t[np.diag_indices_from(t)] += self.centrifugal(l)
        return t


def build_operators(grid, rmap):
    xi = grid.interior
    r, r1, r2, r3 = map_eval(rmap, xi)
    sq = np.sqrt(r1)
    d2 = grid.d2_tilde / np.outer(r1, r1)
    d1 = grid.d1_tilde[1:-1, 1:-1] / np.outer(sq, sq)
    h = extra_potential_from_derivatives(r1, r2, r3)
    return RadialOperatorSet(
        grid=grid, rmap=rmap, d2=d2, d1=d1, r_nodes=r, inv_r=1.0 / r, extra_pot=h, rdot=r1,
    )


# ---------------------------------------------------------------- potentials

def coulomb(Z=1.0):
    def V(r):
        return -Z / r
    V.label = f"coulomb(Z={Z})"
    return V


def softcore(a=1.0, Z=1.0):
    def V(r):
        return -Z / np.sqrt(r * r + a * a)
    V.label = f"softcore(a={a}, Z={Z})"
    return V


def zero_potential():
    def V(r):
        return np.zeros_like(r)
    V.label = "zero"
    return V


POTENTIALS = {"coulomb": coulomb, "softcore": softcore, "zero": zero_potential}


def potential_on_nodes(ops, potential):
    """``V(r_i) + h(x_i)``; raises if any node value is non-finite."""
    v = np.asarray(potential(ops.r_nodes), dtype=float) + ops.extra_pot
    bad = np.flatnonzero(~np.isfinite(v))
    if bad.size:
        i = bad[0]
        raise HamiltonianError(
            f"potential is not finite at interior node {i + 1} (r = {ops.r_nodes[i]!r})"
        )
    return v


def effective_potential(ops, l, potential):
    """Diagonal ``V~_l = V + l(l+1)/(2 r^2) + h`` on interior nodes."""
    return potential_on_nodes(ops, potential) + ops.centrifugal(l)


@dataclass(frozen=True)
class RadialHamiltonian:
    l: int
    matrix: np.ndarray = field(repr=False)


def assemble_hamiltonian(ops, l, potential):
    if l < 0:
        raise ValueError(f"l must be >= 0, got {l}")
    v = potential_on_nodes(ops, potential)
    H = ops.kinetic(l)
    H[np.diag_indices_from(H)] += v
    return RadialHamiltonian(l=l, matrix=H)


@dataclass(frozen=True)
class EigenSolution:
    """Lowest eigenpairs of ``H_l``; ``vectors[:, n]`` is the scaled
    representation ``f~`` of state ``n`` with unit Euclidean norm."""

    l: int
    energies: np.ndarray
    vectors: np.ndarray = field(repr=False)

    @property
    def count(self):
        return self.energies.size


def solve_eigen(h, count=None):
    n = h.matrix.shape[0]
    count = n if count is None else int(count)
    if not 1 <= count <= n:
        raise ValueError(f"count must be in 1..{n} (N-1), got {count}")
    try:
        w, v = scipy.linalg.eigh(h.matrix, subset_by_index=(0, count - 1), driver="evr")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise EigenSolverError(
            f"symmetric eigensolver failed for l={h.l}, size {n}: {exc}"
        ) from exc
    return EigenSolution(l=h.l, energies=w, vectors=v)


def scaled_norm_factor(grid):
    """``w_i P_N(x_i)^2``, identical for every node: ``2 / (N (N+1))``."""
    N = grid.order
    return 2.0 / (N * (N + 1))


def normalize_scaled(grid, ftilde):
    """Scale ``f~`` so that ``sum_i w_i (P_N(x_i) f~_i)^2 = 1``."""
    pn = grid.pn_at_nodes[1:-1]
    w = grid.weights[1:-1]
    nrm = np.sqrt(np.sum(w * np.abs(pn * ftilde) ** 2))
    return ftilde / nrm


def unscale_to_radial(sol, ops, n):
    """Radial function ``u_n(r_i) = r'(x_i)^{-1/2} P_N(x_i) f~_n(x_i)`` with
    ``f~`` normalized to the discrete ``int |u|^2 dr = 1``.

    The sign is fixed so that the first node carries a non-negative value.
    """
    if not 0 <= n < sol.count:
        raise IndexError(f"state index {n} outside 0..{sol.count - 1}")
    grid = ops.grid
    f = normalize_scaled(grid, sol.vectors[:, n])
    u = grid.pn_at_nodes[1:-1] * f / np.sqrt(ops.rdot)
    if u[np.argmax(np.abs(u) > 1e-8 * np.abs(u).max())] < 0:
        u = -u
    return u


def solve_radial(ops, l, potential, count):
    """Assemble and diagonalize in one call."""
    return solve_eigen(assemble_hamiltonian(ops, l, potential), count)
