"""Crank-Nicolson propagation of the multichannel radial wavefunction in a
linearly polarized, velocity-gauge dipole field.

A state is a complex array of shape ``(n_channels, N-1)``: row ``I`` is the
scaled radial function ``f~`` of channel ``basis.channels[I]`` on the
interior GLL nodes.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .angular import AngularBasis, CouplingMatrices
from .tise import (
    RadialOperatorSet,
    assemble_hamiltonian,
    normalize_scaled,
    potential_on_nodes,
    scaled_norm_factor,
    solve_eigen,
)

log = logging.getLogger(__name__)


class SolverNotConverged(RuntimeError):
    def __init__(self, message, step=None, stats=None):
        super().__init__(message)
        self.step = step
        self.stats = stats
        self.series = None


# ------------------------------------------------------------------ field

@dataclass(frozen=True)
class Pulse:
    """``A(t) = A0 sin^2(pi t / T) cos(omega t + phase)`` on ``[0, T]``, zero outside."""

    amplitude: float
    omega: float
    duration: float
    phase: float = 0.0

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"pulse duration must be positive, got {self.duration}")

    def __call__(self, t):
        return vector_potential(self, t)


def vector_potential(pulse, t):
    if t <= 0.0 or t >= pulse.duration:
        return 0.0
    env = math.sin(math.pi * t / pulse.duration) ** 2
    return pulse.amplitude * env * math.cos(pulse.omega * t + pulse.phase)


# ------------------------------------------------------------------ system

def _csr(mat):
    mat = np.asarray(mat, dtype=complex)
    rows, cols = np.nonzero(mat)
    indptr = np.searchsorted(rows, np.arange(mat.shape[0] + 1)).astype(np.int64)
    return indptr, cols.astype(np.int64), np.ascontiguousarray(mat[rows, cols])


@dataclass(frozen=True)
class TdseSystem:
    """Everything the matrix-free Hamiltonian needs, assembled once."""

    ops: RadialOperatorSet
    basis: AngularBasis
    couplings: CouplingMatrices
    potentials: np.ndarray = field(repr=False)  # (n_channels, N-1) real, V~_I
    pulse: Pulse | None = None

    @classmethod
    def build(cls, ops, basis, couplings, potential, pulse=None):
        return cls(ops, basis, couplings, channel_potentials(ops, basis, potential), pulse)

    @property
    def shape(self):
        return (self.basis.n_channels, self.ops.size)

    @cached_property
    def alpha_csr(self):
        return _csr(self.couplings.alpha)

    @cached_property
    def bma_csr(self):
        return _csr(self.couplings.beta_minus_alpha)

    def field(self, t):
        return 0.0 if self.pulse is None else vector_potential(self.pulse, t)

    def apply(self, state, a_t):
        return _kernels.hamiltonian_apply(
            state, self.ops.d2, self.ops.d1, self.potentials, self.ops.inv_r,
            self.alpha_csr, self.bma_csr, a_t,
        )


def channel_potentials(ops, basis, potential):
    """Per-channel diagonal ``V(r_i) + h(x_i) + l(l+1)/(2 r_i^2)``."""
    v = potential_on_nodes(ops, potential)
    return np.ascontiguousarray(
        np.array([v + ops.centrifugal(l) for l in basis.l_values]).reshape(basis.n_channels, -1)
    )


def apply_hamiltonian(state, ops, couplings, potentials, a_t):
    """Matrix-free ``H(t) f~`` for a state of shape ``(n_channels, N-1)``."""
    state = np.ascontiguousarray(state, dtype=complex)
    n = couplings.alpha.shape[0]
    if state.shape != (n, ops.size) or np.shape(potentials) != state.shape:
        raise ValueError(
            f"state {state.shape}, potentials {np.shape(potentials)} and couplings "
            f"({n} channels x {ops.size} nodes) disagree"
        )
    return _kernels.hamiltonian_apply(
        state, ops.d2, ops.d1, np.ascontiguousarray(potentials, dtype=float), ops.inv_r,
        _csr(couplings.alpha), _csr(couplings.beta_minus_alpha), a_t,
    )


def dense_hamiltonian(ops, couplings, potentials, a_t):
    """Explicit Kronecker form of ``H(t)``; only for small test systems."""
    n_ch, n = np.shape(potentials)
    H = np.kron(np.eye(n_ch), -0.5 * ops.d2) + np.diag(np.ravel(potentials))
    H = H.astype(complex)
    if a_t != 0.0:
        H -= 1j * a_t * (
            np.kron(couplings.alpha, ops.d1)
            + np.kron(couplings.beta_minus_alpha, np.diag(ops.inv_r))
        )
    return H


# ------------------------------------------------------------------ preconditioner

@dataclass(frozen=True)
class BlockPreconditioner:
    """Block-diagonal ``M = blockdiag((I + i dt/2 T_l)^{-1})``; channels of
    equal ``l`` share one dense block."""

    dt: float
    l_blocks: np.ndarray
    blocks: np.ndarray = field(repr=False)  # (n_l, n, n) complex
    channel_block: np.ndarray = field(repr=False)  # (n_channels,) int64
    includes_potential: bool = False

    @cached_property
    def blocks_t(self):
        return np.ascontiguousarray(np.transpose(self.blocks, (0, 2, 1)))

    def apply(self, state):
        return _kernels.block_apply(state, self.blocks, self.blocks_t, self.channel_block)

    def __call__(self, state):
        return self.apply(state)


def build_preconditioner(ops, basis, dt, potential=None):
    """Direct inverses of ``I + (i dt/2) T_l`` per distinct ``l``.

    With ``potential`` given, ``V + h`` is added to ``T_l`` inside the inverse
    (the "full block" variant).
    """
    n = ops.size
    if n > 4000:
        raise ValueError(f"dense preconditioner blocks limited to 4000 nodes, got {n}")
    l_vals = basis.l_values
    l_blocks = np.unique(l_vals)
    extra = 0.0 if potential is None else np.diag(potential_on_nodes(ops, potential))
    eye = np.eye(n)
    blocks = np.empty((l_blocks.size, n, n), dtype=complex)
    for k, l in enumerate(l_blocks):
        A = eye + 0.5j * dt * (ops.kinetic(int(l)) + extra)
        blocks[k] = np.linalg.inv(A)
    channel_block = np.searchsorted(l_blocks, l_vals).astype(np.int64)
    return BlockPreconditioner(
        dt=dt, l_blocks=l_blocks, blocks=blocks, channel_block=channel_block,
        includes_potential=potential is not None,
    )


# ------------------------------------------------------------------ BiCGSTAB

class BicgstabResult(NamedTuple):
    x: np.ndarray
    iterations: int
    converged: bool
    residual: float


def bicgstab(apply_A, b, x0=None, precond=None, rtol=1e-12, atol=0.0, max_iter=2000):
    """Right-preconditioned BiCGSTAB.

    Stops once ``||b - A x|| <= max(rtol ||b||, atol)`` holds for the true
    residual. On a breakdown (``rho``, ``r_hat.v`` or ``omega`` vanishing) the iteration
    restarts once from the current iterate with a fresh shadow residual; a
    second breakdown returns ``converged=False``.
    """
    if not (rtol > 0 or atol > 0):
        raise ValueError("need rtol > 0 or atol > 0")
    b = np.asarray(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=np.result_type(b, x0))
    M = precond if precond is not None else (lambda v: v)
    eps = np.finfo(float).eps

    bnorm = np.linalg.norm(b)
    threshold = max(rtol * bnorm, atol)
    r = b - apply_A(x)
    rnorm = np.linalg.norm(r)
    if rnorm <= threshold:
        return BicgstabResult(x, 0, True, float(rnorm))

    iters = 0
    breakdowns = 0
    while iters < max_iter:
        r_hat = r.copy()
        rho_old = alpha = omega = 1.0
        v = np.zeros_like(r)
        p = np.zeros_like(r)
        breakdown = False
        while iters < max_iter:
            rho = np.vdot(r_hat, r)
            if abs(rho) <= eps**2 * np.linalg.norm(r_hat) * rnorm:
                breakdown = True
                break
            iters += 1
            beta = (rho / rho_old) * (alpha / omega)
            p = r + beta * (p - omega * v)
            p_hat = M(p)
            v = apply_A(p_hat)
            rv = np.vdot(r_hat, v)
            if abs(rv) <= eps**2 * np.linalg.norm(r_hat) * np.linalg.norm(v):
                breakdown = True
                break
            alpha = rho / rv
            s = r - alpha * v
            snorm = np.linalg.norm(s)
            if snorm <= threshold:
                x = x + alpha * p_hat
                r, rnorm = s, snorm
                break
            s_hat = M(s)
            t = apply_A(s_hat)
            tt = np.vdot(t, t).real
            omega = np.vdot(t, s) / tt if tt > 0 else 0.0
            x = x + alpha * p_hat + omega * s_hat
            r = s - omega * t
            rnorm = np.linalg.norm(r)
            rho_old = rho
            if rnorm <= threshold:
                break
            if abs(omega) <= eps**2:
                breakdown = True
                break

        # confirm on the true residual; the recursive one can drift
        r = b - apply_A(x)
        rnorm = np.linalg.norm(r)
        if rnorm <= threshold:
            return BicgstabResult(x, iters, True, float(rnorm))
        if breakdown:
            breakdowns += 1
            if breakdowns > 1:
                break
            log.debug("BiCGSTAB breakdown after %d iterations; restarting", iters)
    return BicgstabResult(x, iters, False, float(rnorm))


# ------------------------------------------------------------------ stepping

@dataclass(frozen=True)
class PropagatorConfig:
    dt: float
    n_steps: int
    rtol: float = 1e-12
    atol: float = 0.0
    max_iter: int = 2000
    use_preconditioner: bool = True
    include_potential_in_preconditioner: bool = False

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.n_steps < 0:
            raise ValueError(f"n_steps must be >= 0, got {self.n_steps}")
        if not (self.rtol > 0 or self.atol > 0):
            raise ValueError("need rtol > 0 or atol > 0")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")

    @classmethod
    def covering(cls, duration, dt, **kw):
        """Config whose ``n_steps * dt`` spans ``[0, duration]``."""
        return cls(dt=dt, n_steps=int(math.ceil(duration / dt - 1e-9)), **kw)


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    residual: float
    converged: bool
    a_mid: float


def make_preconditioner(system, cfg, potential=None, dt=None):
    if not cfg.use_preconditioner:
        return None
    if cfg.include_potential_in_preconditioner and potential is None:
        raise ValueError("full-block preconditioner needs the potential")
    pot = potential if cfg.include_potential_in_preconditioner else None
    return build_preconditioner(system.ops, system.basis, cfg.dt if dt is None else dt, pot)


def cn_step(system, state, t_n, cfg, precond=None, dt=None, best_effort=False, step=None):
    """One Crank-Nicolson step with the field frozen at the midpoint.

    Solves ``(I + i dt/2 H) f^{n+1} = (I - i dt/2 H) f^n`` with BiCGSTAB,
    starting from ``f^n``.
    """
    dt = cfg.dt if dt is None else dt
    shape = state.shape
    a_mid = system.field(t_n + 0.5 * dt)
    half = 0.5j * dt

    def apply_A(v):
        v = v.reshape(shape)
        return (v + half * system.apply(v, a_mid)).ravel()

    M = None
    if precond is not None:
        def M(v):
            return precond.apply(v.reshape(shape)).ravel()

    b = (state - half * system.apply(state, a_mid)).ravel()
    res = bicgstab(apply_A, b, state.ravel(), M, cfg.rtol, cfg.atol, cfg.max_iter)
    stats = SolveStats(res.iterations, res.residual, res.converged, a_mid)
    if not res.converged:
        msg = (f"BiCGSTAB did not converge at t={t_n:.6g} after {res.iterations} "
               f"iterations (residual {res.residual:.3e})")
        if not best_effort:
            raise SolverNotConverged(msg, step=step, stats=stats)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return res.x.reshape(shape), stats


# ------------------------------------------------------------------ observables

def observables(state, grid, reference=None):
    """Norm, overlap with ``reference`` and per-channel populations, all in the
    quadrature metric ``sum_i w_i P_N(x_i)^2 |f~_i|^2``."""
    c = scaled_norm_factor(grid)
    pops = c * np.sum(np.abs(state) ** 2, axis=-1)
    out = {"norm": float(pops.sum()), "populations": pops}
    if reference is not None:
        out["overlap"] = complex(c * np.vdot(reference, state))
    return out


def initial_state(ops, basis, potential, n=1, l=0, m=0):
    """TISE eigenstate ``(n, l)`` placed in channel ``(l, m)``; returns the
    normalized state and its energy."""
    if n < l + 1:
        raise ValueError(f"principal-like index n={n} must be >= l+1={l + 1}")
    k = n - l - 1
    sol = solve_eigen(assemble_hamiltonian(ops, l, potential), k + 1)
    state = np.zeros((basis.n_channels, ops.size), dtype=complex)
    state[basis.index(l, m)] = normalize_scaled(ops.grid, sol.vectors[:, k])
    return state, float(sol.energies[k])


@dataclass
class TimeSeries:
    step: list = field(default_factory=list)
    t: list = field(default_factory=list)
    a_t: list = field(default_factory=list)
    norm: list = field(default_factory=list)
    overlap: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    residual: list = field(default_factory=list)
    converged: list = field(default_factory=list)
    # per-step solver counts, independent of the recording stride
    step_iterations: list = field(default_factory=list)
    step_converged: list = field(default_factory=list)
    final_state: np.ndarray | None = field(default=None, repr=False)

    def record(self, step, t, a_t, obs, stats):
        self.step.append(step)
        self.t.append(t)
        self.a_t.append(a_t)
        self.norm.append(obs["norm"])
        self.overlap.append(obs.get("overlap", complex("nan")))
        self.iterations.append(0 if stats is None else stats.iterations)
        self.residual.append(0.0 if stats is None else stats.residual)
        self.converged.append(True if stats is None else stats.converged)

    def rows(self):
        for k in range(len(self.step)):
            ov = self.overlap[k]
            yield (self.step[k], self.t[k], self.a_t[k], self.norm[k], ov.real, ov.imag,
                   self.iterations[k], self.residual[k])


Observer = Callable[[int, float, np.ndarray, "SolveStats | None"], None]


def propagate(system, initial, cfg, observers=(), stride=1, reference=None,
              potential=None, best_effort=False, t0=0.0):
    """Run ``cfg.n_steps`` Crank-Nicolson steps from ``initial``.

    The returned :class:`TimeSeries` holds the initial record plus one record
    every ``stride`` steps (and always the last). Observers are called with
    ``(step, t, state, stats)`` at the same cadence and must not mutate the
    state.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    grid = system.ops.grid
    reference = initial if reference is None else reference
    precond = make_preconditioner(system, cfg, potential)
    series = TimeSeries()

    def emit(step, t, state, stats):
        series.record(step, t, system.field(t), observables(state, grid, reference), stats)
        view = state.view()
        view.flags.writeable = False
        for obs in observers:
            obs(step, t, view, stats)

    state = np.array(initial, dtype=complex)
    emit(0, t0, state, None)
    for k in range(cfg.n_steps):
        t = t0 + k * cfg.dt
        try:
            state, stats = cn_step(system, state, t, cfg, precond, best_effort=best_effort,
                                   step=k + 1)
        except SolverNotConverged as exc:
            # hand the records gathered so far to the caller
            series.final_state = state
            exc.series = series
            raise
        series.step_iterations.append(stats.iterations)
        series.step_converged.append(stats.converged)
        if (k + 1) % stride == 0 or k + 1 == cfg.n_steps:
            emit(k + 1, t0 + (k + 1) * cfg.dt, state, stats)
    series.final_state = state
    return series
