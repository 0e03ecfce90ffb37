"""Hot loops of the time propagation: the matrix-free Hamiltonian apply and
the block preconditioner apply.

Two interchangeable backends share one signature. The numba backend is
used when numba imports and ``SPHDVR_DISABLE_NUMBA`` is unset (or ``0``);
otherwise the pure numpy/BLAS backend runs. ``SPHDVR_NUM_THREADS`` caps the
numba thread pool.

Layouts: states are C-contiguous complex ``(n_channels, n_nodes)``;
couplings are CSR triples ``(indptr, indices, data)`` over channels.
"""
from __future__ import annotations

import os

import numpy as np
import scipy.sparse

_FLAG = os.environ.get("SPHDVR_DISABLE_NUMBA", "0").strip().lower()
NUMBA_REQUESTED = _FLAG in ("", "0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
BACKEND = "numba" if (HAVE_NUMBA and NUMBA_REQUESTED) else "numpy"

if HAVE_NUMBA and "NUMBA_THREADING_LAYER_PRIORITY" not in os.environ:
    # probe OpenMP first; an outdated TBB otherwise warns on every import
    numba.config.THREADING_LAYER_PRIORITY = ["omp", "tbb", "workqueue"]

if HAVE_NUMBA and os.environ.get("SPHDVR_NUM_THREADS"):
    numba.set_num_threads(int(os.environ["SPHDVR_NUM_THREADS"]))


# ------------------------------------------------------------------ numpy

def _csr_matmul(indptr, indices, data, X):
    n = indptr.size - 1
    return scipy.sparse.csr_matrix((data, indices, indptr), shape=(n, n)) @ X


def _real_matmul_right(F, M):
    # F @ M.T for complex F and real M; one real GEMM on stacked re/im planes
    n = F.shape[0]
    X = np.concatenate((F.real, F.imag)) @ M.T
    return X[:n] + 1j * X[n:]


def hamiltonian_apply_numpy(F, d2, d1, vdiag, inv_r, a_csr, bma_csr, a_t):
    out = -0.5 * _real_matmul_right(F, d2) + vdiag * F
    if a_t != 0.0:
        G = _real_matmul_right(F, d1)
        coup = _csr_matmul(*a_csr, G) + _csr_matmul(*bma_csr, F) * inv_r
        out -= 1j * a_t * coup
    return out


def block_apply_numpy(F, blocks_t, channel_block):
    out = np.empty_like(F)
    for b in range(blocks_t.shape[0]):
        idx = np.flatnonzero(channel_block == b)
        if idx.size:
            out[idx] = F[idx] @ blocks_t[b]
    return out


# ------------------------------------------------------------------ numba

if HAVE_NUMBA:

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _ham_numba(F, d2, d1, vdiag, inv_r, a_ptr, a_idx, a_val, b_ptr, b_idx, b_val, a_t):
        nch, n = F.shape
        out = np.empty_like(F)
        Fr = np.ascontiguousarray(F.real)
        Fi = np.ascontiguousarray(F.imag)
        for I in numba.prange(nch):
            for i in range(n):
                sr = 0.0
                si = 0.0
                for j in range(n):
                    sr += d2[i, j] * Fr[I, j]
                    si += d2[i, j] * Fi[I, j]
                out[I, i] = -0.5 * (sr + 1j * si) + vdiag[I, i] * F[I, i]
        if a_t == 0.0:
            return out
        G = np.empty_like(F)
        for J in numba.prange(nch):
            for i in range(n):
                sr = 0.0
                si = 0.0
                for j in range(n):
                    sr += d1[i, j] * Fr[J, j]
                    si += d1[i, j] * Fi[J, j]
                G[J, i] = sr + 1j * si
        scale = -1j * a_t
        for I in numba.prange(nch):
            for i in range(n):
                acc = 0j
                for k in range(a_ptr[I], a_ptr[I + 1]):
                    acc += a_val[k] * G[a_idx[k], i]
                accb = 0j
                for k in range(b_ptr[I], b_ptr[I + 1]):
                    accb += b_val[k] * F[b_idx[k], i]
                out[I, i] += scale * (acc + accb * inv_r[i])
        return out

    @numba.njit(parallel=True, fastmath=True, cache=True)
    def _block_numba(F, blocks, channel_block):
        nch, n = F.shape
        out = np.empty_like(F)
        for I in numba.prange(nch):
            B = blocks[channel_block[I]]
            for i in range(n):
                acc = 0j
                for j in range(n):
                    acc += B[i, j] * F[I, j]
                out[I, i] = acc
        return out

    def hamiltonian_apply_numba(F, d2, d1, vdiag, inv_r, a_csr, bma_csr, a_t):
        return _ham_numba(F, d2, d1, vdiag, inv_r, *a_csr, *bma_csr, float(a_t))

    def block_apply_numba(F, blocks, channel_block):
        return _block_numba(F, blocks, channel_block)


def hamiltonian_apply(F, d2, d1, vdiag, inv_r, a_csr, bma_csr, a_t, backend=None):
    if (backend or BACKEND) == "numba":
        return hamiltonian_apply_numba(F, d2, d1, vdiag, inv_r, a_csr, bma_csr, a_t)
    return hamiltonian_apply_numpy(F, d2, d1, vdiag, inv_r, a_csr, bma_csr, a_t)


def block_apply(F, blocks, blocks_t, channel_block, backend=None):
    if (backend or BACKEND) == "numba":
        return block_apply_numba(F, blocks, channel_block)
    return block_apply_numpy(F, blocks_t, channel_block)
