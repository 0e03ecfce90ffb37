"""Compare the numba and numpy backends of the propagation kernels.

    python benchmarks/bench_kernels.py [--N 200] [--lmax 10] [--full-basis]
"""
import argparse
import time

import numpy as np

from sphdvr import _kernels
from sphdvr.angular import AngularBasis, build_couplings
from sphdvr.legendre_gll import build_grid
from sphdvr.radial_map import RadialMap
from sphdvr.tdse import TdseSystem, build_preconditioner
from sphdvr.tise import build_operators, coulomb


def best_of(fn, repeat=5, number=20):
    fn()  # warm-up (JIT compile on first call)
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(number):
            fn()
        times.append((time.perf_counter() - t0) / number)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--N", type=int, default=200)
    ap.add_argument("--lmax", type=int, default=10)
    ap.add_argument("--full-basis", action="store_true")
    args = ap.parse_args()

    ops = build_operators(build_grid(args.N), RadialMap.rational(200.0, 20.0))
    basis = AngularBasis(args.lmax, None if args.full_basis else 0)
    system = TdseSystem.build(ops, basis, build_couplings(basis, "z"), coulomb())
    pre = build_preconditioner(ops, basis, 0.05)
    rng = np.random.default_rng(0)
    F = rng.standard_normal(system.shape) + 1j * rng.standard_normal(system.shape)

    print(f"N={args.N} channels={basis.n_channels} numba available={_kernels.HAVE_NUMBA}")
    backends = ["numpy"] + (["numba"] if _kernels.HAVE_NUMBA else [])
    ref = {}
    for be in backends:
        h = lambda: _kernels.hamiltonian_apply(
            F, ops.d2, ops.d1, system.potentials, ops.inv_r,
            system.alpha_csr, system.bma_csr, 0.3, backend=be)
        m = lambda: _kernels.block_apply(F, pre.blocks, pre.blocks_t, pre.channel_block, backend=be)
        th, tm = best_of(h), best_of(m)
        ref.setdefault("h", h())
        ref.setdefault("m", m())
        dh = np.abs(h() - ref["h"]).max()
        dm = np.abs(m() - ref["m"]).max()
        print(f"{be:>6}: hamiltonian {th * 1e3:8.3f} ms  preconditioner {tm * 1e3:8.3f} ms"
              f"  (max diff vs numpy {dh:.1e}, {dm:.1e})")


if __name__ == "__main__":
    main()
