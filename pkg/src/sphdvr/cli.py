"""Command-line front end: ``sphdvr {grid,tise,tdse} --config run.toml``.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .angular import AngularBasis, build_couplings
from .config import ConfigError, RunConfig, load
from .legendre_gll import GridConstructionError, build_grid
from .radial_map import RadialMap, map_eval
from .tdse import (
    Pulse,
    PropagatorConfig,
    SolverNotConverged,
    TdseSystem,
    initial_state,
    propagate,
)
from .tise import (
    POTENTIALS,
    EigenSolverError,
    HamiltonianError,
    assemble_hamiltonian,
    build_operators,
    solve_eigen,
    unscale_to_radial,
)

log = logging.getLogger("sphdvr")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 1, 2


class UsageError(Exception):
    pass


def fmt(x):
    return format(float(x), ".17g")


def make_map(cfg):
    m = cfg.map
    if m.kind == "linear":
        return RadialMap.linear(m.r_max)
    return RadialMap.rational(m.r_max, m.L)


def make_potential(cfg):
    p = cfg.potential
    if p.kind == "coulomb":
        return POTENTIALS["coulomb"](p.Z)
    if p.kind == "softcore":
        return POTENTIALS["softcore"](p.a, p.Z)
    return POTENTIALS["zero"]()


def _prepare_dir(path):
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from exc
    return path


def write_manifest(out, cfg, command, status="ok", **extra):
    rmap = make_map(cfg)
    manifest = {
        "artifact": "sphdvr",
        "version": __version__,
        "command": command,
        "status": status,
        "kernel_backend": _kernels.BACKEND,
        "resolved_map": {"kind": rmap.kind.value, "r_max": rmap.r_max, "L": rmap.length_param},
        "config": cfg.to_dict(),
        **extra,
    }
    path = Path(out) / "MANIFEST.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _say(args, msg):
    if not args.quiet:
        print(msg)


# ------------------------------------------------------------------ commands

def cmd_grid(cfg, args):
    grid = build_grid(cfg.grid.N)
    rmap = make_map(cfg)
    out = _prepare_dir(args.out)
    r, r1, _, _ = map_eval(rmap, grid.nodes)
    rows = (
        (i, fmt(grid.nodes[i]), fmt(grid.weights[i]), fmt(grid.pn_at_nodes[i]), fmt(r[i]), fmt(r1[i]))
        for i in range(grid.order + 1)
    )
    _write_csv(out / "grid.csv", ["i", "x_i", "w_i", "P_N(x_i)", "r(x_i)", "rdot(x_i)"], rows)
    write_manifest(out, cfg, "grid")
    _say(args, f"N={grid.order} r_max={fmt(rmap.r_max)} "
               f"first_interior_r={fmt(r[1])} last_interior_r={fmt(r[-2])}")
    return EXIT_OK


def cmd_tise(cfg, args):
    N, count = cfg.grid.N, cfg.tise.count
    if count > N - 1:
        raise UsageError(f"tise.count={count} exceeds the N-1={N - 1} interior nodes")
    grid = build_grid(N)
    rmap = make_map(cfg)
    ops = build_operators(grid, rmap)
    potential = make_potential(cfg)
    sols = [solve_eigen(assemble_hamiltonian(ops, l, potential), count) for l in cfg.tise.l]

    out = _prepare_dir(args.out)
    rows = []
    for sol in sols:
        for k, e in enumerate(sol.energies):
            rows.append((sol.l, k + sol.l + 1, fmt(e)))
    _write_csv(out / "eigenvalues.csv", ["l", "n", "energy"], rows)

    states = []
    if cfg.tise.write_states or "states" in cfg.output.formats:
        single = len(sols) == 1
        for sol in sols:
            stem = "states" if single else f"states_l{sol.l}"
            psi = np.array([unscale_to_radial(sol, ops, k) for k in range(sol.count)])
            psi.astype("<f8").tofile(out / f"{stem}.f64")
            sidecar = {
                "N": N, "r_max": rmap.r_max, "map": rmap.kind.value, "L": rmap.length_param,
                "l": sol.l, "count": sol.count, "shape": list(psi.shape),
                "dtype": "float64 little-endian, row-major (state, interior node)",
                "r_nodes": ops.r_nodes.tolist(),
            }
            (out / f"{stem}.json").write_text(json.dumps(sidecar, indent=2) + "\n")
            states.append(f"{stem}.f64")
    write_manifest(out, cfg, "tise", files=["eigenvalues.csv", *states])
    for sol in sols:
        _say(args, f"l={sol.l}: " + " ".join(fmt(e) for e in sol.energies))
    return EXIT_OK


def cmd_tdse(cfg, args):
    grid = build_grid(cfg.grid.N)
    rmap = make_map(cfg)
    ops = build_operators(grid, rmap)
    potential = make_potential(cfg)
    basis = AngularBasis(cfg.basis.l_max, cfg.basis.m_restriction)
    couplings = build_couplings(basis, cfg.field.polarization)
    f = cfg.field
    pulse = Pulse(f.A0, f.omega, f.duration, f.phase)
    system = TdseSystem.build(ops, basis, couplings, potential, pulse)
    p = cfg.propagation
    pcfg = PropagatorConfig(
        dt=p.dt, n_steps=cfg.n_steps, rtol=p.rtol, atol=p.atol, max_iter=p.max_iter,
        use_preconditioner=p.use_preconditioner,
        include_potential_in_preconditioner=p.precond_variant == "full",
    )
    psi0, e0 = initial_state(ops, basis, potential, cfg.initial.n, cfg.initial.l, cfg.initial.m)
    out = _prepare_dir(args.out)

    snaps = []
    observers = []
    if p.snapshot_stride > 0 and "snapshots" in cfg.output.formats:
        def snapshot(step, t, state, stats):
            if step % p.snapshot_stride:
                return
            stem = f"snapshot_{step:07d}"
            np.ascontiguousarray(state, dtype="<c16").tofile(out / f"{stem}.c128")
            meta = {
                "N": cfg.grid.N, "l_max": basis.l_max, "m_restriction": basis.m_restriction,
                "channels": [list(c) for c in basis.channels],
                "map": {"kind": rmap.kind.value, "r_max": rmap.r_max, "L": rmap.length_param},
                "pulse": {"A0": f.A0, "omega": f.omega, "duration": f.duration, "phase": f.phase,
                          "polarization": f.polarization},
                "dt": p.dt, "step": step, "t": t,
                "dtype": "complex128 little-endian interleaved re/im, row-major (channel, node)",
            }
            (out / f"{stem}.json").write_text(json.dumps(meta, indent=2) + "\n")
            snaps.append(stem)
        observers.append(snapshot)

    flagged = []
    header = ["step", "t", "A_t", "norm", "re_overlap", "im_overlap", "solver_iters", "residual"]
    status, failed_step, series = "ok", None, None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        try:
            series = propagate(system, psi0, pcfg, observers, stride=p.output_stride,
                               potential=potential, best_effort=args.best_effort)
        except SolverNotConverged as exc:
            status, failed_step = "failed", exc.step
            log.error("%s", exc)
            partial = getattr(exc, "series", None)
            series = partial
    if series is not None:
        _write_csv(out / "observables.csv", header,
                   ((s, fmt(t), fmt(a), fmt(n), fmt(re), fmt(im), it, fmt(res))
                    for s, t, a, n, re, im, it, res in series.rows()))
        flagged = [k + 1 for k, ok in enumerate(series.step_converged) if not ok]
    if flagged and status == "ok":
        status = "best-effort"
        for w in caught:
            log.warning("%s", w.message)
    write_manifest(out, cfg, "tdse", status=status, failed_step=failed_step,
                   best_effort_steps=flagged, ground_energy=e0, snapshots=snaps,
                   n_steps=pcfg.n_steps)
    if series is not None and series.norm:
        _say(args, f"steps={pcfg.n_steps} final_norm={fmt(series.norm[-1])} "
                   f"median_iters={int(np.median(series.step_iterations or [0]))}")
    return EXIT_OK if status == "ok" else EXIT_NUMERICAL


COMMANDS = {"grid": cmd_grid, "tise": cmd_tise, "tdse": cmd_tdse}


def build_parser():
    ap = argparse.ArgumentParser(prog="sphdvr", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__name__.replace("cmd_", "run the ") + " stage")
        sp.add_argument("--config", required=True, help="TOML run configuration")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--best-effort", action="store_true",
                        help="downgrade solver non-convergence to a warning")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary lines")
    return ap


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load(args.config)
        if args.out is None:
            args.out = cfg.output.directory
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, UsageError, FileNotFoundError, IsADirectoryError) as exc:
        print(f"sphdvr: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverNotConverged, EigenSolverError, HamiltonianError, GridConstructionError,
            np.linalg.LinAlgError) as exc:
        print(f"sphdvr: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
