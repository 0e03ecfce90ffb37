"""Spectral-element solver for the one-electron Schroedinger equation in
spherical coordinates: mapped Gauss-Legendre-Lobatto radial grid, spherical
harmonic expansion, Crank-Nicolson propagation in the velocity gauge."""

__version__ = "0.1.0"

from .legendre_gll import (  # noqa: E402
    GllGrid,
    GridConstructionError,
    build_grid,
    cardinal_eval,
    legendre_eval,
    quadrature,
)
from .radial_map import MapKind, RadialMap, extra_potential, map_eval  # noqa: E402
from .angular import (  # noqa: E402
    AngularBasis,
    Axis,
    CouplingMatrices,
    build_couplings,
    channel_index,
    spherical_harmonic,
    z_couplings_closed_form,
)
from .tise import (  # noqa: E402
    EigenSolution,
    EigenSolverError,
    HamiltonianError,
    RadialOperatorSet,
    assemble_hamiltonian,
    build_operators,
    coulomb,
    softcore,
    solve_eigen,
    solve_radial,
    unscale_to_radial,
    zero_potential,
)
from .tdse import (  # noqa: E402
    BlockPreconditioner,
    PropagatorConfig,
    Pulse,
    SolverNotConverged,
    TdseSystem,
    apply_hamiltonian,
    bicgstab,
    build_preconditioner,
    cn_step,
    initial_state,
    observables,
    propagate,
    vector_potential,
)
from .config import ConfigError, RunConfig  # noqa: E402
