"""Numerical homogenization of mass-spring networks with weak long-range coupling.

The package builds cubic particle lattices with clamped boundaries,
couples them through a short-range pair law and a weak lattice-wide
family, integrates or transforms the resulting dynamics, extracts
effective elasticity tensors from penalized cell problems, and compares
everything against the continuum limit system on a grid.  ``cli`` and
``harness`` wrap these pieces into reproducible experiment runs.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, load_config, parse_config, parse_recipe
from .continuum import (
    ContinuumGrid,
    ContinuumProblem,
    LocalOperator,
    NonlocalOperator,
    isotropy_gate,
    simulate_continuum,
    solve_stationary_continuum,
)
from .dynamics import (
    InitialData,
    Trajectory,
    estimate_lambda_max,
    laplace_quadrature,
    simulate,
    solve_stationary,
    stability_dt,
)
from .errors import ConfigurationError, DomainError, ProbeError, SolverError
from .fields import (
    PiecewiseConstantField,
    SplineField,
    korn_constant,
    l2_difference,
    midpoint_grid,
)
from .interaction import (
    BondList,
    InteractionModel,
    KProfile,
    LongRangeSet,
    assemble_short_bonds,
)
from .kernels import (
    DENSITY_TESTS,
    PAIR_TESTS,
    EmpiricalKernel,
    LimitKernel,
    density_convergence_rows,
    kernel_convergence_rows,
)
from .lattice import (
    DomainBox,
    LatticeConfig,
    ParticleSystem,
    build_cubic_lattice,
    validate_triangulation,
)
from .meso import (
    MesoProbe,
    SymTensor4,
    closed_form_tensor,
    extract_tensor,
    lemma34_scaling_check,
    minimize_cell_functional,
    probe_tensor,
    tensor_limit_study,
)

__all__ = [
    "BondList",
    "ConfigurationError",
    "ContinuumGrid",
    "ContinuumProblem",
    "DENSITY_TESTS",
    "DomainBox",
    "DomainError",
    "EmpiricalKernel",
    "ExperimentConfig",
    "InitialData",
    "InteractionModel",
    "KProfile",
    "LatticeConfig",
    "LimitKernel",
    "LocalOperator",
    "LongRangeSet",
    "MesoProbe",
    "NonlocalOperator",
    "PAIR_TESTS",
    "ParticleSystem",
    "PiecewiseConstantField",
    "ProbeError",
    "SolverError",
    "SplineField",
    "SymTensor4",
    "Trajectory",
    "assemble_short_bonds",
    "build_cubic_lattice",
    "closed_form_tensor",
    "density_convergence_rows",
    "estimate_lambda_max",
    "extract_tensor",
    "isotropy_gate",
    "kernel_convergence_rows",
    "korn_constant",
    "l2_difference",
    "laplace_quadrature",
    "lemma34_scaling_check",
    "load_config",
    "midpoint_grid",
    "minimize_cell_functional",
    "parse_config",
    "parse_recipe",
    "probe_tensor",
    "simulate",
    "simulate_continuum",
    "solve_stationary",
    "solve_stationary_continuum",
    "stability_dt",
    "tensor_limit_study",
    "validate_triangulation",
]
