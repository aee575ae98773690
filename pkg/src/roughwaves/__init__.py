"""Traveling-wave laboratory for nonlocal traffic flow across a speed-limit step.

Two conservation-law models share a discontinuous speed factor kappa(x):
one applies kappa at the observer ("M1", density averaged downstream),
one averages kappa(y) v(rho(y)) downstream ("M2").  The package classifies
asymptotic state pairs, constructs stationary profiles to certified nodal
residuals, and runs finite-volume experiments against them.
"""
from .errors import (
    AmbiguousCaseError,
    ArtifactError,
    AssumptionError,
    BlowupError,
    ConfigError,
    DomainError,
    FluxMismatchError,
    RoughwavesError,
    RootSolveError,
    SchemeError,
    SeedError,
    TraceError,
    WindowError,
)
from .model import (
    CaseTag,
    FluxLevelSet,
    Kernel,
    RoadCondition,
    VelocityModel,
    case_states,
    classify,
    flux,
    homogeneous_states,
    make_kernel,
    make_velocity,
    solve_flux_level,
    stagnation_point,
    validate_kernel,
    validate_velocity,
)
from .nonlocal_ops import (
    GridFunction,
    average_density,
    average_derivative,
    average_velocity_m2,
)
from .profile_m1 import (
    MarchReport,
    Profile,
    admissible_trace_range,
    build_homogeneous_profile,
    build_profile_family,
    build_unique_profile,
    build_unique_profile_a2,
    enforce_family_order,
    march_backward,
    residual,
)
from .profile_m2 import (
    KinkReport,
    build_profile_family_m2,
    build_unique_profile_m2,
    kink_certificate,
    march_backward_m2,
    residual_m2,
)
from .simulator import (
    ConvergenceDiagnostic,
    SimState,
    cfl_dt,
    interface_fluxes,
    persistence_metric,
    phi_map,
    phi_values,
    profile_initial,
    riemann_initial,
    run,
    step,
)

__all__ = [
    "AmbiguousCaseError",
    "ArtifactError",
    "AssumptionError",
    "BlowupError",
    "CaseTag",
    "ConfigError",
    "ConvergenceDiagnostic",
    "DomainError",
    "FluxLevelSet",
    "FluxMismatchError",
    "GridFunction",
    "Kernel",
    "KinkReport",
    "MarchReport",
    "Profile",
    "RoadCondition",
    "RootSolveError",
    "RoughwavesError",
    "SchemeError",
    "SeedError",
    "SimState",
    "TraceError",
    "VelocityModel",
    "WindowError",
    "admissible_trace_range",
    "average_density",
    "average_derivative",
    "average_velocity_m2",
    "build_homogeneous_profile",
    "build_profile_family",
    "build_profile_family_m2",
    "build_unique_profile",
    "build_unique_profile_a2",
    "build_unique_profile_m2",
    "case_states",
    "cfl_dt",
    "classify",
    "enforce_family_order",
    "flux",
    "homogeneous_states",
    "interface_fluxes",
    "kink_certificate",
    "make_kernel",
    "make_velocity",
    "march_backward",
    "march_backward_m2",
    "persistence_metric",
    "phi_map",
    "phi_values",
    "profile_initial",
    "residual",
    "residual_m2",
    "riemann_initial",
    "run",
    "solve_flux_level",
    "stagnation_point",
    "step",
    "validate_kernel",
    "validate_velocity",
]

__version__ = "0.1.0"
