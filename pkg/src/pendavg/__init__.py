"""Averaged bifurcation functions and Filippov verification for the
small-amplitude perturbed planar double pendulum.

Pipeline: reduce physical parameters, build the linear spectrum and the
Jordan frame, average the perturbation along an unperturbed orbit
family, certify simple zeros of the averaged pair, and verify each
prediction by event-driven integration with an ε²-scaling test on the
Poincaré residual.
"""

from .averaging import (
    BifurcationSystem,
    NewtonResult,
    ZeroCertificate,
    annulus_search,
    averaged_integrand,
    bifurcation_values,
    find_sign_changes,
    jacobian,
    malkin_average,
    newton_zero,
)
from .errors import (
    CrossingViolationError,
    DegenerateSlidingError,
    DomainError,
    IntegrationStallError,
    NoZeroError,
    NumericalError,
    PendavgError,
    QuadratureError,
    RefinementDegenerateError,
    ResonanceError,
    TangencyError,
)
from .filippov import (
    CrossingReport,
    EventRecord,
    Segment,
    SurfaceClassification,
    SwitchingSurface,
    Trajectory,
    classify,
    crossing_hypothesis_check,
    export_events_csv,
    export_trajectory_csv,
    integrate,
    integrate_field,
    integrate_regularized,
    require_transversal_crossings,
    sliding_field,
)
from .model import (
    JordanTransform,
    PhysicalParams,
    ReducedParams,
    SpectralData,
    fundamental_matrix,
    jordan_transform,
    linearization_matrix,
    monodromy_lower_block,
    nonlinear_accelerations,
    reduce_params,
    spectral_data,
    unperturbed_orbit,
)
from .perturbation import (
    BUILTIN_NAMES,
    LinearForm,
    PeriodicScalar,
    PerturbationSpec,
    builtin,
    common_period,
    eval_order1,
    eval_order1_regularized,
    perturbation_from_file,
    smooth_sign,
)
from .verify import (
    PoincareResult,
    PredictedOrbit,
    RefinementResult,
    SweepReport,
    epsilon_sweep,
    fit_exponent,
    full_nonlinear_check,
    orbit_from_amplitude,
    poincare_residual,
    predicted_initial_state,
    refine_periodic,
    to_physical_frame,
    to_reduced_frame,
)

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES",
    "BifurcationSystem",
    "CrossingReport",
    "CrossingViolationError",
    "DegenerateSlidingError",
    "DomainError",
    "EventRecord",
    "IntegrationStallError",
    "JordanTransform",
    "LinearForm",
    "NewtonResult",
    "NoZeroError",
    "NumericalError",
    "PendavgError",
    "PeriodicScalar",
    "PerturbationSpec",
    "PhysicalParams",
    "PoincareResult",
    "PredictedOrbit",
    "QuadratureError",
    "ReducedParams",
    "RefinementDegenerateError",
    "RefinementResult",
    "ResonanceError",
    "Segment",
    "SpectralData",
    "SurfaceClassification",
    "SweepReport",
    "SwitchingSurface",
    "TangencyError",
    "Trajectory",
    "ZeroCertificate",
    "annulus_search",
    "averaged_integrand",
    "bifurcation_values",
    "builtin",
    "classify",
    "common_period",
    "crossing_hypothesis_check",
    "epsilon_sweep",
    "eval_order1",
    "eval_order1_regularized",
    "export_events_csv",
    "export_trajectory_csv",
    "find_sign_changes",
    "fit_exponent",
    "full_nonlinear_check",
    "fundamental_matrix",
    "integrate",
    "integrate_field",
    "integrate_regularized",
    "jacobian",
    "jordan_transform",
    "linearization_matrix",
    "malkin_average",
    "monodromy_lower_block",
    "newton_zero",
    "nonlinear_accelerations",
    "orbit_from_amplitude",
    "perturbation_from_file",
    "poincare_residual",
    "predicted_initial_state",
    "reduce_params",
    "refine_periodic",
    "require_transversal_crossings",
    "sliding_field",
    "smooth_sign",
    "spectral_data",
    "to_physical_frame",
    "to_reduced_frame",
    "unperturbed_orbit",
]
