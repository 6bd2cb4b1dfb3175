"""Mass-constrained ground states of the critical fractional NLS with a
power perturbation: thresholds, spectral operators, fiber geometry,
extremal profiles, solvers, and a verification CLI."""

from .params import (
    DerivedExponents,
    HProfile,
    NoPerturbation,
    ParamError,
    ProblemParams,
    ThresholdReport,
    ThresholdViolation,
    VarthetaMinimum,
    compute_thresholds,
    critical_exponent,
    derive_exponents,
    h_profile,
    interpolation_exponent,
    l2_critical_exponent,
    regime_classify,
    threshold_gap_factor,
    vartheta_minimum,
)
from .spectral import (
    AliasingRisk,
    DegenerateInput,
    Field,
    Grid,
    dilate,
    field_from_function,
    frac_laplacian,
    integral,
    inner,
    load_field,
    lp_norm,
    mass_sq,
    project_mass,
    rearrange_decreasing,
    refine_field,
    save_field,
    seminorm_sq,
)
from .functionals import (
    EnergyBreakdown,
    FiberCoefficients,
    constants_for,
    energy,
    estimate_gns_constant,
    estimate_sobolev_constant,
    fiber_coefficients,
    gradient,
    pohozaev,
)
from .fiber import (
    BranchUnavailable,
    FiberCriticalPoints,
    ManifoldClass,
    classify,
    critical_points,
    fiber_eval,
    project_to_pohozaev,
)
from .extremals import (
    BubbleSpec,
    NormalizedBubble,
    ScalingFit,
    bubble,
    cutoff_test_pair,
    default_eps_decade,
    fit_bubble_scale,
    normalized_bubble_u0,
    predicted_exponent,
    scaling_fit,
)
from .solvers import (
    CollapseDetected,
    ContinuationResult,
    GroundStateResult,
    LeftConfinementRegion,
    ProbeReport,
    SolverConfig,
    continuation_mu,
    gaussian_init,
    local_minimize_subcritical,
    minmax_groundstate,
    nonexistence_probe,
    suggest_box_subcritical,
)

__version__ = "0.1.0"
