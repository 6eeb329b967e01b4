"""Singular forward self-similar profiles of the fast diffusion equation
u_t = div(grad(u^m / m)) in the very-fast range 0 < m < (n-2)/n, plus the
weighted-L1 machinery used to show that radial solutions trapped between two
rescaled profiles contract onto the self-similar orbit.

Public surface: parameter derivation (params), profile construction via a
contraction map (profile), origin/far-field expansions and the Kelvin-type
inversion (asymptotics), the superharmonic comparison weight (weight), the
radial evolution and its experiments (pde), shared numerics (numerics), the
exception taxonomy (errors), and the fdx console entry point (cli).
"""

from .errors import (
    BlowUpError,
    BoundViolationError,
    ConfigError,
    DegenerateError,
    ExtrapolationError,
    FastDiffError,
    GridMismatchError,
    InternalError,
    NewtonDivergence,
    NonContractionError,
    PositivityError,
    QuadratureError,
    RangeError,
    ResolutionError,
    SandwichViolationError,
    StiffnessError,
    ToleranceError,
)
from .params import (
    ExpansionConstants,
    FPConstants,
    ParamSet,
    derive_expansion_constants,
    derive_exponents,
    derive_fp_constants,
    derive_params,
)
from .numerics import (
    OdeTrajectory,
    Tolerances,
    cumulative_integral,
    deriv_uniform,
    fd_weights,
    integrate_ode,
    integrate_table,
    quad_adaptive,
)
from .profile import (
    Profile,
    TailSolution,
    continue_left,
    picard_solve,
    profile_interpolator,
    recover_profile,
    rescale_profile,
    solve_for_eta,
    tail_residual,
)
from .asymptotics import (
    ExpansionReport,
    InversionReport,
    SeriesReport,
    expansion_check,
    f_ode_residual,
    inversion_report,
    inversion_residual,
    origin_series_check,
    origin_series_report,
    wbar_ode_residual,
)
from .weight import (
    BumpSpec,
    WeightFunction,
    build_weight,
    eval_weight,
    weighted_l1_distance,
)
from .pde import (
    ContractionResult,
    ConvergenceResult,
    EvolveConfig,
    EvolveStats,
    RadialField,
    RescaledField,
    barenblatt,
    contraction_experiment,
    convergence_experiment,
    evolve,
    lambda_for_amplitude,
    log_grid,
    make_self_similar_field,
    power_bump_initial,
    random_sandwiched_pair,
    rescale_field,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # errors
    "FastDiffError", "ConfigError", "RangeError", "DegenerateError",
    "GridMismatchError", "QuadratureError", "StiffnessError", "BlowUpError",
    "ToleranceError", "ExtrapolationError", "ResolutionError",
    "NewtonDivergence", "InternalError", "NonContractionError",
    "BoundViolationError", "PositivityError", "SandwichViolationError",
    # params
    "ParamSet", "FPConstants", "ExpansionConstants", "derive_exponents",
    "derive_params", "derive_fp_constants", "derive_expansion_constants",
    # numerics
    "Tolerances", "OdeTrajectory", "integrate_ode", "quad_adaptive",
    "cumulative_integral", "integrate_table", "fd_weights", "deriv_uniform",
    # profile
    "TailSolution", "Profile", "picard_solve", "tail_residual",
    "continue_left", "recover_profile", "rescale_profile", "solve_for_eta",
    "profile_interpolator",
    # asymptotics
    "ExpansionReport", "InversionReport", "SeriesReport", "expansion_check",
    "wbar_ode_residual", "f_ode_residual", "inversion_report",
    "inversion_residual", "origin_series_report", "origin_series_check",
    # weight
    "BumpSpec", "WeightFunction", "build_weight", "eval_weight",
    "weighted_l1_distance",
    # pde
    "EvolveConfig", "EvolveStats", "RadialField", "RescaledField",
    "ContractionResult", "ConvergenceResult", "log_grid", "barenblatt",
    "make_self_similar_field", "evolve", "rescale_field",
    "power_bump_initial", "lambda_for_amplitude", "random_sandwiched_pair",
    "contraction_experiment", "convergence_experiment",
]
