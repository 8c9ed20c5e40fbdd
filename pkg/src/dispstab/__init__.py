"""Solitary waves of nonlocal KdV, BBM and regularized Boussinesq equations and
their purely growing modes."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    BlowUpError,
    ConfigError,
    ConvergenceError,
    DegenerateError,
    DispStabError,
    DomainError,
    IndeterminateError,
    InputShapeError,
    InsufficientDataError,
    KernelAssumptionError,
    NumericalError,
    SymmetryError,
    TrackingError,
)
from .operators import DispersionSpec, Grid, ModelKind, Nonlinearity, make_symbol  # noqa: E402
from .profile import WaveProfile, continue_branch, solve_profile  # noqa: E402
from .linearized import (  # noqa: E402
    LinearizedReport,
    MomentumBranch,
    Verdict,
    criterion_verdict,
    linearize,
    momentum,
    momentum_branch,
    momentum_derivative,
)
from .growing import (  # noqa: E402
    GrowingModeResult,
    KLambdaTrace,
    NotFound,
    assemble_A_lambda,
    find_growing_mode,
    moving_kernel_limit,
    moving_kernel_prediction,
    track_k_lambda,
)
from .evolution import EvolutionState, evolve, initial_state, measure_growth_rate, step  # noqa: E402
from .direction import Bump, DirectionSpec, corrected_direction, direction_demo, norm_decay_curve  # noqa: E402

__all__ = [
    "__version__",
    "BlowUpError",
    "ConfigError",
    "ConvergenceError",
    "DegenerateError",
    "DispStabError",
    "DomainError",
    "IndeterminateError",
    "InputShapeError",
    "InsufficientDataError",
    "KernelAssumptionError",
    "NumericalError",
    "SymmetryError",
    "TrackingError",
    "DispersionSpec",
    "Grid",
    "ModelKind",
    "Nonlinearity",
    "make_symbol",
    "WaveProfile",
    "continue_branch",
    "solve_profile",
    "LinearizedReport",
    "MomentumBranch",
    "Verdict",
    "criterion_verdict",
    "linearize",
    "momentum",
    "momentum_branch",
    "momentum_derivative",
    "GrowingModeResult",
    "KLambdaTrace",
    "NotFound",
    "assemble_A_lambda",
    "find_growing_mode",
    "moving_kernel_limit",
    "moving_kernel_prediction",
    "track_k_lambda",
    "EvolutionState",
    "evolve",
    "initial_state",
    "measure_growth_rate",
    "step",
    "Bump",
    "DirectionSpec",
    "corrected_direction",
    "direction_demo",
    "norm_decay_curve",
]
