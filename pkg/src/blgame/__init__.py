"""Selection-mutation games on finite metric strategy spaces.

Measures live in the dual of bounded Lipschitz functions (the flat norm);
the dynamics are integrated with a positivity-preserving Picard scheme.
"""

__version__ = "0.1.0"

from .bl import (
    BLFunction,
    DiscreteMeasure,
    MutationKernel,
    bl_norms,
    bullet,
    certify_kernel_lip,
    flat_distance,
    flat_norm,
    function_bullet,
    kernel_sup_norm,
    kernel_sup_norm_dist,
    make_pure_selection,
    make_smoothed_kernel,
    pair,
)
from .dynamics import GameState, Trajectory, evolve, step_picard, step_rk4, vector_field
from .errors import (
    BLGameError,
    BracketError,
    ConfigError,
    DimensionError,
    DomainError,
    LPError,
    MetricValidationError,
    StepFailure,
)
from .rates import (
    VitalRates,
    make_beverton_holt,
    make_logistic_a2,
    make_logistic_paper,
    make_ricker,
    truncate,
)
from .space import StrategySpace, build_explicit, build_grid, validate_metric

__all__ = [
    "BLFunction",
    "BLGameError",
    "BracketError",
    "ConfigError",
    "DimensionError",
    "DiscreteMeasure",
    "DomainError",
    "GameState",
    "LPError",
    "MetricValidationError",
    "MutationKernel",
    "StepFailure",
    "StrategySpace",
    "Trajectory",
    "VitalRates",
    "bl_norms",
    "build_explicit",
    "build_grid",
    "bullet",
    "certify_kernel_lip",
    "evolve",
    "flat_distance",
    "flat_norm",
    "function_bullet",
    "kernel_sup_norm",
    "kernel_sup_norm_dist",
    "make_beverton_holt",
    "make_logistic_a2",
    "make_logistic_paper",
    "make_pure_selection",
    "make_ricker",
    "make_smoothed_kernel",
    "pair",
    "step_picard",
    "step_rk4",
    "truncate",
    "validate_metric",
    "vector_field",
]
