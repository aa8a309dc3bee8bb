"""Dimension theory of self-affine sets and their linear projections."""

__version__ = "0.1.0"

from .errors import (
    BudgetError,
    ConfigError,
    DomainError,
    EstimationError,
    NumericalError,
    PreconditionError,
    SelfAffineError,
    ShapeError,
)
from .maps import AffineIFS, MatrixTuple
from .pressure import (
    affinity_dimension,
    kappa_estimate,
    kron_projected_bound,
    level_pressure,
    pressure_at_one_lower,
    pressure_at_two_upper,
    projected_exponent,
    quasimult_check,
    svf,
)

__all__ = [
    "AffineIFS",
    "BudgetError",
    "ConfigError",
    "DomainError",
    "EstimationError",
    "MatrixTuple",
    "NumericalError",
    "PreconditionError",
    "SelfAffineError",
    "ShapeError",
    "affinity_dimension",
    "kappa_estimate",
    "kron_projected_bound",
    "level_pressure",
    "pressure_at_one_lower",
    "pressure_at_two_upper",
    "projected_exponent",
    "quasimult_check",
    "svf",
]
