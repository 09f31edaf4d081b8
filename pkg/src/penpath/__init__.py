"""Regularization paths of penalized M-estimators and their local limit processes."""

from .errors import (
    CostLimitError,
    GuardError,
    IndefiniteMatrixError,
    PenpathError,
    SolverError,
    UnsupportedModelError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "CostLimitError",
    "GuardError",
    "IndefiniteMatrixError",
    "PenpathError",
    "SolverError",
    "UnsupportedModelError",
    "ValidationError",
    "__version__",
]
