"""Bivariate accelerated failure-time conditional (AFC) distributions."""

__version__ = "0.1.0"

from .families import FamilyKind, ModelParams, JointPoint  # noqa: E402
from .moments import MomentSummary, covariance, correlation, theoretical_moments  # noqa: E402
from .sampling import BivariateSample  # noqa: E402
from .estimation import FitResult, mle, mme, sample_moments  # noqa: E402

__all__ = [
    "__version__",
    "FamilyKind",
    "ModelParams",
    "JointPoint",
    "MomentSummary",
    "covariance",
    "correlation",
    "theoretical_moments",
    "BivariateSample",
    "FitResult",
    "mle",
    "mme",
    "sample_moments",
]
