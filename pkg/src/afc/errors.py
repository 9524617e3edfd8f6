"""Exception hierarchy shared by every module of the package."""


class AFCError(Exception):
    """Base class for all errors raised by :mod:`afc`."""


class DomainError(AFCError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class NonConvergenceError(AFCError, ArithmeticError):
    """An iterative method exhausted its iteration budget."""


class NumericOverflowError(AFCError, OverflowError):
    """An intermediate quantity left the range of double precision."""


class UnsupportedFamilyError(AFCError, ValueError):
    """The requested operation is not available for this family."""


class MomentExistenceError(AFCError, ValueError):
    """A required moment does not exist for the given shape parameters."""


class OutOfRangeError(AFCError, ValueError):
    """A target value cannot be attained by the model (e.g. rho below rho_min)."""


class CalibrationError(AFCError):
    """Copula latent correlation calibration failed."""


class MmeNotApplicable(AFCError):
    """No method-of-moments estimator exists for the family."""


class LomaxMomentCondition(MomentExistenceError):
    """Sample moments violate S1 > M1**2 and S2 > M2**2, so no Lomax MME exists."""


class NoRootError(AFCError):
    """A bracketed root solve could not bracket a sign change."""


class InsufficientDataError(AFCError, ValueError):
    """Too few observations for the requested statistic."""


class DensityBugError(AFCError, ArithmeticError):
    """A joint density evaluated negative for in-contract parameters."""


class ConfigError(AFCError, ValueError):
    """Inconsistent or invalid command-line configuration."""


class CsvFormatError(ConfigError):
    """A sample CSV file is malformed; the message carries the line number."""
