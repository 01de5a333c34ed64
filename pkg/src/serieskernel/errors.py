"""Exception hierarchy shared by every module.

The CLI maps the three families below onto process exit codes.
"""


class SeriesKernelError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SeriesKernelError, ValueError):
    """Invalid parameters, grids or run configuration."""


class DataFormatError(SeriesKernelError, ValueError):
    """A data file or in-memory series violates the data model."""


class DimensionError(ConfigError):
    """Operands have incompatible shapes or channel counts."""


class NumericError(SeriesKernelError, ArithmeticError):
    """A numerical routine could not produce a trustworthy result."""


class SingularKernelError(NumericError):
    """A within-series Gram matrix stayed singular after jitter escalation."""


class RankError(NumericError):
    """A value matrix is rank deficient where full column rank is required."""


class SingularShiftError(NumericError):
    """A spectral solve was asked to invert a zero eigenvalue."""


class DegenerateProblemError(NumericError):
    """A training problem has no solution, e.g. a single class."""


class ConvergenceError(NumericError):
    """An iterative solver stopped before reaching its tolerance."""


class InsufficientSampleError(NumericError):
    """Too few samples for an unbiased estimate."""
