"""Error types shared across the solver."""


class HCSolveError(Exception):
    """Base class for all solver errors."""

    exit_code = 5


class DomainError(HCSolveError, ValueError):
    """Argument outside the mathematical domain of a function."""


class AccuracyError(HCSolveError, ArithmeticError):
    """A series or convergence loop did not reach its tolerance.

    Attributes
    ----------
    estimate : float or ndarray
        Last partial result before giving up.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class CapabilityError(HCSolveError, ValueError):
    """Requested size exceeds what the routine supports."""


class CapacityError(HCSolveError):
    """Index set larger than the configured budget."""

    exit_code = 4


class DataError(HCSolveError, ValueError):
    """Non-finite sample or coefficient."""


class UnsupportedError(HCSolveError, NotImplementedError):
    """Configuration not supported by this implementation."""


class ConfigError(HCSolveError, ValueError):
    """Invalid run configuration."""

    exit_code = 2


class NewtonError(HCSolveError, ArithmeticError):
    """Newton iteration failed to converge within an implicit step."""

    exit_code = 3

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual
