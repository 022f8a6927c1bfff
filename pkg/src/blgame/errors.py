"""Exception hierarchy shared across the package."""


class BLGameError(Exception):
    """Base class for all package errors."""


class ConfigError(BLGameError, ValueError):
    """Invalid construction parameters or configuration values."""


class MetricValidationError(ConfigError):
    """A distance matrix fails one of the metric axioms."""


class DimensionError(BLGameError, ValueError):
    """Objects defined over different strategy spaces were combined."""


class LPError(BLGameError, RuntimeError):
    """The dense simplex solver failed (should not happen for flat-norm LPs)."""


class StepFailure(BLGameError, RuntimeError):
    """A time step could not be completed (Picard iteration did not converge)."""

    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class DomainError(BLGameError, ArithmeticError):
    """A quantity is undefined at the requested argument (e.g. division by D = 0)."""


class BracketError(BLGameError, ValueError):
    """Root bracket does not contain a sign change."""
