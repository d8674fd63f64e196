"""Exception types raised across the package."""


class ConavError(Exception):
    """Base class for all package errors."""


class GeometryError(ConavError, ValueError):
    """Invalid obstacle definition or non-finite geometric input."""


class DegenerateGradientError(ConavError, ArithmeticError):
    """A distance gradient was requested at a non-differentiable point.

    ``subgradient`` holds the element of the subdifferential that would have
    been used, so callers that accept a subgradient can recover it.
    """

    def __init__(self, message, subgradient=None):
        super().__init__(message)
        self.subgradient = subgradient


class ModelError(ConavError, TypeError):
    """State/control variant does not match the dynamics model."""


class InfeasibleTaskError(ConavError, ValueError):
    """A start or goal lies inside an obstacle (or overlaps another agent)."""


class SingularKKTError(ConavError, ArithmeticError):
    """The KKT Jacobian stayed singular after the damping cap."""

    def __init__(self, message, constraints=()):
        super().__init__(message)
        self.constraints = tuple(constraints)


class ConfigError(ConavError, ValueError):
    """A scenario or run configuration failed validation."""
