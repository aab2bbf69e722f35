class RigidityLabError(Exception):
    """Base class for errors raised by rigidity_lab."""


class DomainError(RigidityLabError, ValueError):
    """Invalid argument or point outside a metric's domain."""


class SolverError(RigidityLabError):
    """Two-point geodesic solver did not converge."""

    def __init__(self, message, best_residual=float("nan"), pair=None):
        super().__init__(message)
        self.best_residual = best_residual
        self.pair = pair


class InsufficientWindowError(RigidityLabError):
    """A point set window is too small for the requested truncation radius."""


class MethodError(RigidityLabError):
    """A numerical method's precondition failed (e.g. a conjugate point inside the range)."""


class InvalidMetricError(RigidityLabError, ValueError):
    """Distance data violates the metric axioms."""
