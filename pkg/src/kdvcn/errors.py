"""Exception types raised across the package."""


class KdvError(Exception):
    """Base class for all package errors."""


class DimensionError(KdvError, ValueError):
    """Grid functions live on incompatible grids, or a grid is too small."""


class ConfigurationError(KdvError, ValueError):
    """A parameter combination cannot be honoured."""


class DomainError(KdvError, ValueError):
    """An argument lies outside the domain of the operation."""


class InputError(KdvError, ValueError):
    """Sampled or parsed input is not usable (e.g. non-finite values)."""


class SolverFailure(KdvError, RuntimeError):
    """The linear solve missed its residual contract."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class NonConvergenceError(KdvError, RuntimeError):
    """The fixed-point iteration did not reach its tolerance.

    Usually a sign that the time step violates the CFL bound.
    """

    def __init__(self, message, increment, step_index=None, t=None):
        super().__init__(message)
        self.increment = increment
        self.step_index = step_index
        self.t = t


class ConsistencyError(KdvError, RuntimeError):
    """An internal postcondition (e.g. l2 conservation) was violated."""
