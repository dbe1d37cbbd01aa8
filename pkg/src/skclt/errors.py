"""Exception types shared across the package."""


class RegimeError(ValueError):
    """Parameters fall outside the high-temperature regime a formula needs."""


class EnumerationCapError(ValueError):
    """Exact enumeration was requested for a system above the size cap."""


class ConvergenceError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, last_iterate=None, residual=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.residual = residual


class SteinConsistencyError(RuntimeError):
    """A solved Stein function violates its guaranteed bounds (solver bug)."""
