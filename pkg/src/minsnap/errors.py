"""Exception hierarchy shared by every minsnap module."""


class MinSnapError(Exception):
    """Base class for all library errors."""


class ValidationError(MinSnapError, ValueError):
    """Problem description is malformed or internally inconsistent."""


class GridError(ValidationError):
    """Knot vector is unusable (non-increasing, zero-width segment, ...)."""


class DomainError(MinSnapError, ValueError):
    """Evaluation point lies outside the spline's time domain."""


class IllPosedError(MinSnapError):
    """A reduced block failed to factor; the problem has no unique minimizer.

    ``segment`` is the 0-based index of the segment whose elimination step
    broke down, or ``None`` when the failure is not tied to one segment.
    """

    def __init__(self, message, segment=None):
        super().__init__(message)
        self.segment = segment


class ConditioningError(MinSnapError):
    """Dense oracle refused to work with a numerically singular basis matrix."""

    def __init__(self, message, kappa):
        super().__init__(message)
        self.kappa = kappa
