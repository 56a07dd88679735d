"""Exception types shared across the package.

Every error raised on a contract violation derives from ``ShiftpartError`` so
callers can distinguish our failures from stray library exceptions.
"""

from __future__ import annotations


class ShiftpartError(Exception):
    """Base class for all package-specific errors."""


class InvalidArgumentError(ShiftpartError, ValueError):
    """An argument violates a documented precondition (shape, range, count)."""


class DimensionMismatchError(InvalidArgumentError):
    """Point or target dimension does not match the cost specification."""


class UnsupportedCostError(ShiftpartError, ValueError):
    """Operation is undefined for this exponent (e.g. gradients at p=1, p=inf)."""


class SingularPointError(ShiftpartError, ValueError):
    """Gradient requested at a point where the cost is not differentiable (x == y)."""


class SizeGuardError(ShiftpartError, RuntimeError):
    """A problem exceeds the explicit size guard of an exact method."""


class ConvergenceFailureError(ShiftpartError, RuntimeError):
    """Iterative solve exhausted its budget with residual above tolerance.

    Carries the best iterate found so the caller can still inspect or
    report it.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class AscentMonotonicityError(ShiftpartError, RuntimeError):
    """Fixed-damping ascent observed a decreasing dual value (diagnostic abort)."""


class InstanceFormatError(ShiftpartError, ValueError):
    """Instance file is malformed.  Message carries a section/field address."""

    def __init__(self, message: str, *, field: str | None = None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
