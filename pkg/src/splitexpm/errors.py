"""Exception types raised by splitexpm."""


class SplitExpmError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(SplitExpmError, ValueError):
    pass


class SingularMatrixError(SplitExpmError, ArithmeticError):
    """Raised when a linear solve meets a (numerically) singular matrix."""


class UnsupportedStructureError(SplitExpmError):
    """The structured operator has no cheap path for the requested operation."""


class UnknownToleranceError(SplitExpmError, KeyError):
    pass


class UnknownSchemeError(SplitExpmError, KeyError):
    pass


class NoFeasibleScalingError(SplitExpmError):
    pass


class IllConditionedFitError(SplitExpmError):
    """A log-log regression was too noisy to report a slope."""
