"""Exception types shared across the package."""


class FloquetHarrisError(Exception):
    """Base class for all package errors."""


class GridMismatchError(FloquetHarrisError, ValueError):
    """Two objects live on different grids or have incompatible shapes."""


class TimeOrderError(FloquetHarrisError, ValueError):
    """A time interval is reversed or two propagators do not chain."""


class CFLViolationError(FloquetHarrisError, ValueError):
    """A requested explicit step exceeds the stability bound of the model."""


class NumericalFailure(FloquetHarrisError, RuntimeError):
    """Non-finite values, a failed positivity guard, or a broken contraction."""


class ConvergenceError(NumericalFailure):
    """An iteration hit its cap before reaching tolerance."""


class ModelShapeError(FloquetHarrisError, ValueError):
    """The model does not have the structure an operation requires."""
