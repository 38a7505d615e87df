from typing import Any, Optional


class HyperKSError(Exception):
    """Base class for every error raised by the numerical library."""


class InvalidParameterError(HyperKSError, ValueError):
    """A precondition of an operation was violated."""


class GridMismatchError(InvalidParameterError):
    """Fields living on different radial grids were combined."""


class BlowUpError(HyperKSError, RuntimeError):
    """
    Raised by the time stepper when a norm leaves the small-data regime.
    The steps taken so far and the offending norm are kept for diagnostics.
    """
    def __init__(self, message: str, step: int, norm: float, threshold: float):
        super().__init__(message)
        self.step = step
        self.norm = norm
        self.threshold = threshold


class ContractionError(HyperKSError, RuntimeError):
    """Picard iteration stopped contracting or left the ball B_rho."""
    def __init__(self, message: str, diagnostics: Optional[Any] = None):
        super().__init__(message)
        self.diagnostics = diagnostics


class CalibrationError(HyperKSError, RuntimeError):
    """No dispersive constants inside the search box certify the sweep."""
