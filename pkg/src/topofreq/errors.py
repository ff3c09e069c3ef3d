"""Exception hierarchy shared by all modules."""


class TopofreqError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(TopofreqError, ValueError):
    pass


class DegenerateFieldError(TopofreqError, ValueError):
    """Raised when a field vector vanishes where a direction is required."""


class GapClosedError(DegenerateFieldError):
    """Raised when the two bands touch at a sampled momentum."""


class DegenerateEstimateError(TopofreqError, ValueError):
    """Raised when a tomographic estimate has no direction (zero Bloch vector)."""


class FitError(TopofreqError, RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CapabilityError(TopofreqError):
    """Raised when a request exceeds what the dense solvers support."""


class ConfigError(TopofreqError, ValueError):
    pass
