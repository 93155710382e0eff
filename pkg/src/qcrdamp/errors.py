"""Exception types shared across the package."""


class ParamsError(ValueError):
    """Invalid or incomplete device configuration.

    ``field`` names the offending configuration entry when there is one.
    """

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class QuadratureError(RuntimeError):
    """Adaptive quadrature failed to reach the requested tolerance."""

    def __init__(self, message, achieved_rtol):
        super().__init__(f"{message} (achieved relative error {achieved_rtol:.3g})")
        self.achieved_rtol = achieved_rtol


class NoCoolingError(ValueError):
    """Downward rate does not exceed the upward rate, so T_eff is undefined."""


class RangeError(ValueError):
    """A voltage fell outside a tabulated rate curve (no extrapolation)."""


class TraceFormatError(ValueError):
    """Base class for trace file problems."""


class MalformedTraceError(TraceFormatError):
    pass


class MissingSidecarError(TraceFormatError, FileNotFoundError):
    pass


class LengthMismatchError(TraceFormatError):
    pass


class NonMonotonicTimeError(TraceFormatError):
    pass


class InsufficientLinearRegionError(ValueError):
    """Too few points remain on the linear side of the flat-region split."""
