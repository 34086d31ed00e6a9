"""Exception types shared across the toolkit."""


class PtychoError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(PtychoError, ValueError):
    """Invalid optical geometry (non-positive length, bad window size)."""


class ShapeError(PtychoError, ValueError):
    """Array shape does not satisfy an operation's contract."""


class BoundsError(PtychoError, IndexError):
    """Crop box extends outside the canvas."""


class DegenerateInputError(PtychoError, ValueError):
    """Input carries no usable signal (all-zero field, flat crop)."""


class ParameterError(PtychoError, ValueError):
    """Configuration or algorithm parameter out of its valid range."""


class DataError(PtychoError, ValueError):
    """Measured data violates a physical precondition (e.g. negative intensity)."""


class PlanError(PtychoError, ValueError):
    """Scan plan cannot be realised (step/jitter would leave the canvas)."""


class DatasetIOError(PtychoError, IOError):
    """Dataset container on disk is missing, truncated or inconsistent."""


class BenchmarkRegression(PtychoError, AssertionError):
    """Timing harness detected the fast path losing to the reference path."""
