"""Exception types raised by abr-ladder.

Input problems subclass ``ValueError`` so callers that only care about
"bad input" can keep catching that.
"""

from typing import Optional


class LadderOptimizerError(Exception):
    """Root of every error raised deliberately by this package."""


class EmptyInputError(LadderOptimizerError, ValueError):
    """Raised when an operation receives no usable input at all."""


class PreconditionError(LadderOptimizerError, ValueError):
    """Raised when arguments violate an operation's precondition."""


class CurveRangeError(LadderOptimizerError, ValueError):
    """Raised when a bitrate falls outside a curve's sampled range."""


class MissingLabelError(LadderOptimizerError, ValueError):
    """Raised when a curve has no sample carrying the requested label."""

    def __init__(self, label: str, resolution: int):
        super().__init__(f"No sample labelled {label!r} for resolution {resolution}p")
        self.label = label
        self.resolution = resolution


class MissingAnchorError(LadderOptimizerError, ValueError):
    """Raised when a baseline anchor resolution is absent from a chunk model."""


class InfeasibleProblemError(LadderOptimizerError):
    """Raised when no start reaches the delivered-quality floor."""


class MismatchedInputError(LadderOptimizerError, ValueError):
    """Raised when reports or ladders that must agree come from different inputs."""


class TraceFormatError(LadderOptimizerError, ValueError):
    """Raised when a trace file cannot be read as CSV or JSON lines."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
