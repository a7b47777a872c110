"""Exception hierarchy shared by every pytissue module."""

from enum import Enum
from typing import Optional


class TissueError(Exception):
    """Base exception for all pytissue errors."""
    pass


class ConfigError(TissueError):
    """Invalid configuration value, key or parameter combination."""

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SignalRangeError(ConfigError):
    """A signal id outside the compartment's signal array."""

    def __init__(self, signal_id: int, max_cytokines: int):
        super().__init__(
            f"signal id {signal_id} out of range (max_cytokines={max_cytokines})"
        )
        self.signal_id = signal_id
        self.max_cytokines = max_cytokines


class ProtocolErrorKind(str, Enum):
    """Kinds of malformed wire lines."""
    EMPTY = "empty"
    UNKNOWN_KIND = "unknown_kind"
    BAD_ARITY = "bad_arity"
    BAD_VALUE = "bad_value"
    BAD_ENCODING = "bad_encoding"
    UNEXPECTED = "unexpected"


class ProtocolError(TissueError):
    """A line that does not decode to a valid wire message.

    Attributes:
        kind: What was wrong with the line
        line: The offending bytes
    """

    def __init__(self, kind: ProtocolErrorKind, line: bytes, detail: str = ""):
        message = f"{kind.value}: {line!r}"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)
        self.kind = kind
        self.line = line


class RunFatalError(TissueError):
    """A failure that aborts a tissue run (callback, sink or probe failure)."""
    pass


class TraceParseError(TissueError):
    """Too many lines of an input trace could not be parsed."""

    def __init__(self, message: str, skipped: int = 0, total: int = 0):
        super().__init__(message)
        self.skipped = skipped
        self.total = total


class ReplayAbortedError(TissueError):
    """Replay stopped before every event was sent."""

    def __init__(self, message: str, unsent: int):
        super().__init__(f"{message} ({unsent} events unsent)")
        self.unsent = unsent


class SynthSpecError(TissueError):
    """Invalid synthetic dataset specification."""
    pass


class PlanError(TissueError):
    """Invalid experiment plan."""
    pass


class StartupError(TissueError):
    """The server could not start (for example the listen port is taken)."""
    pass


class ConnectError(TissueError):
    """A client could not reach the server after all connect attempts."""

    def __init__(self, message: str, last_error: Optional[BaseException] = None):
        super().__init__(message)
        self.last_error = last_error
