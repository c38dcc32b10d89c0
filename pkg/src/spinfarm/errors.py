"""Exception hierarchy shared across the package.

The CLI maps ``SpinfarmError`` subclasses onto exit codes: input/usage
problems exit 1, runtime/protocol failures exit 2.
"""


class SpinfarmError(Exception):
    """Base class for all package errors."""


class ParseError(SpinfarmError, ValueError):
    """A file could not be parsed in its declared format."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(SpinfarmError, ValueError):
    """Input parsed fine but violates a domain invariant."""


class UsageError(SpinfarmError, ValueError):
    """An operation was called with arguments outside its contract."""


class ProtocolError(SpinfarmError):
    """A peer sent a message that violates the master-worker protocol."""


class StartupError(SpinfarmError):
    """The distributed run could not assemble its workers."""


class RunAborted(SpinfarmError):
    """A worker vanished before delivering its results.

    Attributes:
        worker_id: id of the worker that failed.
        unfinished: ranges assigned to that worker whose images were lost.
    """

    def __init__(self, worker_id, unfinished, reason=""):
        ranges = ", ".join(f"[{s},{e})" for s, e in unfinished) or "none"
        msg = f"worker {worker_id} disconnected before sending results; unfinished ranges: {ranges}"
        if reason:
            msg += f" ({reason})"
        super().__init__(msg)
        self.worker_id = worker_id
        self.unfinished = list(unfinished)
