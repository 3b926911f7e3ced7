"""Exception hierarchy for the fairness audit harness.

Each error carries the process exit code the CLI reports for it.
"""

from typing import Optional


class CFairError(Exception):
    """Base class for all errors raised by cfair."""

    exit_code = 1


class ConfigurationError(CFairError):
    """Invalid configuration, flags or missing credentials."""

    exit_code = 2


class DataError(CFairError):
    """Problems with input data or persisted artifacts."""

    exit_code = 3


class IngestError(DataError):
    """A dataset file could not be read at all."""


class ReportError(DataError):
    """A run artifact needed for reporting is missing or empty."""


class TransportError(CFairError):
    """The completion backend could not be reached or kept failing."""

    exit_code = 4

    def __init__(self, message: str, status_code: Optional[int] = None):
        super().__init__(message)
        self.status_code = status_code


class RequestError(TransportError):
    """The backend rejected the request (4xx other than 429)."""


class DecodeError(TransportError):
    """The backend answered with a body that is not a chat completion."""


class StageError(CFairError):
    """A harness stage aborted; wraps the underlying error."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)
