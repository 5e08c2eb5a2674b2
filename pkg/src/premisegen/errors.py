"""Exception taxonomy shared across the pipeline.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented exit contract: 2 usage, 3 data, 4 backend.
"""

from __future__ import annotations


class PremisegenError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 3


class UsageError(PremisegenError):
    """Caller invoked an operation with incompatible arguments."""

    exit_code = 2


class DataError(PremisegenError):
    """Input data is missing, unreadable, or structurally invalid."""

    exit_code = 3


class ValidationError(DataError):
    """A value violates a declared invariant."""


class BackendError(PremisegenError):
    """A generation or knowledge backend failed."""

    exit_code = 4

    def __init__(self, message: str, retryable: bool = False):
        super().__init__(message)
        self.retryable = retryable


class MissingInferenceError(BackendError):
    """The knowledge backend produced no beams for a required key."""

    def __init__(self, message: str):
        super().__init__(message, retryable=False)


class BackendLifecycleError(BackendError):
    """A backend was used before loading or after being closed."""


class TruncationError(BackendError):
    """The encoder input exceeds the backend's context window."""

    def __init__(self, length: int, limit: int):
        super().__init__(
            f"input of {length} tokens exceeds the backend limit of {limit}"
        )
        self.length = length
        self.limit = limit


class CoverageError(DataError):
    """A knowledge map does not cover every training pair."""


class UndefinedStatisticError(DataError):
    """A statistic is undefined for the given sample (e.g. all-zero differences)."""


class UndefinedAgreementError(DataError):
    """Agreement is undefined because expected disagreement is zero."""


class UnknownItemError(DataError):
    """A judgment referenced an item that is not part of the batch."""


class ConflictError(DataError):
    """A judgment conflicts with the store state (duplicate label, cap, serving)."""
