"""Exception hierarchy.

Each family maps onto one CLI exit code, so library callers can catch the
narrow class while the command-line front-end only needs the base classes.
"""


class KellyError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class InputError(KellyError, ValueError):
    """Malformed input: bad CSV rows, bad config values, bad leverage specs."""

    exit_code = 2


class NumericDomainError(KellyError, ValueError):
    """A numerically valid question with no valid answer."""

    exit_code = 3


class DimensionError(NumericDomainError):
    """Vector or matrix sizes disagree."""


class NotPositiveDefiniteError(NumericDomainError):
    """Cholesky factorization failed or the matrix is too badly conditioned.

    ``pivot`` is the 1-based index of the leading minor that failed, or
    ``None`` when factorization succeeded but the condition number was
    over the limit.
    """

    def __init__(self, message, pivot=None, condition=None):
        super().__init__(message)
        self.pivot = pivot
        self.condition = condition


class RuinError(NumericDomainError):
    """Every simulated or replayed capital path hit zero."""


class StorageError(KellyError, OSError):
    """Reading or writing an artifact failed."""

    exit_code = 4
