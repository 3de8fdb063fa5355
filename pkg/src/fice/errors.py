"""Exception hierarchy shared across the pipeline.

Exit-code mapping lives in the CLI: UsageError -> 1, DataError -> 2,
NetworkError -> 3.
"""


class FiceError(Exception):
    """Base class for all errors raised by this package."""


class UsageError(FiceError):
    """Bad invocation: unknown flags, invalid config values, missing paths."""


class DataError(FiceError):
    """Malformed or inconsistent input data."""


class NetworkError(FiceError):
    """Unrecoverable failure while talking to the citations API."""


class FitError(FiceError):
    """Curve optimization failed (non-finite loss, bad configuration)."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message)
        self.epoch = epoch


class PathologicalFitError(FitError):
    """Fitted curve never decays below one document within the scan cap."""
