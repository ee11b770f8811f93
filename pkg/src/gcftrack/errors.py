"""Exception types shared across the package."""


class GcfTrackError(Exception):
    """Base class for all errors raised by this package."""


class InputError(GcfTrackError):
    """Unusable user input (bad file, bad config, inconsistent arguments)."""
