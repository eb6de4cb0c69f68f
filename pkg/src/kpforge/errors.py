"""Exception types shared across the package.

Each maps to a CLI exit code: usage errors exit 1, data errors exit 2,
numeric failures exit 3.
"""


class KpforgeError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(KpforgeError):
    """Invalid flags, config keys, or argument combinations."""

    exit_code = 1


class DataError(KpforgeError):
    """Missing or malformed input files or records."""

    exit_code = 2


class NumericError(KpforgeError):
    """Non-finite losses or other numeric breakdowns."""

    exit_code = 3
