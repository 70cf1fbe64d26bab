"""Exception types shared across the package.

Exit codes mirror the CLI contract: 2 input/parse, 3 numerical, 4 config.
"""


class NuqError(Exception):
    exit_code = 1


class InputError(NuqError):
    """Bad data: dimension mismatch, non-finite values, empty input."""

    exit_code = 2


class ParseError(InputError):
    """Malformed file. ``offset`` is the byte offset of the problem when known."""

    exit_code = 2

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(NuqError):
    """Computation cannot proceed (e.g. covariance not repairable)."""

    exit_code = 3


class ConfigError(NuqError):
    """Invalid configuration value or flag combination."""

    exit_code = 4
