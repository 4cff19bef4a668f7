"""Exception types shared across the package.

The CLI maps these onto process exit codes; library users can catch them
individually.
"""


class FreqMoEError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(FreqMoEError, ValueError):
    """An argument violates an operation's preconditions (shape, range, length)."""


class ConfigError(FreqMoEError, ValueError):
    """A run configuration is malformed, off-grid, or internally inconsistent."""


class DataError(FreqMoEError, ValueError):
    """A dataset file could not be parsed into a clean numeric table."""


class CheckpointError(FreqMoEError, ValueError):
    """A checkpoint file is corrupt or incompatible with the requested use."""
