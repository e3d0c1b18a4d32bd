"""Exception hierarchy shared across the package.

The CLI maps these onto process exit codes (input 3, capacity 4,
numerical failure 5).
"""


class AnnealTrackError(Exception):
    """Base class for all package errors."""


class InputError(AnnealTrackError):
    """Malformed or out-of-contract input data."""


class ConfigurationError(AnnealTrackError):
    """A configuration value violates a validity guard (e.g. step size)."""


class CapacityError(AnnealTrackError):
    """Instance exceeds the configured size budget of a solver backend."""


class NumericalFailure(AnnealTrackError):
    """An integration or linear-algebra step produced an invalid result."""
