"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, CapacityError and FitError -> 4.
"""


class SynthGraphError(Exception):
    """Base class for all package errors."""


class ConfigError(SynthGraphError):
    """Invalid or inconsistent pipeline configuration."""


class DataError(SynthGraphError):
    """Malformed or unusable input data."""


class CapacityError(SynthGraphError):
    """A requested edge count cannot fit the target grid."""


class FitError(SynthGraphError):
    """Model fitting failed on the given inputs."""
