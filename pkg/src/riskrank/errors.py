"""Exception types shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 2,
DataError -> 3, DegenerateTrainingError -> 4.
"""


class RiskrankError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(RiskrankError):
    """Invalid or incomplete pipeline configuration."""


class DataError(RiskrankError):
    """Malformed input data (bad rows, broken references, schema gaps)."""


class DegenerateTrainingError(RiskrankError):
    """Training data cannot support the requested fit (e.g. single class)."""
