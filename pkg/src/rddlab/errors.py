"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Vector lengths passed to an operation do not match."""


class DomainError(ValueError):
    """Inputs lie outside the mathematical domain of an operation."""


class ConfigError(ValueError):
    """An experiment configuration failed validation."""


class IdxFormatError(ValueError):
    """An IDX file is malformed or has an unexpected magic number."""
