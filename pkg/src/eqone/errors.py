class ConfigError(ValueError):
    """Invalid input parameters or configuration."""


class NumericError(ArithmeticError):
    """A computation produced a non-finite or otherwise unusable result."""
