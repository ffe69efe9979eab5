"""Exception types shared across the package."""


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class DomainError(ValueError):
    """A value lies outside its admissible range (e.g. a probability > 1)."""


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


class DataError(ValueError):
    """Malformed or incomplete data (files, records, metric tables)."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
