"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Input data or arguments violate a documented contract."""


class ParseError(ValidationError):
    """A data file could not be parsed; the message carries file and line."""


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""
