"""Shared exception types."""


class ShapeError(ValueError):
    """Array shapes are inconsistent with the declared structure."""


class ConfigError(ValueError):
    """A configuration value is missing or out of range."""


class DataError(ValueError):
    """Input data violates a precondition (empty corpus, bad ids, ...)."""


class NumericsError(RuntimeError):
    """A computation produced non-finite values."""


class DecodeError(RuntimeError):
    """Decoding could not reach a final state."""


class ParseError(ValueError):
    """A file could not be parsed; message carries the location."""
