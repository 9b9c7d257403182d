"""Exception types shared across the package."""


class LrmError(Exception):
    """Base class for all package errors."""


class InvalidInputError(LrmError, ValueError):
    """Malformed data: wrong shapes, non-finite entries, bad masks."""


class InvalidParameterError(LrmError, ValueError):
    """A scalar parameter lies outside its admissible range."""


class ConfigurationError(LrmError, ValueError):
    """A required configuration field is missing or inconsistent."""


class DivergenceError(LrmError, RuntimeError):
    """An iterative solver produced a non-finite objective."""
