"""Exception types shared across the package."""


class GeomevalError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(GeomevalError):
    """A file does not conform to the tensor interchange or CSV format."""


class ParameterError(GeomevalError):
    """An argument is outside its documented domain."""


class DegenerateDataError(GeomevalError):
    """The input is too small or too uniform for the requested computation."""
