"""Exception hierarchy."""


class OrdinalAAError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameterError(OrdinalAAError, ValueError):
    """A numeric parameter is out of its valid domain or has the wrong shape."""


class DataError(OrdinalAAError, ValueError):
    """Response data does not satisfy the ordinal-matrix contract."""


class ParseError(DataError):
    """A dataset file could not be parsed.

    ``row`` and ``column`` are 1-based positions in the file when known.
    """

    def __init__(self, message, row=None, column=None):
        location = []
        if row is not None:
            location.append(f"row {row}")
        if column is not None:
            location.append(f"column {column}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigurationError(OrdinalAAError, ValueError):
    """Solver, generator or experiment configuration is inconsistent."""


class FitFailureError(OrdinalAAError, RuntimeError):
    """Optimization produced non-finite values and could not be recovered."""


class ModelFileError(OrdinalAAError, ValueError):
    """A model file is truncated, corrupted or has an unsupported version."""
