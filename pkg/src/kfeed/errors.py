"""Exception types raised across the package."""


class KFeedError(Exception):
    """Base class for package errors."""


class ConfigurationError(KFeedError, ValueError):
    """Invalid experiment or model configuration."""


class CapacityError(KFeedError):
    """An exhaustive computation would exceed its size guard."""


class StateError(KFeedError):
    """An operation was called in a state where it is undefined."""


class NumericError(KFeedError, ArithmeticError):
    """A non-finite value appeared where a finite one is required."""


class GridParseError(KFeedError, ValueError):
    """Malformed ASCII grid map."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class SynthesisError(KFeedError):
    """Ground-truth weight synthesis failed its agreement check."""

    def __init__(self, message, agreement):
        self.agreement = agreement
        super().__init__(message)
