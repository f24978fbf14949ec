"""Exception hierarchy shared by the library and the CLI exit-code mapping."""


class MtprefError(Exception):
    """Base class for all package errors."""


class SchemaError(MtprefError, ValueError):
    """A record is missing a field or has a field of the wrong type."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class RangeError(SchemaError):
    """A rating lies outside the range of its annotation scale."""


class ConflictError(SchemaError):
    """Two records share a key but disagree on content."""


class ConfigError(MtprefError, ValueError):
    pass


class ContractError(MtprefError, ValueError):
    """A function was called with arguments violating its preconditions."""


class AlignmentError(ContractError):
    pass


class NumericalError(MtprefError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, message, step=None, pair_ids=()):
        self.step = step
        self.pair_ids = list(pair_ids)
        super().__init__(message)
