"""Exception hierarchy shared by every module."""


class CepfdaError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(CepfdaError, ValueError):
    pass


class DegenerateSpectrumError(CepfdaError, ArithmeticError):
    """A spectral ordinate is exactly zero, so its logarithm is undefined."""


class IllConditionedError(CepfdaError, ArithmeticError):
    """The pooled within-group covariance is numerically singular."""

    def __init__(self, message, ratio=None):
        super().__init__(message)
        self.ratio = ratio


class ParseError(CepfdaError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(CepfdaError, ValueError):
    pass


class UnsupportedVersionError(CepfdaError, ValueError):
    pass
