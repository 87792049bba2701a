"""Exception hierarchy shared by all modules."""


class SampleDensError(Exception):
    """Base class for library errors."""


class InvalidInputError(SampleDensError, ValueError):
    """Arguments violate a documented precondition."""


class UnsupportedError(SampleDensError, ValueError):
    """Requested variant exists mathematically but is not implemented."""


class UnsupportedDimensionError(UnsupportedError):
    pass


class ResourceLimitError(SampleDensError, RuntimeError):
    pass


class NumericalFailureError(SampleDensError, ArithmeticError):
    """Quadrature or simulation produced an unusable result."""


class ConfigError(SampleDensError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
