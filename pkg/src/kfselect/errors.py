"""Exception hierarchy shared across the package."""


class KFSelectError(Exception):
    """Base class for all package errors."""


class DimensionError(KFSelectError, ValueError):
    pass


class NumericalError(KFSelectError, ArithmeticError):
    pass


class SingularityError(NumericalError):
    def __init__(self, message, lambda_min=None):
        super().__init__(message)
        self.lambda_min = lambda_min


class ConvergenceError(NumericalError):
    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class ConfigurationError(KFSelectError, ValueError):
    pass


class SizeError(ConfigurationError):
    """Raised when a request would exceed a configured enumeration or memory cap."""

    def __init__(self, message, cap=None):
        super().__init__(message)
        self.cap = cap


class SystemFormatError(KFSelectError, ValueError):
    """Malformed system document; ``field`` names the offending JSON path."""

    def __init__(self, message, field=None):
        super().__init__(f"{field}: {message}" if field else message)
        self.field = field


class DomainError(NumericalError, ValueError):
    pass
