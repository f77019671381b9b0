"""Exception hierarchy shared by all modules."""


class FreeConcError(Exception):
    """Base class for library errors."""


class ShapeError(FreeConcError, ValueError):
    pass


class DomainError(FreeConcError, ValueError):
    pass


class NumericError(FreeConcError, ArithmeticError):
    pass


class ConvergenceError(NumericError):
    """Iterative solver stopped without meeting its tolerance."""

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ErgodicityError(DomainError):
    pass


class ConfigError(FreeConcError, ValueError):
    pass
