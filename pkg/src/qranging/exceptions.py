"""Exception hierarchy shared by the qranging modules."""


class QRangingError(Exception):
    """Base class for all library errors."""


class DomainError(QRangingError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class ConvergenceError(QRangingError, ArithmeticError):
    """An iterative computation failed to reach its tolerance.

    ``iterates`` holds the last values seen, most recent last.
    """

    def __init__(self, message, iterates=()):
        super().__init__(message)
        self.iterates = tuple(iterates)


class UndefinedAdvantageError(QRangingError, ZeroDivisionError):
    """The classical exponent vanishes, so the advantage ratio is undefined."""


class RuleMismatchError(QRangingError, ValueError):
    """A decision rule was applied to an outcome that cannot support it."""


class FeasibilityError(QRangingError, RuntimeError):
    """An exact enumeration would exceed its term budget."""

    def __init__(self, message, required_terms):
        super().__init__(message)
        self.required_terms = required_terms


class ConfigError(QRangingError, ValueError):
    """A sweep configuration failed validation."""


class ConfigConflictError(ConfigError):
    """A parameter is given by more than one source (axis and fixed)."""
