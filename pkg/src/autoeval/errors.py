"""Exception hierarchy shared by every module in the package."""


class AutoEvalError(Exception):
    """Base class for all package errors."""


class InsufficientDataError(AutoEvalError, ValueError):
    pass


class ShapeError(AutoEvalError, ValueError):
    pass


class DegenerateInputError(AutoEvalError, ValueError):
    pass


class ParameterError(AutoEvalError, ValueError):
    pass


class NumericalError(AutoEvalError, ArithmeticError):
    pass


class TrainingError(NumericalError):
    """Loss became non-finite during optimisation."""


class FormatError(AutoEvalError, ValueError):
    """A binary or text artifact on disk is malformed."""


class ValidationError(FormatError):
    """A well-formed artifact violates a content invariant."""


class ConfigError(AutoEvalError, ValueError):
    pass
