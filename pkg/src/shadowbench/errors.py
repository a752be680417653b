"""Exception types shared across the package."""


class ShadowbenchError(Exception):
    """Base class for all package errors."""


class InputError(ShadowbenchError, ValueError):
    pass


class ExactOverflowError(ShadowbenchError, OverflowError):
    """Input exceeds the width for which exact integer arithmetic is promised."""


class ConvergenceError(ShadowbenchError, ArithmeticError):
    pass


class DegenerateSpanError(InputError):
    pass


class RankDeficiencyError(ShadowbenchError):
    pass


class BudgetError(ShadowbenchError):
    """Combinatorial or iteration budget exceeded."""


class UnsupportedFormError(InputError):
    pass


class UnboundedError(ShadowbenchError):
    def __init__(self, message, ray=None):
        super().__init__(message)
        self.ray = ray


class InfeasibleError(ShadowbenchError):
    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class PreconditionError(ShadowbenchError):
    pass


class ConfigError(ShadowbenchError):
    pass


class DegeneracyError(ShadowbenchError):
    """Feasible set is not pointed, or a walk revisited a basis."""
