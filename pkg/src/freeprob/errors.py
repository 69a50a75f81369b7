"""Exception hierarchy shared by all modules."""


class FreeProbError(Exception):
    """Base class for all package errors."""


class MeasureError(FreeProbError, ValueError):
    """Malformed measure data (bad grid, bad atom, bad JSON)."""


class EvaluationError(FreeProbError, ArithmeticError):
    """An integrand or transform produced a non-finite value."""


class PoleError(EvaluationError):
    """A transform was evaluated on a singular point (support or atom)."""


class BranchError(FreeProbError):
    """A Cauchy-type function violated the sign rule Im z > 0 => Im G <= 0."""


class DomainError(FreeProbError, ValueError):
    """Argument outside the declared domain of an analytic handle."""


class InversionError(FreeProbError):
    """Newton inversion or fixed-point iteration did not converge."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = list(trace) if trace is not None else []


class ParameterError(FreeProbError, ValueError):
    """Family or theorem parameters outside the admissible set."""
