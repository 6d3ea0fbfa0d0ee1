"""Exception types shared across the package."""


class OfsmpcError(Exception):
    """Base class for all package-specific errors."""


class ValidationError(OfsmpcError, ValueError):
    """Bad input: dimension mismatch, non-finite entries, broken invariant."""


class FactorizationError(OfsmpcError, ArithmeticError):
    """A matrix factorization failed (non-PD pivot, singular innovation)."""


class ConvergenceError(OfsmpcError, RuntimeError):
    """An iterative solver ran out of iterations."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class IterationLimitError(ConvergenceError):
    """QP solver hit its iteration cap. Distinct from infeasibility: callers
    must not count these runs as failures."""


class EmptySetError(OfsmpcError, RuntimeError):
    """A set operation produced an empty set where the pipeline needs a
    nonempty one. ``stage`` names the offending construction step."""

    def __init__(self, message, stage=None):
        super().__init__(message)
        self.stage = stage


class UnboundedError(OfsmpcError, RuntimeError):
    """A linear program was unbounded along the requested direction."""


class AssumptionError(OfsmpcError, RuntimeError):
    """A mathematical precondition of the requested bound does not hold."""
