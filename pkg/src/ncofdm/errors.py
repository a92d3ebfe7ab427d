"""Exception types shared across the package."""


class NcofdmError(Exception):
    """Base class for all package-specific errors."""


class DimensionError(NcofdmError, ValueError):
    """Operand shapes are inconsistent."""


class SingularMatrixError(NcofdmError, ArithmeticError):
    """A linear system is numerically singular or too ill-conditioned."""

    def __init__(self, name: str, cond: float | None = None, detail: str = ""):
        self.name = name
        self.cond = cond
        msg = f"matrix {name!r} is numerically singular"
        if cond is not None:
            msg += f" (condition estimate {cond:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ConvergenceError(NcofdmError, ArithmeticError):
    """An iterative series or estimator failed to converge."""

    def __init__(self, msg: str, terms_used: int | None = None):
        self.terms_used = terms_used
        if terms_used is not None:
            msg += f" (terms used: {terms_used})"
        super().__init__(msg)


class DomainError(NcofdmError, ValueError):
    """An argument is outside the mathematical domain of the operation."""


class CaseMismatchError(DomainError):
    """Inputs violate the geometry of the requested analysis case."""


class ConfigError(NcofdmError, ValueError):
    """Invalid or inconsistent configuration."""


class EstimationError(NcofdmError, ValueError):
    """Channel or offset estimation cannot proceed on the given input."""
