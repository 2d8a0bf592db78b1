"""Exception hierarchy shared by all nucheck modules."""


class NucheckError(Exception):
    """Base class for every error raised by the package."""


class DomainError(NucheckError, ValueError):
    """A point lies outside the domain where a quantity is defined."""


class ResolutionError(NucheckError):
    """A weight cannot be evaluated at the radius a computation requires."""


class InvalidWeightError(NucheckError, ValueError):
    """A weight fails the structural requirements of an operation."""


class PreconditionError(NucheckError, ValueError):
    """Inputs violate a documented precondition."""


class ConstructionError(NucheckError, ValueError):
    """An object cannot be built from the given parameters."""


class EvaluationError(NucheckError, ArithmeticError):
    """A numerical evaluation produced a non-finite value."""


class DivergenceError(NucheckError, ArithmeticError):
    """A truncated integral keeps growing as the radius tends to one."""


class InsufficientDataError(NucheckError, ValueError):
    """Too few samples to classify a sequence."""


class UnsupportedRepresentationError(NucheckError, TypeError):
    """An exact-arithmetic path was requested for a non-polynomial input."""


class UndefinedRatioError(NucheckError, ArithmeticError):
    """A ratio statistic has a zero denominator."""


class ParseError(NucheckError, ValueError):
    """Malformed scenario, weight or function specification."""

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = f"[{', '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class RefusalError(PreconditionError):
    """A construction is refused because its mathematical premise fails."""
