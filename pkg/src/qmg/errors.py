"""Exception hierarchy. The CLI maps these onto exit codes."""


class QMGError(Exception):
    """Base class for all package errors."""


class ValidationError(QMGError, ValueError):
    """Rejected input: bad parameters, malformed scenario, broken invariant."""


class NumericalError(QMGError, ArithmeticError):
    """A numerical procedure could not deliver its contract."""


class BracketError(NumericalError):
    """Root finder was handed an interval without a sign change."""


class TruncationError(NumericalError):
    """A truncated series or finite grid cannot meet the requested tolerance."""
