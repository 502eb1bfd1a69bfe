"""Exception taxonomy.

Errors are grouped so the command line tool can map them to stable exit
codes: bad input (parse/domain/shape) versus numerical failure
(truncation/quadrature/degeneracy).
"""


class SpreadchanError(Exception):
    """Base class for all library errors."""


class DimensionError(SpreadchanError, ValueError):
    """Fock-space dimension is not an integer >= 2."""


class DomainError(SpreadchanError, ValueError):
    """A parameter is outside the domain an operation supports."""


class ShapeError(SpreadchanError, ValueError):
    """Array arguments have incompatible shapes."""


class ParseError(SpreadchanError, ValueError):
    """A state/phase-distribution/range text form could not be parsed."""


class NumericError(SpreadchanError, RuntimeError):
    """A numeric routine produced non-finite or unusable values."""


class TruncationError(SpreadchanError, RuntimeError):
    """Tail leakage of a truncated representation exceeds the allowed bound."""


class QuadratureError(SpreadchanError, RuntimeError):
    """A quadrature rule failed its convergence check."""


class DegenerateFamilyError(SpreadchanError, RuntimeError):
    """The state family is degenerate at the requested point (no SLD information)."""
