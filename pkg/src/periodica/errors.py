"""Exception types. Each carries a short machine-readable ``kind``."""

from __future__ import annotations


class PeriodicaError(Exception):
    kind = "error"
    exit_code = 2


class InputError(PeriodicaError, ValueError):
    kind = "input"
    exit_code = 2


class DegenerateLatticeError(InputError):
    kind = "degenerate lattice"


class InexactError(InputError):
    """Raised when an operation that certifies needs exact rational data."""

    kind = "inexact"


class PreconditionError(PeriodicaError, ValueError):
    """A mathematical precondition does not hold (not critical, not 2-periodic, ...)."""

    kind = "precondition"
    exit_code = 3


class NotDifferenceVectorError(PreconditionError):
    kind = "not a difference vector"


class NotTwoPeriodicError(PreconditionError):
    kind = "not 2-periodic"


class InvariantTheoryError(PreconditionError):
    kind = "invariant theory inapplicable"


class InsufficientDataError(PreconditionError):
    kind = "insufficient data"


class ToleranceError(PeriodicaError, RuntimeError):
    kind = "tol unreachable"
    exit_code = 4


class AmbiguousShellError(PeriodicaError, RuntimeError):
    kind = "ambiguous shell binning"
    exit_code = 4
