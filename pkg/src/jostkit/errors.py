"""Exception hierarchy shared by every module.

Each class carries an ``exit_code`` so the CLI can map failures onto its
documented exit statuses without a lookup table.
"""

from __future__ import annotations


class JostkitError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    def to_record(self) -> dict:
        return {"error": type(self).__name__, "message": str(self)}


# -- validation (exit 2) ------------------------------------------------------

class ValidationError(JostkitError, ValueError):
    exit_code = 2


class ParseError(ValidationError):
    def __init__(self, message: str, line: int | None = None, key: str | None = None):
        self.line = line
        self.key = key
        where = []
        if line is not None:
            where.append(f"line {line}")
        if key is not None:
            where.append(f"key '{key}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)

    def to_record(self) -> dict:
        rec = super().to_record()
        rec.update(line=self.line, key=self.key)
        return rec


class DomainViolation(ValidationError):
    """A test function is not numerically inside the operator domain."""

    def __init__(self, message: str, radius: float | None = None):
        self.radius = radius
        super().__init__(message)

    def to_record(self) -> dict:
        rec = super().to_record()
        rec["radius"] = self.radius
        return rec


class BranchPointError(ValidationError):
    pass


class TZeroRejected(ValidationError):
    pass


# -- numerical failures (exit 3) ----------------------------------------------

class NumericalError(JostkitError, ArithmeticError):
    exit_code = 3


class NonConvergence(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class DerivativeVanishes(NumericalError):
    pass


class TruncationFailure(NumericalError):
    pass


class AtPole(NumericalError):
    pass


class MultiplePole(NumericalError):
    pass


class NonResonantZero(NumericalError):
    """Zeros of J+ off the resonance half plane (bound states)."""

    def __init__(self, message: str, zeros=()):
        self.zeros = list(zeros)
        super().__init__(message)


class DegenerateEnergy(NumericalError):
    pass


# -- pole counting (exit 4) ---------------------------------------------------

class Inconclusive(JostkitError):
    exit_code = 4


class BoundaryZero(Inconclusive):
    pass
