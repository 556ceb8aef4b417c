"""Exception hierarchy.

Every error carries a CLI exit code so the command-line layer can map
failures without inspecting messages.
"""


class DmpError(Exception):
    """Base class for all package errors."""

    exit_code = 1

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ValidationError(DmpError, ValueError):
    """Input violates a documented precondition (shape, sign, range)."""

    exit_code = 2


class NumericalError(DmpError, ArithmeticError):
    """A numerical routine failed: non-convergence, singular matrix, ill-posed solve."""

    exit_code = 3


class NotHurwitzError(NumericalError):
    def __init__(self, eigenvalue, message=None):
        self.eigenvalue = eigenvalue
        super().__init__(message or f"matrix is not Hurwitz: eigenvalue {eigenvalue!r} has real part >= threshold")


class InfeasibleError(DmpError):
    """No candidate model admits a feasible sampling time."""

    exit_code = 4
