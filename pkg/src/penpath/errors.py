"""Exception types shared across penpath."""


class PenpathError(Exception):
    """Base class for all library errors."""


class ValidationError(PenpathError, ValueError):
    """Input violates a documented precondition."""


class GuardError(PenpathError, ArithmeticError):
    """A numerical guard tripped (e.g. Poisson natural parameter overflow)."""


class UnsupportedModelError(PenpathError, NotImplementedError):
    """No closed form is available for the requested (contrast, model) pair."""


class SolverError(PenpathError, RuntimeError):
    """A path solver failed to certify a solution.

    Attributes
    ----------
    residual : float or None
        Last optimality residual reached before giving up.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class CostLimitError(PenpathError):
    """A request exceeds a documented tractability bound (e.g. 2^p submodels with p > 15)."""


class IndefiniteMatrixError(PenpathError, ArithmeticError):
    """A matrix that must be (semi)definite has a negative (or too small) eigenvalue.

    Attributes
    ----------
    eigenvalue : float
        The offending eigenvalue.
    """

    def __init__(self, message, eigenvalue):
        super().__init__(message)
        self.eigenvalue = eigenvalue
