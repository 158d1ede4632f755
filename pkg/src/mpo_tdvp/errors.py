"""Exception hierarchy shared by all modules."""


class TensorNetworkError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(TensorNetworkError, ValueError):
    """Input violates a documented precondition (shape, finiteness, range)."""


class DegenerateInputError(TensorNetworkError, ValueError):
    """Input is structurally valid but degenerate, e.g. a zero-norm state."""


class CapacityError(TensorNetworkError):
    """A fixed capacity is exceeded (zero-padding room, dense-size cap)."""

    def __init__(self, message, bond=None):
        super().__init__(message)
        self.bond = bond


class KrylovConvergenceError(TensorNetworkError):
    """Krylov exponential did not reach its tolerance within the subspace cap.

    The best available estimate is kept in ``estimate``.
    """

    def __init__(self, message, estimate=None, error_estimate=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_estimate = error_estimate


class IntegratorError(TensorNetworkError):
    """A local step of the time integrator failed at a given site or bond."""

    def __init__(self, message, site=None):
        super().__init__(message)
        self.site = site
