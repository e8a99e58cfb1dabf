"""Exception types raised by the numerical kernels."""


class BesselRangeError(ValueError):
    """Order or argument outside the supported range of the Bessel kernels."""


class SingularityError(ZeroDivisionError):
    """Evaluation at a singular point (e.g. a Hankel function at z = 0)."""


class NoFinitePermittivityError(ValueError):
    """A perfect conductor has no finite permittivity; use the PEC T-matrix."""


class PoisonedIntegrandError(FloatingPointError):
    """The integrand returned a non-finite value.

    Attributes
    ----------
    location : float
        Abscissa of the first offending sample.
    """

    def __init__(self, location, message=None):
        self.location = location
        super().__init__(message or f"non-finite integrand value at x = {location!r}")


class ConvergenceError(RuntimeError):
    """A sum or integral did not converge within its caps.

    Attributes
    ----------
    partial : object
        Best available estimate at the point of failure.
    """

    def __init__(self, message, partial=None):
        self.partial = partial
        super().__init__(message)


class RegimeError(ValueError):
    """No solution exists in the requested bracket or regime."""
