"""Exception hierarchy shared by all modules."""


class PolyvarError(Exception):
    """Base class for model and numerical errors raised by polyvar."""


class InvalidVelocity(PolyvarError, ValueError):
    pass


class CapExceeded(PolyvarError):
    """A configured size cap (path count, field size, circuit count) was hit."""


class NotIrreducible(PolyvarError):
    """The shift action on the quotient space is not irreducible."""

    def __init__(self, message, pair=None):
        super().__init__(message)
        self.pair = pair


class NotPrimitive(PolyvarError):
    """The positivity pattern of a matrix is periodic."""

    def __init__(self, message, period=None):
        super().__init__(message)
        self.period = period


class ConvergenceError(PolyvarError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class OverflowGuardError(PolyvarError):
    """exp() of the requested potentials would overflow; use the log-domain path."""


class UnsupportedDistribution(PolyvarError, ValueError):
    pass


class DegeneracyWarning(UserWarning):
    """A circuit mean is within tolerance of the eigenvalue without being equal to it."""
