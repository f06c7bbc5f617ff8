"""Exception and warning types raised across the package."""


class SaddleOTOCError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SaddleOTOCError, ValueError):
    pass


class MalformedTable(SaddleOTOCError, ValueError):
    """A coefficient table or polynomial file could not be parsed."""


class NonResonantMonomial(SaddleOTOCError, ValueError):
    """A monomial with alpha != beta carries a non-negligible coefficient."""


class ComplexResidue(SaddleOTOCError, ValueError):
    """A converted action coefficient is not real to within tolerance."""


class InfOverflow(SaddleOTOCError, OverflowError):
    pass


class DegenerateOrbit(SaddleOTOCError, ValueError):
    """Lambda * tau too small: the reaction trace diverges."""


class NoRoot(SaddleOTOCError):
    """Every Newton start diverged or ran out of iterations."""


class SingularJacobian(SaddleOTOCError):
    pass


class BelowSaddle(SaddleOTOCError, ValueError):
    pass


class DegenerateHessian(SaddleOTOCError):
    """Bordered Hessian is singular (orbit bifurcation)."""


class QuadratureNotConverged(SaddleOTOCError):
    pass


class ModeMismatch(SaddleOTOCError, ValueError):
    pass


class DepthOutOfRange(SaddleOTOCError, ValueError):
    pass


class InsufficientData(SaddleOTOCError, ValueError):
    pass


class IntegratorDiverged(SaddleOTOCError):
    pass


class GridTooSmall(SaddleOTOCError):
    """Probability reached the edge of the quantum grid."""


class EmptySumWarning(UserWarning):
    """No orbit contributed at one or more observation times."""
