"""Exception types shared across the package."""


class Ris3dError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(Ris3dError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConvergenceError(Ris3dError, ArithmeticError):
    """Iterative scheme exhausted its budget above tolerance."""


class ColinearError(Ris3dError, ValueError):
    """Dipole pair is co-linear; the closed-form impedance does not apply."""


class OverlapError(Ris3dError, ValueError):
    """Co-linear dipole segments interpenetrate."""


class SingularMatrixError(Ris3dError, ArithmeticError):
    """Coupling matrix is singular or too ill-conditioned to invert."""


class ApproximationDomainError(Ris3dError, ValueError):
    """Perturbation too large for the series approximation to be valid."""


class PoleError(Ris3dError, ValueError):
    """Evaluation at a coordinate or map singularity."""


class GeometryError(Ris3dError, ValueError):
    """Requested layout cannot be realized without element overlap."""


class NoCrossingError(Ris3dError, ValueError):
    """Pattern cut never drops to the half-power level."""


class ParseError(Ris3dError, ValueError):
    """Malformed scenario configuration text."""


class ValidationError(Ris3dError, ValueError):
    """Scenario values violate a documented invariant."""
