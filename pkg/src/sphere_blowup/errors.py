"""Exception types shared across the toolkit."""


class SphereBlowupError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameter(SphereBlowupError, ValueError):
    """A parameter is outside its admissible range."""


class AntipodalPoint(SphereBlowupError, ValueError):
    """A stereographic chart was evaluated at (or too close to) the antipode
    of its base point."""


class CoincidentPoints(SphereBlowupError, ValueError):
    """Two configuration points coincide, so a pairwise quantity is singular."""


class QuadratureFailure(SphereBlowupError, RuntimeError):
    """Adaptive quadrature could not reach the requested tolerance."""


class NonFiniteValue(SphereBlowupError, FloatingPointError):
    """An integrand or field evaluation produced NaN or infinity."""


class NonConvergence(SphereBlowupError, RuntimeError):
    """An iterative method stopped without meeting its tolerance."""


class NewtonDiverged(NonConvergence):
    """Damped Newton could not decrease the residual."""


class JacobianSingular(SphereBlowupError, RuntimeError):
    """The Galerkin Jacobian is numerically singular."""


class NoInteriorMax(SphereBlowupError, RuntimeError):
    """The reduced energy has no interior maximum on the admissible bracket."""


class UsageError(SphereBlowupError, ValueError):
    """Command line arguments are inconsistent or incomplete."""
