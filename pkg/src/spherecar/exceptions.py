"""Exception hierarchy shared by all modules."""


class SphereCarError(ValueError):
    """Base class for domain errors raised by the package."""


class SymmetryViolationError(SphereCarError):
    """A matrix expected to be skew-symmetric is not."""


class NotARotationError(SphereCarError):
    """A matrix fails the SO(3) orthonormality or determinant check."""


class NonUnitAxisError(SphereCarError):
    pass


class BranchError(SphereCarError):
    """Rotation angle too close to pi for the principal logarithm."""


class DimensionMismatchError(SphereCarError):
    pass


class SteeringSingularityError(SphereCarError):
    """Steering angle at or beyond +-pi/2."""


class PoleSingularityError(SphereCarError):
    """Heading frame undefined at the south pole."""


class ConstraintError(SphereCarError):
    """Position or velocity violates the sphere constraint."""


class SpeedZeroError(SphereCarError):
    pass


class DiscretizationError(SphereCarError):
    """Finite-difference step too coarse for the requested check."""


class AntipodalError(SphereCarError):
    """Error angles undefined for antipodal rear-axle positions."""


class SingularConfigurationError(SphereCarError):
    """Denominator of a feedback law vanishes outside its limit region."""


class InfeasibleSteeringError(SphereCarError):
    """No curvature within the saturation bounds solves the steering equation."""


class PlacementError(SphereCarError):
    pass


class OutOfRegimeError(SphereCarError):
    """Observer error left the local (near-identity) regime."""


class DivergenceError(OutOfRegimeError):
    """Closed-loop error left the region where the run is meaningful."""


class ReparametrizationError(SphereCarError):
    pass


class ConfigError(SphereCarError):
    """Invalid scenario configuration; ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message if field is None else f"{field}: {message}")
        self.field = field
