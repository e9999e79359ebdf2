"""Kinematic car models on SE(2) and SO(3), invariant tracking control and a local invariant observer."""

from .controller import (
    ClosedLoopDiagnostics,
    ControllerGains,
    SingularityPolicy,
    closed_loop_rate,
    delta_rate,
    feedback,
    sigma_rate,
    speed_feedback,
    speed_feedback_rate,
    steering_feedback,
)
from .integrators import IntegratorConfig, integrate_trajectory, lie_euler_step, rkmk4_step
from .lie import PlanarPose, exp_so3, hat, lie_bracket, log_so3, se2_compose, se2_inverse, vee
from .models import (
    CarGeometry,
    config_from_position,
    effective_wheelbase,
    flat_parametrization,
    frames_from_curve,
    geodesic_curvature,
    spherical_body_velocity,
    spherical_rate,
)
from .observer import (
    ObserverGains,
    characteristic_polynomial,
    error_linearization,
    measurement_function,
    observation_error,
    observer_gain_values,
    observer_rate,
    place_poles,
)
from .reference import GreatCircle, LatitudeCircle, ReferenceSample
from .tracking import ErrorAngles, error_angles, se2_error
