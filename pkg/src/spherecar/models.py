"""Kinematic car models in the plane (SE(2)) and on the sphere (SO(3)).

On the sphere the configuration is a rotation ``g = (tau, nu, beta)``: tangent,
left normal and outward position direction of the rear-axle midpoint, so the
rear axle sits at ``y = rho * beta``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .exceptions import (
    ConstraintError,
    DiscretizationError,
    PoleSingularityError,
    SpeedZeroError,
    SteeringSingularityError,
)
from .integrators import IntegratorConfig, integrate_trajectory
from .lie import E3, PlanarPose, exp_so3, hat

ON_SPHERE_TOL = 1e-9

PlanarCarState = PlanarPose


@dataclass(frozen=True)
class CarGeometry:
    """Wheelbase ``l``, wheel radius ``r`` and sphere radius ``rho``."""

    l: float
    r: float
    rho: float

    def __post_init__(self):
        if not self.l > 0.0:
            raise ValueError("wheelbase l must be positive")
        if not self.r >= 0.0:
            raise ValueError("wheel radius r must be non-negative")
        if not self.rho > 0.0:
            raise ValueError("sphere radius rho must be positive")

    @property
    def central_angle(self):
        return self.l / (self.rho + self.r)

    @property
    def ell(self):
        """Effective wheelbase rho * sin(central angle)."""
        return self.rho * math.sin(self.central_angle)


def effective_wheelbase(geom):
    """Return ``(lambda, ell)`` for the car geometry."""
    return geom.central_angle, geom.ell


def _check_steering(phi):
    if not abs(phi) < 0.5 * math.pi or math.cos(phi) == 0.0:
        raise SteeringSingularityError(f"steering angle {phi!r} is at or beyond +-pi/2")


def planar_rate(state, v, phi, l):
    """Time derivative ``(x', y', theta')`` of the planar car."""
    _check_steering(phi)
    c, s = math.cos(state.theta), math.sin(state.theta)
    return np.array([v * c, v * s, v * math.tan(phi) / l])


def planar_arclength_rate(state, phi, l):
    """Arc-length derivative: unit tangent and curvature tan(phi)/l."""
    return planar_rate(state, 1.0, phi, l)


def planar_trajectory(state0, phi_of_s, l, s_grid):
    """Unit-speed planar trajectory sampled on ``s_grid``; rows are (x, y, theta)."""

    def rhs(s, x):
        return planar_rate(PlanarPose(*x), 1.0, phi_of_s(s), l)

    s_grid = np.asarray(s_grid, dtype=float)
    sol = solve_ivp(rhs, (s_grid[0], s_grid[-1]), [state0.x, state0.y, state0.theta],
                    method="DOP853", t_eval=s_grid, rtol=1e-13, atol=1e-15)
    return sol.y.T


def _unit_position(y, rho, tol):
    y = np.asarray(y, dtype=float)
    if abs(np.linalg.norm(y) - rho) > tol * max(1.0, rho):
        raise ConstraintError(f"position is off the sphere: |y| = {np.linalg.norm(y)!r}, rho = {rho!r}")
    return y / rho


def position_rotation(b):
    """Rotation carrying the north pole e3 to the unit vector ``b`` along the orthodrome."""
    axis = np.cross(E3, b)
    sn = np.linalg.norm(axis)
    if sn < 1e-12:
        if b[2] > 0.0:
            return np.eye(3)
        raise PoleSingularityError("heading frame undefined at the south pole")
    return exp_so3(axis / sn, math.acos(min(1.0, max(-1.0, b[2]))))


def config_from_position(y, theta, rho, tol=ON_SPHERE_TOL):
    """Configuration with rear axle at ``y`` and heading ``theta`` from the reference great circle."""
    b = _unit_position(y, rho, tol)
    return exp_so3(b / np.linalg.norm(b), theta) @ position_rotation(b)


def spherical_body_velocity(v, phi, geom):
    """Body rate (0, v/rho, v tan(phi)/ell) in rotation-vector coordinates."""
    _check_steering(phi)
    return np.array([0.0, v / geom.rho, v * math.tan(phi) / geom.ell])


def spherical_rate(g, v, phi, geom):
    """Left-invariant model g' = g X(w)."""
    return np.asarray(g) @ hat(spherical_body_velocity(v, phi, geom))


def arclength_rate(g, u, phi, geom):
    """Model in the reference arc length; ``u`` is the normalized speed v / v_d."""
    return spherical_rate(g, u, phi, geom)


def geodesic_curvature(phi, geom):
    _check_steering(phi)
    return math.tan(phi) / geom.ell


def steering_from_curvature(kappa_g, geom):
    return math.atan(geom.ell * kappa_g)


def frames_from_curve(y, ydot, rho, tol=1e-9):
    """Frame ``(tau, nu, beta)`` and speed of a curve point on the sphere."""
    b = _unit_position(y, rho, tol)
    ydot = np.asarray(ydot, dtype=float)
    v = float(np.linalg.norm(ydot))
    if v == 0.0:
        raise SpeedZeroError("frame undefined where the curve speed vanishes")
    tau = ydot / v
    if abs(tau @ b) > 1e-8:
        raise ConstraintError(f"velocity is not tangent to the sphere (<beta, tau> = {tau @ b:.3e})")
    tau = tau - (tau @ b) * b
    tau /= np.linalg.norm(tau)
    nu = np.cross(b, tau)
    return tau, nu, b, v


def config_from_frames(tau, nu, beta):
    return np.column_stack([tau, nu, beta])


@dataclass(frozen=True)
class FlatState:
    """Configuration and inputs recovered from the rear-axle curve."""

    g: np.ndarray
    v: float
    kappa_g: float
    phi: float


def flat_parametrization(y, ydot, yddot, geom):
    """Recover ``g``, speed, geodesic curvature and steering angle from y, y', y''.

    Derivatives may be taken in any regular parameter; the curvature is
    normalized by the speed so it refers to arc length.
    """
    tau, nu, beta, v = frames_from_curve(y, ydot, geom.rho)
    kappa_g = float(np.asarray(yddot, dtype=float) @ nu) / (v * v)
    return FlatState(config_from_frames(tau, nu, beta), v, kappa_g, steering_from_curvature(kappa_g, geom))


@dataclass(frozen=True)
class CurvatureCheck:
    kappa: np.ndarray
    kappa_g: np.ndarray
    residual: np.ndarray
    discretization: float


def curvature_split_check(y, step, rho, tol=1e-6):
    """Check kappa^2 = kappa_g^2 + rho^-2 on unit-speed samples ``y`` spaced ``step`` apart.

    Uses second-order central differences; values refer to interior samples
    ``y[2:-2]``. The discretization error is estimated by comparing the
    second-derivative stencils at ``step`` and ``2 * step``; if that estimate
    exceeds ``tol`` a :class:`DiscretizationError` is raised.
    """
    y = np.asarray(y, dtype=float)
    if len(y) < 5:
        raise ValueError("need at least five samples")
    h = float(step)
    d1 = (y[3:-1] - y[1:-3]) / (2.0 * h)
    d2 = (y[3:-1] - 2.0 * y[2:-2] + y[1:-3]) / (h * h)
    d2_coarse = (y[4:] - 2.0 * y[2:-2] + y[:-4]) / (4.0 * h * h)
    disc = float(np.max(np.linalg.norm(d2 - d2_coarse, axis=1)))
    if disc > tol:
        raise DiscretizationError(f"step {h:g} too coarse: second-derivative stencils differ by {disc:.3e}")
    nu = np.cross(y[2:-2] / rho, d1)
    nu /= np.linalg.norm(nu, axis=1)[:, None]
    kappa = np.linalg.norm(d2, axis=1)
    kappa_g = np.einsum("ij,ij->i", d2, nu)
    return CurvatureCheck(kappa, kappa_g, np.abs(kappa**2 - kappa_g**2 - rho**-2), disc)


def spherical_open_loop(g0, speed, steering, geom, s_grid, config=IntegratorConfig()):
    """Integrate the sphere model under inputs ``speed(s)`` and ``steering(s)``."""
    rho, ell = geom.rho, geom.ell

    def rate(s, g):
        v, phi = speed(s), steering(s)
        _check_steering(phi)
        return (0.0, v / rho, v * math.tan(phi) / ell)

    return integrate_trajectory(g0, rate, s_grid, config)


def chart_coordinates(y, rho):
    """Azimuthal equidistant chart about the north pole (great-circle distance and bearing)."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    horiz = np.linalg.norm(y[:, :2], axis=1)
    dist = rho * np.arctan2(horiz, y[:, 2])
    scale = np.divide(dist, horiz, out=np.ones_like(dist), where=horiz > 0.0)
    return y[:, :2] * scale[:, None]
