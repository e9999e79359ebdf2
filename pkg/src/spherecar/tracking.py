"""Invariant tracking errors: the SE(2) group error and the orthodrome angles on SO(3)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._vec import columns, cross, dot, norm
from .exceptions import AntipodalError
from .lie import PlanarPose, exp_so3, se2_compose, se2_inverse

# below this central angle the misalignment angle is reported as zero
SIGMA_EPS = 1e-10
ANTIPODAL_EPS = 1e-8


@dataclass(frozen=True)
class SE2Error:
    heading: float
    position: tuple

    def as_pose(self):
        return PlanarPose(self.position[0], self.position[1], self.heading)


def se2_error(g, g_d):
    """Left-invariant error g_d^-1 g, as heading and position in the reference frame."""
    e = se2_compose(se2_inverse(g_d), g)
    return SE2Error(e.theta, (e.x, e.y))


@dataclass(frozen=True)
class ErrorAngles:
    """Central angle ``sigma`` of the orthodrome from y to y_d and its misalignment ``delta``.

    ``delta`` is the angle of the orthodrome's rotation axis, measured in the
    reference tangent plane from nu_d towards tau_d. ``delta == 0`` when the car
    sits behind the reference on its rear-axle great circle.
    """

    sigma: float
    delta: float


def _angles_from_columns(tau_d, nu_d, beta, beta_d):
    axis = cross(beta, beta_d)
    s = norm(axis)
    sigma = math.atan2(s, dot(beta, beta_d))
    if sigma > math.pi - ANTIPODAL_EPS:
        raise AntipodalError("rear-axle positions are antipodal; the orthodrome is undefined")
    if sigma <= SIGMA_EPS:
        return ErrorAngles(sigma, 0.0)
    return ErrorAngles(sigma, math.atan2(dot(axis, tau_d), dot(axis, nu_d)))


def error_angles(g, g_d):
    _, _, beta = columns(g)
    tau_d, nu_d, beta_d = columns(g_d)
    return _angles_from_columns(tau_d, nu_d, beta, beta_d)


def error_angles_invariance_check(g, g_d, h):
    """Deviations of (sigma, delta) under the left action of ``h`` on both arguments."""
    a = error_angles(g, g_d)
    b = error_angles(h @ g, h @ g_d)
    return abs(a.sigma - b.sigma), abs(math.remainder(a.delta - b.delta, 2.0 * math.pi))


def offset_configuration(g_d, sigma, delta, heading=0.0):
    """Configuration at error angles ``(sigma, delta)`` from ``g_d``.

    The reference frame is carried along the orthodrome and then turned by
    ``heading`` about the new position.
    """
    g_d = np.asarray(g_d, dtype=float)
    n = math.cos(delta) * g_d[:, 1] + math.sin(delta) * g_d[:, 0]
    g = exp_so3(n, -sigma) @ g_d
    return exp_so3(g[:, 2], heading) @ g
