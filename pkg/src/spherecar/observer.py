"""Local left-invariant observer on SO(3) driven by the rear-axle position.

The estimate follows a copy of the arc-length model with u = 1 plus an
invariant error injection built from B = ghat^T y / rho. Writing the
observation error g_e = g^T ghat = exp(hat(xi)), the first-order error flow is
xi' = A xi with A from :func:`error_linearization`; with the scheduling
l21 = -l12 = kappa_g the matrix no longer depends on kappa_g and its
characteristic polynomial is placed by three gains l11, l22, l31.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .exceptions import ConstraintError, OutOfRegimeError, PlacementError
from .integrators import IntegratorConfig, dexpinv, integrate_trajectory
from ._vec import columns, dot, norm
from .lie import exp3, exp_vec, hat, log_so3

MEASUREMENT_TOL = 1e-9
# error angles closer than this to pi are outside the local regime
REGIME_TOL = 1e-6


@dataclass(frozen=True)
class ObserverGains:
    """Injection gains l_ij; with ``scheduled`` set, l21 = -l12 = kappa_g at run time."""

    l11: float = 0.0
    l22: float = 0.0
    l31: float = 0.0
    l32: float = 0.0
    l12: float = 0.0
    l21: float = 0.0
    scheduled: bool = True

    def at(self, kappa_g):
        """Gains in effect at curvature ``kappa_g``."""
        if not self.scheduled:
            return self
        return replace(self, l12=-kappa_g, l21=kappa_g)

    def matrix(self, kappa_g=0.0):
        """3x2 array of (l_i1, l_i2)."""
        g = self.at(kappa_g)
        return np.array([[g.l11, g.l12], [g.l21, g.l22], [g.l31, g.l32]])

    def as_dict(self):
        return {"l11": self.l11, "l12": self.l12, "l21": self.l21, "l22": self.l22,
                "l31": self.l31, "l32": self.l32, "scheduled": self.scheduled}


def measurement_function(g_hat, y, rho, tol=MEASUREMENT_TOL):
    """B = ghat^T beta with beta = y / rho; equals e3 when the estimate is exact."""
    y = np.asarray(y, dtype=float)
    r = float(np.linalg.norm(y))
    if abs(r - rho) > tol * max(1.0, rho):
        raise ConstraintError(f"measurement is off the sphere: |y| = {r!r}, rho = {rho!r}")
    return np.asarray(g_hat, dtype=float).T @ (y / rho)


def _injection(b1, b2, gains, kappa_g):
    l12, l21 = (-kappa_g, kappa_g) if gains.scheduled else (gains.l12, gains.l21)
    return (gains.l11 * b2 - l12 * b1, l21 * b2 - gains.l22 * b1, gains.l31 * b2 - gains.l32 * b1)


def observer_gain_values(B, gains, kappa_g=0.0):
    """Injection L_i = l_i1 <B, e2> - l_i2 <B, e1>.

    In the estimate's own frame ghat^T nu_hat = e2 and ghat^T tau_hat = e1, so
    only the first two components of ``B`` enter.
    """
    return np.array(_injection(float(B[0]), float(B[1]), gains, kappa_g))


def observer_body_rate(g_hat, y, kappa_g, rho, gains, speed=1.0):
    """Body rate of the estimate: model copy plus injection.

    ``speed`` rescales to another independent variable (e.g. the reference arc
    length when the car runs at normalized speed u); the injection is scaled by
    its magnitude so that reversing does not reverse the error correction.
    """
    y = tuple(y)
    r = norm(y)
    if abs(r - rho) > MEASUREMENT_TOL * max(1.0, rho):
        raise ConstraintError(f"measurement is off the sphere: |y| = {r!r}, rho = {rho!r}")
    tau, nu, _ = columns(g_hat)
    L = _injection(dot(tau, y) / rho, dot(nu, y) / rho, gains, kappa_g)
    a = abs(speed)
    return (a * L[0], speed / rho + a * L[1], speed * kappa_g + a * L[2])


def observer_rate(g_hat, y, kappa_g, geom, gains):
    """ghat' = ghat (hat((0, 1/rho, kappa_g)) + sum L_i hat(e_i))."""
    return np.asarray(g_hat, dtype=float) @ hat(np.array(observer_body_rate(g_hat, y, kappa_g, geom.rho, gains)))


def error_linearization(kappa_g, rho, gains):
    """First-order error matrix A with xi' = A xi."""
    g = gains.at(kappa_g)
    return np.array([
        [g.l11, g.l12 + kappa_g, -1.0 / rho],
        [g.l21 - kappa_g, g.l22, 0.0],
        [g.l31 + 1.0 / rho, g.l32, 0.0],
    ])


def error_flow(xi, kappa_g, rho, gains):
    """Nonlinear rate of the error coordinates xi, g^T ghat = exp(hat(xi)).

    Evaluated with the truth at the identity (the flow is left-invariant, so
    the truth's own position does not matter) and u = 1.
    """
    g_e = exp_vec(np.asarray(xi, dtype=float))
    w = np.array([0.0, 1.0 / rho, kappa_g])
    w_hat = np.array(observer_body_rate(g_e, (0.0, 0.0, rho), kappa_g, rho, gains))
    # g_e' = g_e hat(w_hat) - hat(w) g_e, left-trivialized
    body = w_hat - g_e.T @ w
    return dexpinv(np.asarray(xi, dtype=float), body)


def characteristic_polynomial(gains, rho):
    """Coefficients ``(a2, a1, a0)`` of lambda^3 + a2 lambda^2 + a1 lambda + a0 for scheduled gains."""
    l11, l22, l31 = gains.l11, gains.l22, gains.l31
    a2 = -(l11 + l22)
    a1 = (l31 * rho + rho**2 * l11 * l22 + 1.0) / rho**2
    a0 = -(l22 / rho**2 + l31 * l22 / rho)
    return a2, a1, a0


def _validate_poles(poles):
    poles = [complex(p) for p in poles]
    if len(poles) != 3:
        raise PlacementError("exactly three poles are required")
    if any(p.real >= 0.0 for p in poles):
        raise PlacementError("all poles must have negative real part")
    complex_poles = [p for p in poles if p.imag != 0.0]
    if len(complex_poles) not in (0, 2) or (
            complex_poles and abs(complex_poles[0] - complex_poles[1].conjugate()) > 1e-12 * abs(complex_poles[0])):
        raise PlacementError("complex poles must form a conjugate pair")
    return poles


def place_poles(poles, rho, l32=0.0):
    """Scheduled gains whose linearized error matrix has the given poles.

    Eliminating l11 and l31 from the coefficient equations shows that l22 must
    be a real root of the desired polynomial; the first real pole in ``poles``
    is used, the remaining pair fixes l11 = p1 + p2 and l31 = rho p1 p2 - 1/rho.
    """
    poles = _validate_poles(poles)
    i = next(k for k, p in enumerate(poles) if p.imag == 0.0)
    l22 = poles[i].real
    p1, p2 = (p for k, p in enumerate(poles) if k != i)
    l11 = (p1 + p2).real
    l31 = rho * (p1 * p2).real - 1.0 / rho
    if not l22 < 0.0:
        raise PlacementError("l22 must be negative")
    if l11 >= 0.0:
        warnings.warn("placed gain l11 is non-negative", RuntimeWarning, stacklevel=2)
    return ObserverGains(l11=l11, l22=l22, l31=l31, l32=float(l32))


def desired_coefficients(poles):
    """``(a2, a1, a0)`` of the monic polynomial with the given roots."""
    c = np.poly(np.asarray(poles, dtype=complex)).real
    return float(c[1]), float(c[2]), float(c[3])


@dataclass(frozen=True)
class ObservationError:
    g_e: np.ndarray
    angle: float


def observation_error(g, g_hat):
    """g_e = g^T ghat and its rotation angle; raises when outside the local regime."""
    g_e = np.asarray(g, dtype=float).T @ np.asarray(g_hat, dtype=float)
    cos_angle = 0.5 * (np.trace(g_e) - 1.0)
    if cos_angle <= -1.0 + REGIME_TOL:
        raise OutOfRegimeError("observation error angle is at pi; the local observer does not apply")
    _, angle = log_so3(g_e)
    return ObservationError(g_e, angle)


def error_coordinates(g, g_hat):
    """xi with g^T ghat = exp(hat(xi))."""
    n, angle = log_so3(np.asarray(g, dtype=float).T @ np.asarray(g_hat, dtype=float))
    return np.asarray(n) * angle


def run_observer_on(truth, kappa_of_s, g_hat0, geom, gains, s_grid, config=IntegratorConfig(), callback=None):
    """Integrate the observer against a known truth ``truth(s)`` (a configuration).

    The measurement is y = rho * truth(s)[:, 2]; ``kappa_of_s`` is the true
    curvature input the estimate copies.
    """
    rho = geom.rho

    def rate(s, g_hat):
        return observer_body_rate(g_hat, (rho * truth(s)[:, 2]).tolist(), kappa_of_s(s), rho, gains)

    return integrate_trajectory(g_hat0, rate, s_grid, config, callback)


def great_circle_truth(g0, rho, kappa_g=0.0):
    """Closed-form truth at u = 1 and constant curvature: g(s) = g0 exp(s hat(w))."""
    g0 = np.asarray(g0, dtype=float)
    return lambda s: g0 @ exp3(0.0, s / rho, s * kappa_g)


def linearization_eigenvalues(gains, rho, kappa_g=0.0):
    return np.linalg.eigvals(error_linearization(kappa_g, rho, gains))


def convergence_length(s, angles, threshold=1e-6):
    """First station after which the error angle stays below ``threshold``; nan if never."""
    angles = np.asarray(angles)
    above = np.nonzero(angles >= threshold)[0]
    if len(above) == 0:
        return float(s[0])
    if above[-1] == len(angles) - 1:
        return math.nan
    return float(s[above[-1] + 1])
