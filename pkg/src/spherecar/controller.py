"""Invariant tracking feedback for the car on the sphere.

Everything is expressed in the reference arc length ``s_d``. The speed
feedback ``u = mu(sigma, g, g_d)`` imposes sigma' = -c_sigma sigma on the
orthodrome angle; the steering feedback solves the twice-differentiated
misalignment relation <beta x beta_d, nu_d> = cos(delta) sin(sigma) for the
geodesic curvature so that delta'' + c1 delta' + c0 delta = 0. All quantities
are inner and triple products of the columns of ``g`` and ``g_d`` and are
therefore invariant under a common left rotation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from ._vec import angle_between, columns, dot, lin, triple
from .exceptions import InfeasibleSteeringError, SingularConfigurationError
from .models import steering_from_curvature
from .tracking import SIGMA_EPS, _angles_from_columns


@dataclass(frozen=True)
class ControllerGains:
    c_sigma: float = 1.0
    c_delta1: float = 2.0
    c_delta0: float = 1.0

    def __post_init__(self):
        for name in ("c_sigma", "c_delta1", "c_delta0"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"controller gain {name} must be positive")


@dataclass(frozen=True)
class SingularityPolicy:
    """Numerical realization of the analytic limits of the feedback laws.

    ``eps_den`` bounds |<tau, beta_d>| away from zero, ``eps_err`` is the error
    size below which the limit values u = 1, kappa_g = kappa_gd are used,
    ``eps_delta`` bounds |sin(delta) sin(sigma)| for the misalignment solve and
    ``eps_affine`` is the smallest relative linear coefficient accepted by the
    closed-form steering solve. ``kappa_max=None`` means 10 / ell.

    Near convergence <tau, beta_d> ~ sin(sigma) vanishes together with the
    error; when it drops below ``eps_den`` while sigma <= ``sigma_hold`` the
    closed loop falls back to the limit values instead of failing.
    """

    eps_den: float = 1e-6
    eps_err: float = 1e-8
    eps_delta: float = 1e-6
    eps_affine: float = 1e-12
    kappa_max: float | None = None
    phi_max: float = 1.4
    secant_iterations: int = 50
    secant_tol: float = 1e-12
    sigma_hold: float = 1e-5

    def __post_init__(self):
        for name in ("eps_den", "eps_err", "eps_delta", "eps_affine", "phi_max", "secant_tol", "sigma_hold"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"policy field {name} must be positive")
        if self.kappa_max is not None and not self.kappa_max > 0.0:
            raise ValueError("policy field kappa_max must be positive")
        if not self.phi_max < 0.5 * math.pi:
            raise ValueError("phi_max must be below pi/2")

    def curvature_bound(self, geom):
        return 10.0 / geom.ell if self.kappa_max is None else self.kappa_max


class _Frames:
    __slots__ = ("tau", "nu", "beta", "tau_d", "nu_d", "beta_d")

    def __init__(self, g, g_d):
        self.tau, self.nu, self.beta = columns(g)
        self.tau_d, self.nu_d, self.beta_d = columns(g_d)


def _in_limit_region(sigma, f, policy):
    return max(sigma, angle_between(f.tau, f.tau_d)) < policy.eps_err


def in_limit_region(sigma, g, g_d, policy):
    """True when both the position and the heading error are below ``eps_err``."""
    return _in_limit_region(sigma, _Frames(g, g_d), policy)


def _speed(sigma, f, gains, policy, rho):
    if _in_limit_region(sigma, f, policy):
        return 1.0
    den = dot(f.tau, f.beta_d)
    if abs(den) <= policy.eps_den:
        raise SingularConfigurationError(
            f"speed feedback singular: |<tau, beta_d>| = {abs(den):.3e} <= {policy.eps_den:g}")
    return (rho * gains.c_sigma * sigma * math.sin(sigma) - dot(f.beta, f.tau_d)) / den


def speed_feedback(sigma, g, g_d, gains, policy, rho):
    """Normalized speed u = mu(sigma, g, g_d) enforcing sigma' = -c_sigma sigma."""
    return _speed(sigma, _Frames(g, g_d), gains, policy, rho)


def _sigma_rate(u, f, sigma, rho, eps):
    s = math.sin(sigma)
    if s <= eps:
        return 0.0
    return -(u * dot(f.tau, f.beta_d) + dot(f.beta, f.tau_d)) / (rho * s)


def sigma_rate(u, g, g_d, sigma, rho, eps=SIGMA_EPS):
    """sigma' from the derivative of cos(sigma) = <beta, beta_d>; zero below ``eps``."""
    return _sigma_rate(u, _Frames(g, g_d), sigma, rho, eps)


def _misalignment_rate(u, f, kappa_d, rho):
    """Arc-length derivative of <beta x beta_d, nu_d> along the model."""
    dbeta = lin((u / rho, f.tau))
    dbeta_d = lin((1.0 / rho, f.tau_d))
    dnu_d = lin((-kappa_d, f.tau_d))
    return (triple(dbeta, f.beta_d, f.nu_d) + triple(f.beta, dbeta_d, f.nu_d)
            + triple(f.beta, f.beta_d, dnu_d))


def _delta_rate(u, f, sigma, delta, dsigma, kappa_d, rho, eps):
    den = math.sin(delta) * math.sin(sigma)
    if abs(den) <= eps:
        raise SingularConfigurationError(
            f"misalignment rate singular: |sin(delta) sin(sigma)| = {abs(den):.3e}")
    lhs = _misalignment_rate(u, f, kappa_d, rho)
    return (dsigma * math.cos(sigma) * math.cos(delta) - lhs) / den


def delta_rate(u, g, g_d, sigma, delta, dsigma, kappa_d, rho, eps=1e-12):
    """delta' solved from the first derivative of the misalignment relation."""
    return _delta_rate(u, _Frames(g, g_d), sigma, delta, dsigma, kappa_d, rho, eps)


def _speed_rate_coefficients(u, f, sigma, dsigma, kappa_d, gains, rho):
    den = dot(f.tau, f.beta_d)
    dbeta = lin((u / rho, f.tau))
    dtau_d = lin((kappa_d, f.nu_d), (-1.0 / rho, f.beta_d))
    dnum = (rho * gains.c_sigma * dsigma * (math.sin(sigma) + sigma * math.cos(sigma))
            - dot(dbeta, f.tau_d) - dot(f.beta, dtau_d))
    # <tau', beta_d> + <tau, beta_d'> with tau' = u (kappa_g nu - beta / rho)
    dden0 = -u * dot(f.beta, f.beta_d) / rho + dot(f.tau, f.tau_d) / rho
    dden1 = u * dot(f.nu, f.beta_d)
    return (dnum - u * dden0) / den, -u * dden1 / den


def speed_feedback_rate_coefficients(u, g, g_d, sigma, dsigma, kappa_d, gains, rho):
    """``(a0, a1)`` with mu' = a0 + a1 * kappa_g along the closed loop.

    ``u`` must be the value of the speed feedback at this configuration and
    ``dsigma`` the corresponding sigma'.
    """
    return _speed_rate_coefficients(u, _Frames(g, g_d), sigma, dsigma, kappa_d, gains, rho)


def speed_feedback_rate(u, g, g_d, sigma, dsigma, kappa_d, kappa_g, gains, rho):
    a0, a1 = speed_feedback_rate_coefficients(u, g, g_d, sigma, dsigma, kappa_d, gains, rho)
    return a0 + a1 * kappa_g


class SteeringProblem:
    """Steering residual F(kappa_g) at one station.

    F is the second arc-length derivative of <beta x beta_d, nu_d> minus that
    of cos(delta) sin(sigma), with u = mu, u' = mu'(kappa_g),
    sigma'' = -c_sigma sigma' and delta'' = -c1 delta' - c0 delta substituted.
    The terms independent of kappa_g are computed once.
    """

    def __init__(self, g, g_d, kappa_d, dkappa_d, rho, sigma, delta, u, dsigma, ddelta, gains):
        f = g if isinstance(g, _Frames) else _Frames(g, g_d)
        self.frames = f
        self.kappa_d = kappa_d
        self.rho = rho
        self.u = u
        self._a0, self._a1 = _speed_rate_coefficients(u, f, sigma, dsigma, kappa_d, gains, rho)

        kd = kappa_d
        dbeta = lin((u / rho, f.tau))
        dbeta_d = lin((1.0 / rho, f.tau_d))
        dnu_d = lin((-kd, f.tau_d))
        ddbeta_d = lin((kd / rho, f.nu_d), (-1.0 / rho**2, f.beta_d))
        ddnu_d = lin((-dkappa_d, f.tau_d), (-kd * kd, f.nu_d), (kd / rho, f.beta_d))
        self._lhs_fixed = (
            2.0 * triple(dbeta, dbeta_d, f.nu_d)
            + triple(f.beta, ddbeta_d, f.nu_d)
            + 2.0 * (triple(dbeta, f.beta_d, dnu_d) + triple(f.beta, dbeta_d, dnu_d))
            + triple(f.beta, f.beta_d, ddnu_d)
        )

        dds = -gains.c_sigma * dsigma
        ddd = -gains.c_delta1 * ddelta - gains.c_delta0 * delta
        cs, ss = math.cos(sigma), math.sin(sigma)
        cd, sd = math.cos(delta), math.sin(delta)
        self._rhs = (dds * cs * cd - dsigma * dsigma * ss * cd - 2.0 * dsigma * ddelta * sd * cs
                     - ddd * sd * ss - ddelta * ddelta * cd * ss)

    def residual(self, kappa_g):
        f, rho, u = self.frames, self.rho, self.u
        du = self._a0 + self._a1 * kappa_g
        # beta' = u tau / rho and tau' = u (kappa_g nu - beta / rho)
        ddbeta = lin((du / rho, f.tau), (u * u * kappa_g / rho, f.nu), (-u * u / rho**2, f.beta))
        return triple(ddbeta, f.beta_d, f.nu_d) + self._lhs_fixed - self._rhs

    __call__ = residual


@dataclass(frozen=True)
class SteeringResult:
    kappa_g: float
    phi: float
    # one of "limit", "fallback", "affine", "secant"
    mode: str
    residual: float = 0.0


def _secant(F, x0, x1, bound, iterations, tol):
    """Secant iteration kept inside [-bound, bound]; returns the root or None."""
    f0, f1 = F(x0), F(x1)
    for _ in range(iterations):
        if abs(f1) <= tol:
            return x1
        if f1 == f0:
            return None
        x2 = min(bound, max(-bound, x1 - f1 * (x1 - x0) / (f1 - f0)))
        x0, f0, x1, f1 = x1, f1, x2, F(x2)
    return x1 if abs(f1) <= tol else None


def solve_steering(problem, policy, geom):
    """Root of the steering residual, checked against the saturation bounds."""
    bound = policy.curvature_bound(geom)
    k0 = problem.kappa_d
    F = problem.residual
    f0 = F(k0)
    slope = F(k0 + 1.0) - f0
    mode = "affine"
    if abs(slope) > policy.eps_affine * max(abs(f0), abs(slope), 1e-300):
        kappa = k0 - f0 / slope
    else:
        mode = "secant"
        kappa = _secant(F, -bound, bound, bound, policy.secant_iterations, policy.secant_tol)
        if kappa is None:
            raise InfeasibleSteeringError("steering equation has no root within the curvature bound")
    phi = steering_from_curvature(kappa, geom)
    if abs(kappa) > bound or abs(phi) > policy.phi_max:
        raise InfeasibleSteeringError(
            f"required curvature {kappa:.6g} (steering {phi:.4f} rad) exceeds the saturation bounds")
    return SteeringResult(kappa, phi, mode, F(kappa))


def steering_feedback(g, g_d, sigma, delta, dsigma, ddelta, gains, reference, policy, geom, u):
    """Geodesic curvature and steering angle imposing the misalignment dynamics.

    ``reference`` is the :class:`~spherecar.reference.ReferenceSample` at the
    current station; ``u`` the speed feedback value.
    """
    problem = SteeringProblem(g, g_d, reference.kappa, reference.dkappa, geom.rho,
                              sigma, delta, u, dsigma, ddelta, gains)
    return solve_steering(problem, policy, geom)


@dataclass(frozen=True)
class ClosedLoopDiagnostics:
    u: float
    phi: float
    kappa_g: float
    sigma: float
    delta: float
    dsigma: float
    ddelta: float
    mode: str


def feedback(g, sample, gains, policy, geom):
    """Evaluate both feedbacks at a configuration; returns :class:`ClosedLoopDiagnostics`."""
    rho = geom.rho
    f = _Frames(g, sample.g)
    err = _angles_from_columns(f.tau_d, f.nu_d, f.beta, f.beta_d)
    sigma, delta = err.sigma, err.delta
    if _in_limit_region(sigma, f, policy):
        phi = steering_from_curvature(sample.kappa, geom)
        return ClosedLoopDiagnostics(1.0, phi, sample.kappa, sigma, delta, 0.0, 0.0, "limit")
    try:
        u = _speed(sigma, f, gains, policy, rho)
    except SingularConfigurationError:
        if sigma > policy.sigma_hold:
            raise
        phi = steering_from_curvature(sample.kappa, geom)
        return ClosedLoopDiagnostics(1.0, phi, sample.kappa, sigma, delta, float("nan"), float("nan"), "fallback")
    ds = _sigma_rate(u, f, sigma, rho, SIGMA_EPS)
    if abs(math.sin(delta) * math.sin(sigma)) <= policy.eps_delta:
        phi = steering_from_curvature(sample.kappa, geom)
        return ClosedLoopDiagnostics(u, phi, sample.kappa, sigma, delta, ds, float("nan"), "fallback")
    dd = _delta_rate(u, f, sigma, delta, ds, sample.kappa, rho, 0.0)
    problem = SteeringProblem(f, None, sample.kappa, sample.dkappa, rho, sigma, delta, u, ds, dd, gains)
    res = solve_steering(problem, policy, geom)
    return ClosedLoopDiagnostics(u, res.phi, res.kappa_g, sigma, delta, ds, dd, res.mode)


def closed_loop_rate(s, g, reference, gains, policy, geom):
    """Body rate of the closed loop at station ``s`` and its diagnostics.

    Returns ``(w, diagnostics)`` with g' = g hat(w).
    """
    diag = feedback(g, reference.sample(s), gains, policy, geom)
    return (0.0, diag.u / geom.rho, diag.u * diag.kappa_g), diag
