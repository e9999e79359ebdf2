"""Reference trajectories on the sphere, sampled in their own arc length ``s_d``.

Every reference exposes ``sample(s)`` returning a :class:`ReferenceSample`
with the configuration ``g_d`` and the geodesic curvature and its arc-length
derivative, which is what the tracking controller consumes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ReparametrizationError, SpeedZeroError
from .lie import E1, E2, E3
from .models import flat_parametrization

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True)
class ReferenceSample:
    s: float
    g: np.ndarray
    kappa: float
    dkappa: float
    v: float | None = None


class GreatCircle:
    """Unit-speed great circle with normal ``axis`` starting at ``start``."""

    kind = "great-circle"

    def __init__(self, rho, axis=E3, start=None):
        axis = np.asarray(axis, dtype=float)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError("great-circle axis must be a unit vector")
        if start is None:
            start = E1 - (E1 @ axis) * axis
            if np.linalg.norm(start) < 1e-6:
                start = E2 - (E2 @ axis) * axis
        start = np.asarray(start, dtype=float)
        start = start - (start @ axis) * axis
        self.rho = float(rho)
        self.axis = axis
        self.start = start / np.linalg.norm(start)
        self.side = np.cross(axis, self.start)

    @property
    def period(self):
        return 2.0 * math.pi * self.rho

    def sample(self, s):
        a = s / self.rho
        c, sn = math.cos(a), math.sin(a)
        beta = c * self.start + sn * self.side
        tau = -sn * self.start + c * self.side
        return ReferenceSample(s, np.column_stack([tau, self.axis, beta]), 0.0, 0.0)


class LatitudeCircle:
    """Circle of constant colatitude ``psi`` traversed eastwards at unit speed."""

    kind = "latitude-circle"

    def __init__(self, psi, rho):
        if not 0.0 < psi < math.pi:
            raise ValueError("colatitude must lie strictly between the poles")
        self.psi = float(psi)
        self.rho = float(rho)
        self.kappa = 1.0 / (math.tan(psi) * rho)

    @property
    def period(self):
        return 2.0 * math.pi * self.rho * math.sin(self.psi)

    def sample(self, s):
        a = s / (self.rho * math.sin(self.psi))
        ca, sa = math.cos(a), math.sin(a)
        cp, sp = math.cos(self.psi), math.sin(self.psi)
        beta = np.array([sp * ca, sp * sa, cp])
        tau = np.array([-sa, ca, 0.0])
        nu = np.array([-cp * ca, -cp * sa, sp])
        return ReferenceSample(s, np.column_stack([tau, nu, beta]), self.kappa, 0.0)


def great_circle_reference(axis, rho, s_d, start=None):
    return GreatCircle(rho, axis, start).sample(s_d)


def latitude_circle_reference(psi, rho, s_d):
    return LatitudeCircle(psi, rho).sample(s_d)


class ColatitudeCurve:
    """Closed curve with colatitude psi0 + sum a_k cos(k t) + b_k sin(k t) at longitude t.

    Calling the curve returns the position and its first three derivatives in ``t``.
    """

    def __init__(self, rho, psi0, cos_coeffs=(), sin_coeffs=()):
        self.rho = float(rho)
        self.psi0 = float(psi0)
        self.a = np.asarray(cos_coeffs, dtype=float)
        self.b = np.asarray(sin_coeffs, dtype=float)
        bound = np.abs(self.a).sum() + np.abs(self.b).sum()
        if not (bound < self.psi0 < math.pi - bound):
            raise ValueError("colatitude profile must stay strictly between the poles")

    period = 2.0 * math.pi

    def _psi(self, t):
        k = np.arange(1, len(self.a) + 1)
        j = np.arange(1, len(self.b) + 1)
        ca, sa = np.cos(k * t), np.sin(k * t)
        cb, sb = np.cos(j * t), np.sin(j * t)
        a, b = self.a, self.b
        p0 = self.psi0 + a @ ca + b @ sb
        p1 = -(a * k) @ sa + (b * j) @ cb
        p2 = -(a * k**2) @ ca - (b * j**2) @ sb
        p3 = (a * k**3) @ sa - (b * j**3) @ cb
        return p0, p1, p2, p3

    def __call__(self, t):
        p, p1, p2, p3 = self._psi(t)
        sp, cp = math.sin(p), math.cos(p)
        f = (sp, cp * p1, -sp * p1**2 + cp * p2, -cp * p1**3 - 3.0 * sp * p1 * p2 + cp * p3)
        h = (cp, -sp * p1, -cp * p1**2 - sp * p2, sp * p1**3 - 3.0 * cp * p1 * p2 - sp * p3)
        c, s = math.cos(t), math.sin(t)
        x = (f[0] * c, f[1] * c - f[0] * s, f[2] * c - 2.0 * f[1] * s - f[0] * c,
             f[3] * c - 3.0 * f[2] * s - 3.0 * f[1] * c + f[0] * s)
        y = (f[0] * s, f[1] * s + f[0] * c, f[2] * s + 2.0 * f[1] * c - f[0] * s,
             f[3] * s + 3.0 * f[2] * c - 3.0 * f[1] * s - f[0] * c)
        return tuple(self.rho * np.array([x[i], y[i], h[i]]) for i in range(4))


def _gauss(fun, a, b):
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return half * sum(w * fun(mid + half * x) for x, w in zip(_GL_NODES, _GL_WEIGHTS))


def arclength_reparametrize(t, speed):
    """Arc length s(t) = integral of ``speed`` from t[0], by 8-point Gauss-Legendre per interval."""
    t = np.asarray(t, dtype=float)
    if len(t) == 0:
        return t.copy()
    if np.any(np.diff(t) <= 0.0):
        raise ReparametrizationError("time grid must be strictly increasing")
    s = np.zeros(len(t))
    for i in range(1, len(t)):
        a, b = t[i - 1], t[i]
        nodes = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES
        vals = np.array([speed(x) for x in nodes] + [speed(a), speed(b)])
        if np.any(vals <= 0.0):
            raise ReparametrizationError(f"speed must be positive, found {vals.min():.3g} on [{a:g}, {b:g}]")
        s[i] = s[i - 1] + 0.5 * (b - a) * (_GL_WEIGHTS @ vals[:-2])
    return s


class FlatCurve:
    """Reference built from an arbitrary regular curve through the flat output.

    ``curve(t)`` returns ``(y, y', y'')`` or ``(y, y', y'', y''')`` in its own
    parameter ``t``. Without the third derivative the curvature derivative is
    taken by a five-point central difference in ``t``. With ``periodic`` the
    curve is closed over ``t_span`` and arc lengths wrap around.
    """

    kind = "flat-curve"

    def __init__(self, curve, geom, t_span, intervals=512, fd_step=1e-3, periodic=False):
        self.curve = curve
        self.periodic = periodic
        self.geom = geom
        self.t0, self.t1 = map(float, t_span)
        self.fd_step = fd_step
        self._t = np.linspace(self.t0, self.t1, intervals + 1)
        self._s = arclength_reparametrize(self._t, self._speed)

    @property
    def length(self):
        return float(self._s[-1])

    def _speed(self, t):
        v = float(np.linalg.norm(self.curve(t)[1]))
        if v == 0.0:
            raise SpeedZeroError(f"curve speed vanishes at t={t!r}")
        return v

    def _kappa(self, t):
        y, yd, ydd = self.curve(t)[:3]
        return flat_parametrization(y, yd, ydd, self.geom).kappa_g

    def parameter(self, s):
        """Curve parameter at arc length ``s`` (Newton on the tabulated arc length)."""
        i = int(np.clip(np.searchsorted(self._s, s) - 1, 0, len(self._s) - 2))
        ti, si = self._t[i], self._s[i]
        t = ti + (s - si) / (self._s[i + 1] - si) * (self._t[i + 1] - ti)
        for _ in range(8):
            dt = (s - si - _gauss(self._speed, ti, t)) / self._speed(t)
            t += dt
            if abs(dt) < 1e-15 * max(1.0, abs(t)):
                break
        return t

    def sample_at_parameter(self, t, s=None):
        derivs = self.curve(t)
        y, yd, ydd = derivs[:3]
        flat = flat_parametrization(y, yd, ydd, self.geom)
        v = flat.v
        nu = flat.g[:, 1]
        if len(derivs) > 3:
            vdot = float(yd @ ydd) / v
            dk_dt = float(derivs[3] @ nu) / v**2 - 3.0 * float(ydd @ nu) * vdot / v**3
        else:
            h = self.fd_step
            k = [self._kappa(t + j * h) for j in (-2, -1, 1, 2)]
            dk_dt = (k[0] - 8.0 * k[1] + 8.0 * k[2] - k[3]) / (12.0 * h)
        return ReferenceSample(s if s is not None else float("nan"), flat.g, flat.kappa_g, dk_dt / v, v)

    @property
    def period(self):
        return self.length if self.periodic else math.inf

    def sample(self, s):
        if not self.periodic:
            return self.sample_at_parameter(self.parameter(s), s)
        laps, rem = divmod(s, self.length)
        return self.sample_at_parameter(self.parameter(rem) + laps * (self.t1 - self.t0), s)


def flat_curve_reference(curve, geom, s_grid, t_span=(0.0, 2.0 * math.pi)):
    ref = FlatCurve(curve, geom, t_span)
    return [ref.sample(s) for s in np.asarray(s_grid, dtype=float)]
