"""Structure-preserving integrators for g' = g hat(w(s, g)) on SO(3).

A rate function maps ``(s, g)`` to the body rate ``w`` (rotation-vector
coordinates). States may carry leading batch dimensions, shape ``(..., 3, 3)``
with rates of shape ``(..., 3)``; all steps are taken in the Lie algebra and
mapped back through the exponential, never by adding matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import SphereCarError
from .lie import check_rotation, exp3, exp_vec, project_to_so3, rotation_defect

METHODS = ("lie-euler", "rkmk4")


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "rkmk4"
    step: float = 1e-3
    # every N steps the state is polar-projected if its orthonormality defect
    # exceeds renormalize_tol; 0 disables the check
    renormalize_every: int = 1000
    renormalize_tol: float = 1e-12

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown integrator method {self.method!r}; expected one of {METHODS}")
        if not self.step > 0.0:
            raise ValueError("integrator step must be positive")
        if self.renormalize_every < 0:
            raise ValueError("renormalize_every must be non-negative")
        if not self.renormalize_tol > 0.0:
            raise ValueError("renormalize_tol must be positive")


def _cross(a, b):
    a0, a1, a2 = a[..., 0], a[..., 1], a[..., 2]
    b0, b1, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([a1 * b2 - a2 * b1, a2 * b0 - a0 * b2, a0 * b1 - a1 * b0], axis=-1)


def dexpinv(u, w):
    """Left-trivialized inverse differential of exp, truncated after the second bracket.

    For g = g0 exp(u) and g' = g hat(w) one has u' = w + [u, w]/2 + [u, [u, w]]/12 + O(|u|^4),
    which suffices for fourth order.
    """
    uw = _cross(u, w)
    return w + 0.5 * uw + _cross(u, uw) / 12.0


def lie_euler_step(g, omega, h):
    """g_{k+1} = g_k exp(h omega)."""
    omega = np.asarray(omega, dtype=float)
    if omega.ndim == 1:
        return g @ exp3(h * omega[0], h * omega[1], h * omega[2])
    return g @ exp_vec(h * omega)


def _dexpinv3(u, w):
    u0, u1, u2 = u
    w0, w1, w2 = w
    x0, x1, x2 = u1 * w2 - u2 * w1, u2 * w0 - u0 * w2, u0 * w1 - u1 * w0
    y0, y1, y2 = u1 * x2 - u2 * x1, u2 * x0 - u0 * x2, u0 * x1 - u1 * x0
    return (w0 + 0.5 * x0 + y0 / 12.0, w1 + 0.5 * x1 + y1 / 12.0, w2 + 0.5 * x2 + y2 / 12.0)


def _rkmk4_single(g, rate, s, h):
    w = rate(s, g)
    k1 = (h * w[0], h * w[1], h * w[2])
    u = (0.5 * k1[0], 0.5 * k1[1], 0.5 * k1[2])
    d = _dexpinv3(u, rate(s + 0.5 * h, g @ exp3(*u)))
    k2 = (h * d[0], h * d[1], h * d[2])
    u = (0.5 * k2[0], 0.5 * k2[1], 0.5 * k2[2])
    d = _dexpinv3(u, rate(s + 0.5 * h, g @ exp3(*u)))
    k3 = (h * d[0], h * d[1], h * d[2])
    d = _dexpinv3(k3, rate(s + h, g @ exp3(*k3)))
    k4 = (h * d[0], h * d[1], h * d[2])
    return g @ exp3(*[(k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0 for i in range(3)])


def rkmk4_step(g, rate, s, h):
    """One classical fourth-order Runge-Kutta-Munthe-Kaas step."""
    if np.ndim(g) == 2:
        return _rkmk4_single(g, rate, s, h)
    k1 = h * np.asarray(rate(s, g), dtype=float)
    u = 0.5 * k1
    k2 = h * dexpinv(u, rate(s + 0.5 * h, g @ exp_vec(u)))
    u = 0.5 * k2
    k3 = h * dexpinv(u, rate(s + 0.5 * h, g @ exp_vec(u)))
    k4 = h * dexpinv(k3, rate(s + h, g @ exp_vec(k3)))
    return g @ exp_vec((k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0)


def step(g, rate, s, h, method="rkmk4"):
    if method == "rkmk4":
        return rkmk4_step(g, rate, s, h)
    return lie_euler_step(g, rate(s, g), h)


def integrate_trajectory(g0, rate, s_grid, config=IntegratorConfig(), callback=None):
    """Integrate from ``g0`` at ``s_grid[0]`` and return the state at every grid point.

    Each grid interval is split into equal sub-steps no longer than
    ``config.step``. ``callback(s, g)`` is invoked at every grid point.
    Errors raised by ``rate`` are re-raised with the station attached.
    """
    s_grid = np.asarray(s_grid, dtype=float)
    g = check_rotation(np.array(g0, dtype=float))
    out = np.empty((len(s_grid),) + g.shape)
    if len(s_grid) == 0:
        return out
    if np.any(np.diff(s_grid) <= 0.0):
        raise ValueError("integration grid must be strictly increasing")
    out[0] = g
    if callback is not None:
        callback(s_grid[0], g)
    count = 0
    for i in range(1, len(s_grid)):
        s0, s1 = s_grid[i - 1], s_grid[i]
        n = max(1, math.ceil((s1 - s0) / config.step - 1e-9))
        h = (s1 - s0) / n
        for j in range(n):
            s = s0 + j * h
            try:
                g = step(g, rate, s, h, config.method)
            except SphereCarError as err:
                err.station = s
                err.args = (f"at s={s:.9g}: {err.args[0] if err.args else ''}",) + err.args[1:]
                raise
            count += 1
            if config.renormalize_every and count % config.renormalize_every == 0:
                if max(rotation_defect(g)) > config.renormalize_tol:
                    g = project_to_so3(g)
        out[i] = check_rotation(g)
        if callback is not None:
            callback(s1, g)
    return out
