"""Matrix Lie group primitives for SO(3), so(3) and SE(2).

Rotation vectors ``w`` are 3-vectors whose direction is the rotation axis and
whose norm is the angle; ``hat(w)`` is the matching skew-symmetric generator,
so that ``hat(w) @ x == np.cross(w, x)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import (
    BranchError,
    DimensionMismatchError,
    NonUnitAxisError,
    NotARotationError,
    SymmetryViolationError,
)

ROTATION_TOL = 1e-9
SKEW_TOL = 1e-9
# below this angle the Rodrigues coefficients are replaced by their series
SMALL_ANGLE = 1e-7

E1 = np.array([1.0, 0.0, 0.0])
E2 = np.array([0.0, 1.0, 0.0])
E3 = np.array([0.0, 0.0, 1.0])


def hat(n):
    """Skew-symmetric matrix X(n) with X(n) @ w == n x w.

    Accepts a single 3-vector or a stack of shape (..., 3).
    """
    n = np.asarray(n, dtype=float)
    if n.shape[-1] != 3:
        raise DimensionMismatchError(f"expected trailing dimension 3, got {n.shape}")
    X = np.zeros(n.shape[:-1] + (3, 3))
    X[..., 0, 1] = -n[..., 2]
    X[..., 0, 2] = n[..., 1]
    X[..., 1, 0] = n[..., 2]
    X[..., 1, 2] = -n[..., 0]
    X[..., 2, 0] = -n[..., 1]
    X[..., 2, 1] = n[..., 0]
    return X


def vee(X, tol=SKEW_TOL):
    """Inverse of :func:`hat`; raises if ``X`` is not skew-symmetric within ``tol``."""
    X = np.asarray(X, dtype=float)
    if X.shape[-2:] != (3, 3):
        raise DimensionMismatchError(f"expected (..., 3, 3), got {X.shape}")
    asym = np.max(np.abs(X + np.swapaxes(X, -1, -2))) if X.size else 0.0
    if asym > tol:
        raise SymmetryViolationError(f"matrix is not skew-symmetric (defect {asym:.3e})")
    return np.stack([X[..., 2, 1], X[..., 0, 2], X[..., 1, 0]], axis=-1)


def _rodrigues_coefficients(theta):
    theta = np.asarray(theta, dtype=float)
    small = theta < SMALL_ANGLE
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    a = np.where(small, 1.0 - t2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - t2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    return a, b


def exp_vec(w):
    """Matrix exponential of ``hat(w)`` by the Rodrigues formula.

    Vectorized over leading dimensions of ``w``.
    """
    w = np.asarray(w, dtype=float)
    theta = np.sqrt(np.sum(w * w, axis=-1))
    a, b = _rodrigues_coefficients(theta)
    K = hat(w)
    K2 = K @ K
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * K2


def exp3(a, b, c):
    """exp of hat((a, b, c)) for scalar components; fast path for single states."""
    t2 = a * a + b * b + c * c
    t = math.sqrt(t2)
    if t < SMALL_ANGLE:
        p, q = 1.0 - t2 / 6.0, 0.5 - t2 / 24.0
    else:
        p, q = math.sin(t) / t, (1.0 - math.cos(t)) / t2
    return np.array([
        [1.0 - q * (b * b + c * c), q * a * b - p * c, q * a * c + p * b],
        [q * a * b + p * c, 1.0 - q * (a * a + c * c), q * b * c - p * a],
        [q * a * c - p * b, q * b * c + p * a, 1.0 - q * (a * a + b * b)],
    ])


def exp_so3(n, alpha):
    """Rotation by ``alpha`` about the unit axis ``n``."""
    n = np.asarray(n, dtype=float)
    if n.shape != (3,):
        raise DimensionMismatchError(f"axis must be a 3-vector, got shape {n.shape}")
    if alpha != 0.0 and abs(np.linalg.norm(n) - 1.0) > 1e-9:
        raise NonUnitAxisError(f"rotation axis must have unit norm, got {np.linalg.norm(n)!r}")
    return exp_vec(n * alpha)


def log_vec(R):
    """Principal logarithm of a rotation as a rotation vector (angle < pi)."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr <= -1.0 + 1e-9:
        raise BranchError("rotation angle too close to pi for the principal logarithm")
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    s = math.sqrt(w @ w)
    c = 0.5 * (tr - 1.0)
    theta = math.atan2(s, c)
    if theta < SMALL_ANGLE:
        return w * (1.0 + theta * theta / 6.0)
    return w * (theta / s)


def log_so3(R):
    """Axis-angle pair ``(n, alpha)`` with ``exp_so3(n, alpha) == R``.

    The angle lies in [0, pi); at zero angle the axis is reported as e3.
    """
    w = log_vec(R)
    alpha = float(np.linalg.norm(w))
    if alpha == 0.0:
        return E3.copy(), 0.0
    return w / alpha, alpha


def rotation_angle(R):
    """Angle of ``R`` in [0, pi], valid on the whole group (no branch error)."""
    R = np.asarray(R, dtype=float)
    w = 0.5 * np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
    c = 0.5 * (R[0, 0] + R[1, 1] + R[2, 2] - 1.0)
    return math.atan2(float(np.linalg.norm(w)), c)


def lie_bracket(A, B):
    """Matrix commutator ``AB - BA``."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.shape[-1] != A.shape[-2]:
        raise DimensionMismatchError(f"bracket needs equal square shapes, got {A.shape} and {B.shape}")
    return A @ B - B @ A


def rotation_defect(R):
    """Max-norm orthonormality defect and determinant defect of ``R``."""
    R = np.asarray(R, dtype=float)
    eye = np.eye(3)
    ortho = float(np.max(np.abs(np.swapaxes(R, -1, -2) @ R - eye)))
    det = float(np.max(np.abs(np.linalg.det(R) - 1.0)))
    return ortho, det


def check_rotation(R, tol=ROTATION_TOL):
    """Return ``R`` as an array after asserting it lies on SO(3) within ``tol``."""
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3):
        raise DimensionMismatchError(f"expected (..., 3, 3), got {R.shape}")
    if not np.all(np.isfinite(R)):
        raise NotARotationError("rotation contains non-finite entries")
    ortho, det = rotation_defect(R)
    if ortho > tol or det > tol:
        raise NotARotationError(f"not a rotation: orthonormality defect {ortho:.3e}, det defect {det:.3e}")
    return R


def project_to_so3(R):
    """Nearest rotation matrix in the Frobenius norm (polar projection)."""
    U, _, Vt = np.linalg.svd(np.asarray(R, dtype=float))
    D = np.ones(U.shape[:-1])
    D[..., -1] = np.sign(np.linalg.det(U @ Vt))
    return (U * D[..., None, :]) @ Vt


def random_rotation(rng, max_angle=math.pi):
    """Rotation with uniformly random axis and angle uniform in [0, max_angle)."""
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return exp_so3(axis, rng.uniform(0.0, max_angle))


def wrap_angle(a):
    """Wrap to (-pi, pi]."""
    w = math.remainder(a, 2.0 * math.pi)
    return math.pi if w == -math.pi else w


@dataclass(frozen=True)
class PlanarPose:
    """Element of SE(2): position ``(x, y)`` and heading ``theta``."""

    x: float
    y: float
    theta: float

    @property
    def position(self):
        return np.array([self.x, self.y])

    def rotation(self):
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, -s], [s, c]])

    def matrix(self):
        M = np.eye(3)
        M[:2, :2] = self.rotation()
        M[:2, 2] = (self.x, self.y)
        return M

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        return cls(float(M[0, 2]), float(M[1, 2]), math.atan2(M[1, 0], M[0, 0]))

    @classmethod
    def identity(cls):
        return cls(0.0, 0.0, 0.0)


def se2_compose(g, h):
    """Group product ``g h``."""
    c, s = math.cos(g.theta), math.sin(g.theta)
    return PlanarPose(
        g.x + c * h.x - s * h.y,
        g.y + s * h.x + c * h.y,
        wrap_angle(g.theta + h.theta),
    )


def se2_inverse(g):
    c, s = math.cos(g.theta), math.sin(g.theta)
    return PlanarPose(-c * g.x - s * g.y, s * g.x - c * g.y, wrap_angle(-g.theta))
