import math

import numpy as np
import pytest
from hypothesis import given
from scipy.linalg import expm
from hypothesis import strategies as st

from spherecar.exceptions import (
    BranchError,
    DimensionMismatchError,
    NonUnitAxisError,
    NotARotationError,
    SymmetryViolationError,
)
from spherecar.lie import (
    E1,
    E2,
    E3,
    PlanarPose,
    check_rotation,
    exp3,
    exp_so3,
    exp_vec,
    hat,
    lie_bracket,
    log_so3,
    project_to_so3,
    rotation_angle,
    rotation_defect,
    se2_compose,
    se2_inverse,
    vee,
    wrap_angle,
)

vectors = st.lists(st.floats(-10, 10, allow_nan=False), min_size=3, max_size=3).map(np.array)


def unit(v):
    return v / np.linalg.norm(v)


class TestHatVee:
    def test_zero(self):
        np.testing.assert_array_equal(hat([0.0, 0.0, 0.0]), np.zeros((3, 3)))
        np.testing.assert_array_equal(vee(np.zeros((3, 3))), np.zeros(3))

    def test_e3_generator(self):
        np.testing.assert_array_equal(hat(E3), [[0, -1, 0], [1, 0, 0], [0, 0, 0]])

    def test_matches_cross_product(self, rng):
        a, b = rng.normal(size=(2, 100, 3))
        diff = np.einsum("nij,nj->ni", hat(a), b) - np.cross(a, b)
        assert np.abs(diff).max() < 1e-15

    def test_round_trip(self):
        np.testing.assert_array_equal(vee(hat([1.0, 2.0, 3.0])), [1.0, 2.0, 3.0])

    def test_rejects_symmetric_perturbation(self):
        X = hat([1.0, 2.0, 3.0])
        X[0, 1] += 1e-6
        X[1, 0] += 1e-6
        with pytest.raises(SymmetryViolationError):
            vee(X)

    def test_shape_errors(self):
        with pytest.raises(DimensionMismatchError):
            hat([1.0, 2.0])
        with pytest.raises(DimensionMismatchError):
            vee(np.zeros((2, 2)))

    @given(vectors, vectors, st.floats(-3, 3), st.floats(-3, 3))
    def test_linearity(self, u, w, a, b):
        np.testing.assert_allclose(hat(a * u + b * w), a * hat(u) + b * hat(w), atol=1e-12)

    @given(vectors)
    def test_skew(self, n):
        X = hat(n)
        np.testing.assert_array_equal(X + X.T, np.zeros((3, 3)))
        np.testing.assert_array_equal(vee(X), n)


class TestExp:
    def test_quarter_turn(self):
        np.testing.assert_allclose(exp_so3(E3, math.pi / 2) @ E1, E2, atol=1e-15)

    def test_zero_angle_is_identity(self, rng):
        np.testing.assert_array_equal(exp_so3(unit(rng.normal(size=3)), 0.0), np.eye(3))

    def test_about_e2(self):
        np.testing.assert_allclose(exp_so3(E2, 0.1) @ E3, [math.sin(0.1), 0.0, math.cos(0.1)], atol=1e-15)

    def test_non_unit_axis(self):
        with pytest.raises(NonUnitAxisError):
            exp_so3(np.array([1.0, 1.0, 0.0]), 0.3)
        np.testing.assert_array_equal(exp_so3(np.array([1.0, 1.0, 0.0]), 0.0), np.eye(3))

    def test_fixes_axis(self, rng):
        for _ in range(20):
            n = unit(rng.normal(size=3))
            np.testing.assert_allclose(exp_so3(n, rng.uniform(-3, 3)) @ n, n, atol=1e-15)

    @given(vectors, st.floats(-4, 4), st.floats(-4, 4))
    def test_same_axis_commutes(self, v, a, b):
        if np.linalg.norm(v) < 1e-3:
            return
        n = unit(v)
        np.testing.assert_allclose(exp_so3(n, a) @ exp_so3(n, b), exp_so3(n, a + b), atol=1e-12)

    @pytest.mark.parametrize("angle", [0.0, 1e-12, 0.99e-7, 1.01e-7, 1e-4, 1.0, 3.0])
    def test_against_matrix_exponential(self, angle):
        w = np.array([1.0, -2.0, 0.5]) / math.sqrt(5.25) * angle
        np.testing.assert_allclose(exp_vec(w), expm(hat(w)), atol=1e-15)

    def test_batched_and_scalar_paths_agree(self, rng):
        w = rng.normal(size=(50, 3))
        batched = exp_vec(w)
        for wi, R in zip(w, batched):
            np.testing.assert_allclose(exp3(*wi), R, atol=1e-15)

    def test_output_is_rotation(self, rng):
        ortho, det = rotation_defect(exp_vec(10.0 * rng.normal(size=(100, 3))))
        assert ortho < 1e-14 and det < 1e-14


class TestLog:
    def test_identity(self):
        n, a = log_so3(np.eye(3))
        assert a == 0.0
        np.testing.assert_array_equal(n, E3)

    def test_e1(self):
        n, a = log_so3(exp_so3(E1, 0.3))
        np.testing.assert_allclose(n, E1, atol=1e-12)
        assert abs(a - 0.3) < 1e-12

    def test_round_trip(self, rng):
        worst = 0.0
        for _ in range(1000):
            n = unit(rng.normal(size=3))
            R = exp_so3(n, rng.uniform(0.0, math.pi - 0.1))
            worst = max(worst, np.abs(exp_so3(*log_so3(R)) - R).max())
        assert worst < 1e-10

    def test_small_angle(self):
        n, a = log_so3(exp_so3(E2, 1e-9))
        np.testing.assert_allclose(n, E2, atol=1e-6)
        assert abs(a - 1e-9) < 1e-20

    def test_branch_error_near_pi(self):
        with pytest.raises(BranchError):
            log_so3(exp_so3(E1, math.pi))
        with pytest.raises(BranchError):
            log_so3(exp_so3(E1, math.pi - 1e-6))

    def test_rotation_angle_everywhere(self):
        assert abs(rotation_angle(exp_so3(E1, math.pi)) - math.pi) < 1e-12
        assert abs(rotation_angle(exp_so3(E3, 2.0)) - 2.0) < 1e-12


class TestBracket:
    def test_structure_relation(self):
        np.testing.assert_array_equal(lie_bracket(hat(E1), hat(E2)), hat(E3))

    def test_self_bracket(self, rng):
        A = rng.normal(size=(3, 3))
        np.testing.assert_array_equal(lie_bracket(A, A), np.zeros((3, 3)))

    def test_cross_product(self, rng):
        a, b = rng.normal(size=(2, 100, 3))
        diff = vee(lie_bracket(hat(a), hat(b))) - np.cross(a, b)
        assert np.abs(diff).max() < 1e-14

    def test_antisymmetric(self, rng):
        A, B = rng.normal(size=(2, 3, 3))
        np.testing.assert_allclose(lie_bracket(A, B), -lie_bracket(B, A), atol=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            lie_bracket(np.eye(3), np.eye(2))


class TestRotationChecks:
    def test_check_rejects(self):
        with pytest.raises(NotARotationError):
            check_rotation(np.diag([1.0, 1.0, -1.0]))
        with pytest.raises(NotARotationError):
            check_rotation(1.001 * np.eye(3))
        with pytest.raises(DimensionMismatchError):
            check_rotation(np.eye(2))

    def test_projection(self, rng):
        R = exp_vec(rng.normal(size=3)) + 1e-6 * rng.normal(size=(3, 3))
        P = project_to_so3(R)
        ortho, det = rotation_defect(P)
        assert ortho < 1e-14 and det < 1e-14
        assert np.abs(P - R).max() < 1e-5

    def test_wrap_angle(self):
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(3 * math.pi) == pytest.approx(math.pi)
        assert wrap_angle(0.5) == 0.5


class TestSE2:
    def test_translations(self):
        g = se2_compose(PlanarPose(1.0, 0.0, 0.0), PlanarPose(0.0, 1.0, 0.0))
        assert (g.x, g.y, g.theta) == (1.0, 1.0, 0.0)

    def test_inverse(self):
        g = se2_inverse(PlanarPose(1.0, 2.0, math.pi / 2))
        np.testing.assert_allclose([g.x, g.y, g.theta], [-2.0, 1.0, -math.pi / 2], atol=1e-15)
        M = np.linalg.inv(PlanarPose(1.0, 2.0, math.pi / 2).matrix())
        np.testing.assert_allclose(g.matrix(), M, atol=1e-15)

    def test_identity_and_inverse(self, rng):
        for _ in range(50):
            h = PlanarPose(*rng.normal(size=2), rng.uniform(-3, 3))
            e = se2_compose(h, PlanarPose.identity())
            assert (e.x, e.y, e.theta) == (h.x, h.y, h.theta)
            i = se2_compose(h, se2_inverse(h))
            np.testing.assert_allclose([i.x, i.y, i.theta], 0.0, atol=1e-12)

    def test_matches_matrix_product(self, rng):
        for _ in range(50):
            g = PlanarPose(*rng.normal(size=2), rng.uniform(-3, 3))
            h = PlanarPose(*rng.normal(size=2), rng.uniform(-3, 3))
            np.testing.assert_allclose(se2_compose(g, h).matrix(), g.matrix() @ h.matrix(), atol=1e-12)

    def test_matrix_view(self):
        M = PlanarPose(0.3, -0.2, 1.1).matrix()
        np.testing.assert_array_equal(M[2], [0.0, 0.0, 1.0])
        R = M[:2, :2]
        np.testing.assert_allclose(R.T @ R, np.eye(2), atol=1e-12)
        assert abs(np.linalg.det(R) - 1.0) < 1e-12
        p = PlanarPose.from_matrix(M)
        np.testing.assert_allclose([p.x, p.y, p.theta], [0.3, -0.2, 1.1], atol=1e-15)
