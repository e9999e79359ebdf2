import math

import numpy as np
import pytest

from spherecar.exceptions import (
    ConstraintError,
    DiscretizationError,
    PoleSingularityError,
    SpeedZeroError,
    SteeringSingularityError,
)
from spherecar.integrators import IntegratorConfig
from spherecar.lie import E1, E2, E3, PlanarPose, exp_so3, hat, random_rotation
from spherecar.models import (
    CarGeometry,
    arclength_rate,
    config_from_position,
    curvature_split_check,
    effective_wheelbase,
    flat_parametrization,
    frames_from_curve,
    geodesic_curvature,
    planar_arclength_rate,
    planar_rate,
    planar_trajectory,
    position_rotation,
    spherical_body_velocity,
    spherical_open_loop,
    spherical_rate,
    steering_from_curvature,
)
from spherecar.reference import LatitudeCircle

GEOM = CarGeometry(l=1.0, r=0.5, rho=10.0)
# l = pi/2, rho = 1 puts the central angle at pi/2, so ell = 1
UNIT_ELL = CarGeometry(l=math.pi / 2, r=0.0, rho=1.0)


class TestGeometry:
    def test_effective_wheelbase(self):
        lam, ell = effective_wheelbase(GEOM)
        assert lam == pytest.approx(0.09523809523809523, abs=1e-15)
        assert ell == pytest.approx(0.9509419, abs=1e-6)
        assert ell == pytest.approx(10.0 * math.sin(1.0 / 10.5), abs=1e-15)

    def test_planar_limit(self):
        assert abs(CarGeometry(1.0, 0.0, 1e6).ell - 1.0) < 1e-6

    def test_quarter_circle(self):
        geom = CarGeometry(1.0, 0.0, 2.0 / math.pi)
        lam, ell = effective_wheelbase(geom)
        assert lam == pytest.approx(math.pi / 2, abs=1e-15)
        assert ell == pytest.approx(geom.rho, abs=1e-15)

    def test_ell_below_wheelbase(self):
        for rho in (1.0, 10.0, 100.0):
            assert 0.0 < CarGeometry(1.0, 0.2, rho).ell < 1.0

    @pytest.mark.parametrize("l, r, rho", [(0.0, 0.0, 1.0), (1.0, -0.1, 1.0), (1.0, 0.0, -1.0)])
    def test_invalid(self, l, r, rho):
        with pytest.raises(ValueError):
            CarGeometry(l, r, rho)


class TestPlanar:
    def test_straight(self):
        np.testing.assert_array_equal(planar_rate(PlanarPose(0, 0, 0), 1.0, 0.0, 1.0), [1.0, 0.0, 0.0])

    def test_turning(self):
        rate = planar_rate(PlanarPose(0, 0, math.pi / 2), 2.0, math.pi / 4, 1.0)
        np.testing.assert_allclose(rate, [0.0, 2.0, 2.0], atol=1e-15)

    def test_standstill(self):
        np.testing.assert_array_equal(planar_rate(PlanarPose(1, 2, 0.3), 0.0, 0.2, 1.0), np.zeros(3))

    def test_arclength(self):
        np.testing.assert_array_equal(planar_arclength_rate(PlanarPose(0, 0, 0), 0.0, 1.0)[2], 0.0)
        assert planar_arclength_rate(PlanarPose(0, 0, 0), math.pi / 4, 1.0)[2] == pytest.approx(1.0)

    def test_chain_rule(self):
        state = PlanarPose(0.4, -1.0, 0.7)
        np.testing.assert_allclose(planar_rate(state, 3.0, 0.2, 1.5) / 3.0,
                                   planar_arclength_rate(state, 0.2, 1.5), atol=1e-15)

    def test_steering_singularity(self):
        with pytest.raises(SteeringSingularityError):
            planar_rate(PlanarPose(0, 0, 0), 1.0, math.pi / 2, 1.0)

    def test_circle(self):
        s = np.linspace(0.0, 2.0 * math.pi, 9)
        traj = planar_trajectory(PlanarPose(0, 0, 0), lambda s: math.pi / 4, 1.0, s)
        np.testing.assert_allclose(traj[:, 0], np.sin(s), atol=1e-10)
        np.testing.assert_allclose(traj[:, 1], 1.0 - np.cos(s), atol=1e-10)


class TestConfigFromPosition:
    def test_north_pole(self):
        np.testing.assert_array_equal(config_from_position([0, 0, 2.0], 0.0, 2.0), np.eye(3))

    def test_north_pole_heading(self):
        np.testing.assert_allclose(config_from_position([0, 0, 1.0], math.pi / 2, 1.0),
                                   exp_so3(E3, math.pi / 2), atol=1e-15)

    def test_on_equator(self):
        np.testing.assert_allclose(position_rotation(E1), exp_so3(E2, math.pi / 2), atol=1e-15)
        g = config_from_position([3.0, 0, 0], 0.0, 3.0)
        np.testing.assert_allclose(g[:, 2], E1, atol=1e-15)

    def test_beta_column(self, rng):
        for _ in range(100):
            b = rng.normal(size=3)
            y = 5.0 * b / np.linalg.norm(b)
            g = config_from_position(y, rng.uniform(-3, 3), 5.0)
            np.testing.assert_allclose(g[:, 2], y / 5.0, atol=1e-12)

    def test_south_pole(self):
        with pytest.raises(PoleSingularityError):
            config_from_position([0, 0, -1.0], 0.0, 1.0)

    def test_off_sphere(self):
        with pytest.raises(ConstraintError):
            config_from_position([0, 0, 1.0 + 1e-6], 0.0, 1.0)


class TestSphericalModel:
    def test_standstill(self):
        np.testing.assert_array_equal(spherical_body_velocity(0.0, 0.3, GEOM), np.zeros(3))

    def test_great_circle_rate(self):
        np.testing.assert_array_equal(spherical_body_velocity(1.0, 0.0, CarGeometry(1.0, 0.0, 1.0)), [0, 1, 0])

    def test_turning_rate(self):
        w = spherical_body_velocity(1.0, math.pi / 4, GEOM)
        np.testing.assert_allclose(w, [0.0, 0.1, 1.051589], atol=1e-6)
        assert w[2] == pytest.approx(1.0 / GEOM.ell, rel=1e-15)

    def test_identity_configuration(self):
        np.testing.assert_array_equal(spherical_rate(np.eye(3), 1.0, 0.0, CarGeometry(1.0, 0.0, 1.0)), hat(E2))

    def test_tangent_to_group(self, rotations):
        for g in rotations:
            X = g.T @ spherical_rate(g, 1.3, 0.4, GEOM)
            assert np.abs(X + X.T).max() < 1e-12

    def test_left_invariance(self, rotations):
        g, h = rotations[0], rotations[1]
        np.testing.assert_allclose(spherical_rate(h @ g, 0.7, -0.2, GEOM), h @ spherical_rate(g, 0.7, -0.2, GEOM),
                                   atol=1e-14)

    def test_arclength_rate(self, rotations):
        g = rotations[2]
        np.testing.assert_array_equal(arclength_rate(g, 1.0, 0.3, GEOM), spherical_rate(g, 1.0, 0.3, GEOM))
        np.testing.assert_array_equal(arclength_rate(g, 0.0, 0.3, GEOM), np.zeros((3, 3)))
        np.testing.assert_allclose(arclength_rate(g, 2.0, 0.3, GEOM), 2.0 * arclength_rate(g, 1.0, 0.3, GEOM),
                                   atol=1e-15)

    def test_steering_singularity(self):
        with pytest.raises(SteeringSingularityError):
            spherical_body_velocity(1.0, -math.pi / 2, GEOM)


class TestFrames:
    def test_equator(self):
        tau, nu, beta, v = frames_from_curve([2.0, 0, 0], [0, 3.0, 0], 2.0)
        np.testing.assert_allclose(np.column_stack([tau, nu, beta]), [[0, 0, 1], [1, 0, 0], [0, 1, 0]], atol=1e-15)
        assert v == 3.0

    def test_north_pole(self):
        tau, nu, beta, _ = frames_from_curve([0, 0, 1.0], [0.5, 0, 0], 1.0)
        np.testing.assert_allclose(np.column_stack([tau, nu, beta]), np.eye(3), atol=1e-15)

    def test_orthonormal(self, rng):
        for _ in range(100):
            b = rng.normal(size=3)
            b /= np.linalg.norm(b)
            d = np.cross(b, rng.normal(size=3))
            g = np.column_stack(frames_from_curve(4.0 * b, d, 4.0)[:3])
            np.testing.assert_allclose(g.T @ g, np.eye(3), atol=1e-12)
            assert np.linalg.det(g) == pytest.approx(1.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(SpeedZeroError):
            frames_from_curve([0, 0, 1.0], [0, 0, 0], 1.0)
        with pytest.raises(ConstraintError):
            frames_from_curve([0, 0, 1.1], [1.0, 0, 0], 1.0)
        with pytest.raises(ConstraintError):
            frames_from_curve([0, 0, 1.0], [1.0, 0, 0.1], 1.0)


class TestCurvature:
    def test_geodesic_curvature(self):
        assert geodesic_curvature(0.0, GEOM) == 0.0
        assert UNIT_ELL.ell == pytest.approx(1.0, abs=1e-15)
        assert geodesic_curvature(math.pi / 4, UNIT_ELL) == pytest.approx(1.0, abs=1e-15)

    def test_inverse(self, rng):
        for phi in rng.uniform(-1.5, 1.5, 50):
            assert abs(steering_from_curvature(geodesic_curvature(phi, GEOM), GEOM) - phi) < 1e-14

    def test_split_great_circle(self):
        rho, h = 3.0, 1e-3
        a = np.arange(200) * h / rho
        y = rho * np.column_stack([np.cos(a), np.sin(a), np.zeros_like(a)])
        chk = curvature_split_check(y, h, rho)
        np.testing.assert_allclose(chk.kappa_g, 0.0, atol=1e-9)
        np.testing.assert_allclose(chk.kappa, 1.0 / rho, atol=1e-6)
        assert chk.residual.max() < 1e-6

    def test_split_latitude_circle(self):
        ref = LatitudeCircle(0.6, 2.0)
        h = 1e-3
        y = np.array([2.0 * ref.sample(k * h).g[:, 2] for k in range(100)])
        chk = curvature_split_check(y, h, 2.0)
        np.testing.assert_allclose(chk.kappa_g, 1.0 / (math.tan(0.6) * 2.0), atol=1e-6)
        assert chk.residual.max() < 1e-6

    def test_split_simulated(self):
        h = 1e-4
        s = np.arange(400) * h
        traj = spherical_open_loop(np.eye(3), lambda s: 1.0, lambda s: 0.3, GEOM, s, IntegratorConfig(step=h))
        chk = curvature_split_check(GEOM.rho * traj[:, :, 2], h, GEOM.rho)
        np.testing.assert_allclose(chk.kappa_g, math.tan(0.3) / GEOM.ell, atol=1e-6)
        assert chk.residual.max() < 1e-6

    def test_coarse_step_reported(self):
        rho, h = 1.0, 0.2
        a = np.arange(20) * h
        y = rho * np.column_stack([np.cos(a), np.sin(a), np.zeros_like(a)])
        with pytest.raises(DiscretizationError):
            curvature_split_check(y, h, rho)


class TestFlatness:
    def test_equator(self):
        rho = 2.0
        flat = flat_parametrization([rho, 0, 0], [0, 1.0, 0], [-1.0 / rho, 0, 0], CarGeometry(1.0, 0.0, rho))
        assert flat.kappa_g == 0.0 and flat.phi == 0.0 and flat.v == 1.0
        np.testing.assert_allclose(flat.g, np.column_stack(frames_from_curve([rho, 0, 0], [0, 1.0, 0], rho)[:3]))

    def test_latitude_circle(self):
        geom = CarGeometry(1.0, 0.3, 1.0)
        ref = LatitudeCircle(math.pi / 4, 1.0)
        g = ref.sample(0.0).g
        # unit-speed derivatives of the circle of radius sin(psi)
        y = g[:, 2]
        ydd = -(y - np.array([0, 0, y[2]])) / math.sin(math.pi / 4) ** 2
        flat = flat_parametrization(y, g[:, 0], ydd, geom)
        assert flat.kappa_g == pytest.approx(1.0, abs=1e-14)
        assert flat.phi == pytest.approx(math.atan(geom.ell), abs=1e-14)

    def test_speed_zero(self):
        with pytest.raises(SpeedZeroError):
            flat_parametrization([0, 0, 1.0], [0, 0, 0], [0, 0, 0], CarGeometry(1.0, 0.0, 1.0))

    def test_replay_short(self):
        geom = CarGeometry(1.0, 0.3, 1.0)
        ref = LatitudeCircle(math.pi / 4, 1.0)
        s = np.linspace(0.0, 1.0, 11)
        phi = math.atan(geom.ell * ref.kappa)
        traj = spherical_open_loop(ref.sample(0).g, lambda s: 1.0, lambda s: phi, geom, s, IntegratorConfig(step=1e-3))
        err = max(np.abs(traj[i][:, 2] - ref.sample(si).g[:, 2]).max() for i, si in enumerate(s))
        assert err < 1e-10

    def test_random_rotation_helper(self, rng):
        g = random_rotation(rng, 0.1)
        assert np.arccos((np.trace(g) - 1) / 2) < 0.1
