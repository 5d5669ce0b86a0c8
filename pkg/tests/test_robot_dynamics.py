"""Dynamics tests against independent kinematics-based oracles.

The oracles build the kinetic and potential energy straight from link mass
center positions (forward kinematics with numeric differentiation) and never
touch the implementation's precomputed geometry matrices.
"""

import numpy as np
import pytest
from unittest import mock

import ftteleop as ft
from ftteleop import robot_dynamics

from conftest import BENCHMARK


# --- oracles ---------------------------------------------------------------


def com_positions(q):
    """Mass-center positions of the benchmark links, straight kinematics."""
    lengths = BENCHMARK["lengths"]
    offsets = BENCHMARK["com_offsets"]
    phi = np.cumsum(q)
    points = []
    base = np.zeros(2)
    for k in range(len(q)):
        direction = np.array([np.cos(phi[k]), np.sin(phi[k])])
        points.append(base + offsets[k] * direction)
        base = base + lengths[k] * direction
    return np.array(points)


def kinetic_oracle(q, qd, h=1e-6):
    """Kinetic energy via finite-difference mass-center velocities."""
    masses = BENCHMARK["masses"]
    inertias = BENCHMARK["inertias"]
    vel = (com_positions(q + h * qd) - com_positions(q - h * qd)) / (2 * h)
    omega = np.cumsum(qd)
    energy = 0.0
    for k in range(len(q)):
        energy += 0.5 * masses[k] * vel[k] @ vel[k] + 0.5 * inertias[k] * omega[k] ** 2
    return energy


def mass_oracle(q):
    """Inertia matrix entries from second differences of the kinetic energy
    (exactly quadratic in the joint velocities)."""
    n = len(q)
    m = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            ei, ej = np.eye(n)[i], np.eye(n)[j]
            m[i, j] = (kinetic_oracle(q, ei + ej) - kinetic_oracle(q, ei)
                       - kinetic_oracle(q, ej))
    return m


def potential_oracle(q, gravity=9.81):
    masses = BENCHMARK["masses"]
    return gravity * float(np.dot(masses, com_positions(q)[:, 1]))


# --- inertia ----------------------------------------------------------------


class TestMassMatrix:
    def test_benchmark_m11(self, benchmark_params):
        m = ft.mass_matrix(benchmark_params, np.array([0.7, 0.0]))
        assert m[0, 0] == pytest.approx(2.368, abs=1e-12)

    def test_benchmark_m12_at_right_angle(self, benchmark_params):
        m = ft.mass_matrix(benchmark_params, np.array([1.234, np.pi / 2]))
        assert m[0, 1] == pytest.approx(0.192, abs=1e-12)

    def test_matches_kinetic_energy_oracle(self, benchmark_params):
        rng = np.random.default_rng(3)
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 2)
            np.testing.assert_allclose(
                ft.mass_matrix(benchmark_params, q), mass_oracle(q), atol=1e-6)

    def test_symmetric_exactly(self, benchmark_params):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m = ft.mass_matrix(benchmark_params, rng.normal(size=2))
            np.testing.assert_array_equal(m, m.T)

    def test_dimension_mismatch(self, benchmark_params):
        with pytest.raises(ValueError):
            ft.mass_matrix(benchmark_params, np.zeros(3))


class TestCoriolis:
    def test_zero_velocity_gives_zero(self, benchmark_params):
        c = ft.coriolis_matrix(benchmark_params, np.array([0.4, -1.2]), np.zeros(2))
        np.testing.assert_array_equal(c, np.zeros((2, 2)))

    def test_skew_symmetry_against_fd(self, benchmark_params):
        rng = np.random.default_rng(5)
        h = 2e-6
        for _ in range(300):
            q, qd, x = rng.normal(size=(3, 2))
            c = ft.coriolis_matrix(benchmark_params, q, qd)
            m_dot = (ft.mass_matrix(benchmark_params, q + h * qd)
                     - ft.mass_matrix(benchmark_params, q - h * qd)) / (2 * h)
            defect = abs(x @ ((m_dot - 2 * c) @ x))
            assert defect < 1e-9 * (x @ x)

    def test_lagrangian_residual_oracle(self, benchmark_params):
        # C qd must equal dM/dt qd - grad_q K at zero acceleration. The
        # gradient step is larger than the oracle's internal step so its
        # finite-difference noise is not amplified.
        q = np.array([1.0, -0.4])
        qd = np.array([1.0, 1.0])
        h = 1e-6
        h_grad = 1e-4
        m_dot = (ft.mass_matrix(benchmark_params, q + h * qd)
                 - ft.mass_matrix(benchmark_params, q - h * qd)) / (2 * h)
        grad_k = np.empty(2)
        for j in range(2):
            e = np.eye(2)[j]
            grad_k[j] = (kinetic_oracle(q + h_grad * e, qd)
                         - kinetic_oracle(q - h_grad * e, qd)) / (2 * h_grad)
        expected = m_dot @ qd - grad_k
        actual = ft.coriolis_matrix(benchmark_params, q, qd) @ qd
        np.testing.assert_allclose(actual, expected, atol=1e-4)

    def test_quadratic_growth_bound(self, benchmark_params):
        rng = np.random.default_rng(6)
        gain = benchmark_params.bounds.coriolis_gain
        for _ in range(300):
            q = rng.uniform(-np.pi, np.pi, 2)
            qd = rng.normal(size=2) * rng.uniform(0.1, 5.0)
            force = ft.coriolis_matrix(benchmark_params, q, qd) @ qd
            assert np.linalg.norm(force) <= gain * (qd @ qd) * (1 + 1e-12)


class TestGravity:
    def test_horizontal_plane_is_zero(self, benchmark_params_flat):
        rng = np.random.default_rng(7)
        for _ in range(10):
            g = ft.gravity_vector(benchmark_params_flat, rng.normal(size=2))
            np.testing.assert_array_equal(g, np.zeros(2))

    def test_stretched_horizontal_configuration(self, benchmark_params):
        # both links horizontal: shoulder carries every mass lever
        m1, m2 = BENCHMARK["masses"]
        l1 = BENCHMARK["lengths"][0]
        lc1, lc2 = BENCHMARK["com_offsets"]
        expected = 9.81 * (m1 * lc1 + m2 * l1 + m2 * lc2)
        g = ft.gravity_vector(benchmark_params, np.zeros(2))
        assert g[0] == pytest.approx(expected, rel=1e-12)

    def test_matches_potential_gradient(self, benchmark_params):
        rng = np.random.default_rng(8)
        h = 1e-6
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 2)
            grad = np.empty(2)
            for j in range(2):
                e = np.eye(2)[j]
                grad[j] = (potential_oracle(q + h * e) - potential_oracle(q - h * e)) / (2 * h)
            np.testing.assert_allclose(ft.gravity_vector(benchmark_params, q), grad, atol=1e-6)

    def test_caps_hold_on_dense_grid(self, benchmark_params):
        caps = benchmark_params.bounds.gravity_caps
        axis = np.linspace(-np.pi, np.pi, 73)
        worst = np.zeros(2)
        for q1 in axis:
            for q2 in axis:
                worst = np.maximum(worst, np.abs(
                    ft.gravity_vector(benchmark_params, np.array([q1, q2]))))
        assert np.all(worst <= caps)


class TestForwardDynamics:
    def test_static_equilibrium(self, benchmark_params):
        q = np.array([0.9, -0.3])
        state = ft.RobotState(q=q, qdot=np.zeros(2))
        tau = ft.gravity_vector(benchmark_params, q)
        acc = ft.forward_dynamics(benchmark_params, state, tau)
        np.testing.assert_array_equal(acc, np.zeros(2))

    def test_rest_stays_at_rest_without_gravity(self, benchmark_params_flat):
        state = ft.RobotState(q=np.array([0.2, 0.4]), qdot=np.zeros(2))
        acc = ft.forward_dynamics(benchmark_params_flat, state, np.zeros(2))
        np.testing.assert_array_equal(acc, np.zeros(2))

    def test_matches_linear_solve_oracle(self, benchmark_params_flat):
        q = np.array([1.0, -0.4])
        state = ft.RobotState(q=q, qdot=np.zeros(2))
        tau = np.array([1.0, 0.0])
        expected = np.linalg.solve(mass_oracle(q), tau)
        acc = ft.forward_dynamics(benchmark_params_flat, state, tau)
        np.testing.assert_allclose(acc, expected, atol=1e-5)

    def test_residual_is_algebraically_zero(self, benchmark_params):
        rng = np.random.default_rng(9)
        for _ in range(50):
            q, qd = rng.normal(size=(2, 2))
            tau, f = rng.normal(size=(2, 2)) * 5.0
            state = ft.RobotState(q=q, qdot=qd)
            acc = ft.forward_dynamics(benchmark_params, state, tau, f)
            residual = (ft.mass_matrix(benchmark_params, q) @ acc
                        + ft.coriolis_matrix(benchmark_params, q, qd) @ qd
                        + ft.gravity_vector(benchmark_params, q) - tau - f)
            assert np.max(np.abs(residual)) < 1e-10

    def test_singular_inertia_reported(self, benchmark_params):
        state = ft.RobotState(q=np.zeros(2), qdot=np.zeros(2))
        broken = np.array([[1.0, 2.0], [2.0, 1.0]])  # indefinite
        with mock.patch.object(robot_dynamics, "mass_matrix", return_value=broken):
            with pytest.raises(ft.SingularInertiaError):
                ft.forward_dynamics(benchmark_params, state, np.zeros(2))


class TestEnergies:
    def test_rest_has_no_kinetic_energy(self, benchmark_params):
        kinetic, _ = ft.energies(benchmark_params, ft.RobotState(q=np.ones(2), qdot=np.zeros(2)))
        assert kinetic == 0.0

    def test_benchmark_value(self, benchmark_params):
        state = ft.RobotState(q=np.array([0.3, 0.0]), qdot=np.array([1.0, 0.0]))
        kinetic, _ = ft.energies(benchmark_params, state)
        assert kinetic == pytest.approx(0.5 * 2.368, abs=1e-12)

    def test_inertia_bounds_sandwich(self, benchmark_params):
        rng = np.random.default_rng(10)
        b = benchmark_params.bounds
        for _ in range(100):
            state = ft.RobotState(q=rng.uniform(-np.pi, np.pi, 2), qdot=rng.normal(size=2))
            kinetic, _ = ft.energies(benchmark_params, state)
            speed2 = state.qdot @ state.qdot
            assert 0.5 * b.inertia_min * speed2 <= kinetic <= 0.5 * b.inertia_max * speed2

    def test_potential_matches_oracle(self, benchmark_params):
        rng = np.random.default_rng(11)
        for _ in range(20):
            q = rng.uniform(-np.pi, np.pi, 2)
            _, potential = ft.energies(benchmark_params, ft.RobotState(q=q, qdot=np.zeros(2)))
            assert potential == pytest.approx(potential_oracle(q), rel=1e-10)

    def test_free_motion_energy_drift(self, benchmark_params_flat):
        # no torque, no gravity: kinetic energy is conserved along the flow
        dt, steps = 1e-4, 10_000
        q = np.array([0.3, -0.2])
        qd = np.array([1.0, 0.5])
        start = 0.5 * qd @ (ft.mass_matrix(benchmark_params_flat, q) @ qd)
        for _ in range(steps):
            state = ft.RobotState(q=q, qdot=qd)
            acc = ft.forward_dynamics(benchmark_params_flat, state, np.zeros(2))
            q = q + dt * qd
            qd = qd + dt * acc
        end = 0.5 * qd @ (ft.mass_matrix(benchmark_params_flat, q) @ qd)
        assert abs(end - start) / start < 1e-4


class TestDeriveBounds:
    def test_upper_bound_covers_known_entry(self, benchmark_params):
        # the largest eigenvalue exceeds the largest diagonal entry (2.368)
        assert benchmark_params.bounds.inertia_max >= 2.368

    def test_eigenvalues_within_bounds(self, benchmark_params):
        rng = np.random.default_rng(12)
        b = benchmark_params.bounds
        for _ in range(200):
            eigs = np.linalg.eigvalsh(
                ft.mass_matrix(benchmark_params, rng.uniform(-np.pi, np.pi, 2)))
            assert eigs[0] >= b.inertia_min
            assert eigs[-1] <= b.inertia_max

    def test_horizontal_plane_zero_gravity_caps(self, benchmark_params_flat):
        np.testing.assert_array_equal(
            benchmark_params_flat.bounds.gravity_caps, np.zeros(2))

    def test_single_pendulum_constant_inertia(self):
        params = ft.RobotParams(masses=[2.0], lengths=[0.5], com_offsets=[0.3],
                                inertias=[0.01])
        expected = 2.0 * 0.3**2 + 0.01
        assert params.bounds.inertia_min == pytest.approx(expected, rel=1e-12)
        assert params.bounds.inertia_max == pytest.approx(expected, rel=1e-12)
        assert params.bounds.inertia_min == params.bounds.inertia_max


class TestValidation:
    def test_rejects_negative_mass(self):
        with pytest.raises(ValueError, match="masses"):
            ft.RobotParams(masses=[-1.0, 1.0], lengths=[1, 1], com_offsets=[0.5, 0.5],
                           inertias=[0.1, 0.1])

    def test_rejects_com_beyond_link(self):
        with pytest.raises(ValueError, match="com_offsets"):
            ft.RobotParams(masses=[1.0], lengths=[0.5], com_offsets=[0.6], inertias=[0.1])

    def test_rejects_weak_actuators(self):
        # limits below the gravity caps: cannot hold the own link weight
        with pytest.raises(ValueError, match="torque limit"):
            ft.RobotParams(**BENCHMARK, torque_limits=[5.0, 5.0])

    def test_accepts_strong_actuators(self):
        params = ft.RobotParams(**BENCHMARK, torque_limits=[40.0, 16.0])
        assert np.all(params.torque_limits > params.bounds.gravity_caps)

    def test_state_rejects_non_finite(self):
        with pytest.raises(ValueError):
            ft.RobotState(q=[np.nan, 0.0], qdot=[0.0, 0.0])

    def test_state_rejects_length_mismatch(self):
        with pytest.raises(ValueError):
            ft.RobotState(q=[0.0, 0.0], qdot=[0.0])
