"""Tests for the ground-truth simulation and ZOH discretization."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from kfls.msd import MsdParams, Trajectory, discretize_zoh, measure, simulate_truth

# Printed nominal discretization of the reference plant (4 significant figures).
PRINTED_A_D = np.array([[0.9975, 0.09843], [-0.04922, 0.9680]])
PRINTED_B_D = np.array([4.948e-4, 9.843e-3])


def agrees_to_sig_figs(computed: float, printed: float, figs: int = 4) -> bool:
    scale = math.floor(math.log10(abs(printed)))
    return abs(computed - printed) <= 0.5 * 10.0 ** (scale - figs + 1)


def _series_zoh(a_c, b_c, ts, terms=60):
    """Taylor-series oracle for the ZOH pair."""
    n = a_c.shape[0]
    a_d = np.zeros((n, n))
    integral = np.zeros((n, n))
    power = np.eye(n)
    fact = 1.0
    for j in range(terms):
        a_d += power * ts**j / fact
        integral += power * ts ** (j + 1) / (fact * (j + 1))
        power = power @ a_c
        fact *= j + 1
    return a_d, integral @ b_c


class TestDiscretizeZoh:
    def test_zero_dynamics(self):
        a_d, b_d = discretize_zoh(np.zeros((2, 2)), np.zeros((2, 1)), 0.1)
        np.testing.assert_allclose(a_d, np.eye(2))
        np.testing.assert_allclose(b_d, np.zeros((2, 1)))

    def test_reference_plant_matches_printed_values(self):
        a_d, b_d = MsdParams().discrete_system()
        for computed, printed in zip(a_d.ravel(), PRINTED_A_D.ravel()):
            assert agrees_to_sig_figs(computed, printed), (computed, printed)
        for computed, printed in zip(b_d.ravel(), PRINTED_B_D.ravel()):
            assert agrees_to_sig_figs(computed, printed), (computed, printed)

    def test_scalar_closed_form(self):
        a_d, b_d = discretize_zoh([[-1.0]], [[1.0]], 0.1)
        assert a_d[0, 0] == pytest.approx(math.exp(-0.1), rel=1e-12)
        assert b_d[0, 0] == pytest.approx(1.0 - math.exp(-0.1), rel=1e-12)

    def test_semigroup_property(self):
        a_c, b_c = MsdParams().continuous_system()
        a1, _ = discretize_zoh(a_c, b_c, 0.1)
        a2, _ = discretize_zoh(a_c, b_c, 0.2)
        assert np.linalg.norm(a2 - a1 @ a1) / np.linalg.norm(a2) < 1e-10

    def test_matches_series_oracle(self):
        rng = np.random.default_rng(0)
        for n in (2, 3):
            a_c = rng.normal(size=(n, n))
            b_c = rng.normal(size=(n, 1))
            a_d, b_d = discretize_zoh(a_c, b_c, 0.1)
            a_ref, b_ref = _series_zoh(a_c, b_c, 0.1)
            np.testing.assert_allclose(a_d, a_ref, rtol=0, atol=1e-12)
            np.testing.assert_allclose(b_d, b_ref, rtol=0, atol=1e-12)

    def test_nonpositive_sampling_time_rejected(self):
        with pytest.raises(ValueError):
            discretize_zoh(np.zeros((1, 1)), np.zeros((1, 1)), 0.0)


class TestSimulateTruth:
    def test_equilibrium_stays_at_origin(self):
        params = MsdParams(force=lambda t: 0.0, x0=(0.0, 0.0))
        traj = simulate_truth(params, t_end=2.0)
        np.testing.assert_allclose(traj.states, 0.0, atol=1e-14)

    def test_matches_analytic_forced_response_without_wall(self):
        # Augmenting the state with a sin/cos oscillator turns the forced
        # system into an autonomous LTI one, solvable exactly by a matrix
        # exponential.
        params = MsdParams(wall_position=1e9)
        m, k, c = params.mass, params.spring, params.damping
        a_aug = np.array(
            [
                [0.0, 1.0, 0.0, 0.0],
                [-k / m, -c / m, 10.0 / m, 0.0],
                [0.0, 0.0, 0.0, 1.0],
                [0.0, 0.0, -1.0, 0.0],
            ]
        )
        x_aug0 = np.array([params.x0[0], params.x0[1], 0.0, 1.0])
        traj = simulate_truth(params, t_end=10.0)
        for idx, t in enumerate(traj.times):
            exact = expm(a_aug * t) @ x_aug0
            assert abs(traj.states[idx, 0] - exact[0]) < 1e-6
            assert abs(traj.states[idx, 1] - exact[1]) < 1e-6
        assert traj.collision_times == ()

    def test_reference_run_collides_and_respects_wall(self):
        params = MsdParams()
        traj = simulate_truth(params, t_end=20.0)
        assert len(traj.collision_times) >= 1
        assert traj.displacement.max() <= params.wall_position + 1e-9
        # The velocity flips sign across every collision instant.
        for t_c in traj.collision_times:
            before = traj.velocity[traj.times < t_c][-1]
            after = traj.velocity[traj.times > t_c][0]
            assert before > 0.0
            assert after < 0.0

    def test_collisions_preserve_energy_without_damping(self):
        # With no damping and no force the total energy is invariant, so a
        # reflection that failed to preserve speed would show up as an
        # energy jump at each collision.
        params = MsdParams(
            damping=0.0, force=lambda t: 0.0, wall_position=0.5, x0=(0.0, 2.0)
        )
        traj = simulate_truth(params, t_end=10.0)
        assert len(traj.collision_times) >= 1
        energy = 0.5 * (params.spring * traj.displacement**2 + params.mass * traj.velocity**2)
        drift = np.abs(energy - energy[0]) / energy[0]
        assert drift.max() < 1e-7

    def test_energy_decreases_under_damping_without_force(self):
        params = MsdParams(force=lambda t: 0.0, x0=(-1.0, 1.0))
        traj = simulate_truth(params, t_end=10.0)
        energy = 0.5 * (params.spring * traj.displacement**2 + params.mass * traj.velocity**2)
        assert np.all(np.diff(energy) <= 1e-7)

    def test_substep_larger_than_sampling_rejected(self):
        with pytest.raises(ValueError):
            simulate_truth(MsdParams(), t_end=1.0, substep=0.2)

    def test_initial_state_beyond_wall_rejected(self):
        with pytest.raises(ValueError):
            simulate_truth(MsdParams(x0=(3.0, 0.0)), t_end=1.0)


class TestMeasure:
    def test_noiseless_limit(self):
        traj = simulate_truth(MsdParams(), t_end=2.0)
        y = measure(traj, gamma=1e-30, seed=3)
        np.testing.assert_allclose(y, traj.displacement + traj.velocity, rtol=0, atol=1e-10)

    def test_fixed_seed_is_deterministic(self):
        traj = simulate_truth(MsdParams(), t_end=2.0)
        np.testing.assert_array_equal(measure(traj, 0.01, seed=5), measure(traj, 0.01, seed=5))
        assert not np.array_equal(measure(traj, 0.01, seed=5), measure(traj, 0.01, seed=6))

    def test_noise_variance_matches_request(self):
        n = 100_000
        silent = Trajectory(
            times=np.arange(n) * 0.1, states=np.zeros((n, 2)), collision_times=()
        )
        y = measure(silent, gamma=0.01, seed=11)
        assert abs(np.var(y) - 0.01) < 0.05 * 0.01

    def test_nonpositive_variance_rejected(self):
        traj = simulate_truth(MsdParams(), t_end=1.0)
        with pytest.raises(ValueError):
            measure(traj, gamma=0.0, seed=0)
