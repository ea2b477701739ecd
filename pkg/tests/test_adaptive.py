"""Tests for the adaptive Kalman filter with covariance-inflation forgetting."""

import numpy as np
import pytest

from kfls.adaptive import AdaptiveKfConfig, adaptive_step
from kfls.core import f_from_sigma, kfls_step
from kfls.experiment import ExperimentConfig, FilterSpec, run_experiment
from kfls.forgetting import (
    ExponentialForgetting,
    NoForgetting,
    RobustVffConfig,
    RobustVffForgetting,
    RobustVffState,
    forgetting_sigma,
)
from kfls.kalman import FilterState, NoiseSpec, kf_two_step
from kfls.ltv import LtvModel
from kfls.msd import MsdParams, measure, simulate_truth
from kfls.spd import Definiteness, check_definiteness
from kfls.verify import random_model, random_spd


class TestReductions:
    def test_no_forgetting_equals_plain_filter(self):
        rng = np.random.default_rng(0)
        model = random_model(rng, 2, 1, 1, 50)
        sigma = random_spd(rng, 2)
        gamma = random_spd(rng, 1)
        config = AdaptiveKfConfig.constant(NoForgetting(), sigma, gamma)
        noise = NoiseSpec(sigma=sigma, gamma=gamma)
        state = FilterState.initial(rng.normal(size=2), random_spd(rng, 2))
        for _ in range(50):
            u, y = rng.normal(size=1), rng.normal(size=1)
            plain, _ = kf_two_step(state, model, noise, u, y)
            result = adaptive_step(state, model, config, None, u, y)
            np.testing.assert_allclose(result.state.x_hat, plain.x_hat, rtol=0, atol=1e-12)
            np.testing.assert_allclose(result.state.P.entries, plain.P.entries, rtol=0, atol=1e-12)
            assert result.lam is None
            state = plain

    def test_exponential_half_doubles_prior_exactly(self):
        rng = np.random.default_rng(1)
        model = LtvModel.constant(np.eye(2), np.zeros((2, 1)), rng.normal(size=(1, 2)))
        config = AdaptiveKfConfig.constant(ExponentialForgetting(0.5), np.zeros((2, 2)), np.eye(1))
        state = FilterState.initial(rng.normal(size=2), random_spd(rng, 2))
        result = adaptive_step(state, model, config, None, [0.0], rng.normal(size=1))
        np.testing.assert_array_equal(result.diagnostics.P_prior, 2.0 * state.P.entries)
        assert result.lam == 0.5

    def test_reference_first_step_with_unit_factor_matches_plain_filter(self):
        # The first collision-experiment step wakes up with lambda = 1, so
        # the adaptive filter must coincide with the plain Kalman filter.
        params = MsdParams()
        a_d, b_d = params.discrete_system()
        model = LtvModel.constant(a_d, b_d, params.measurement_matrix())
        traj = simulate_truth(params, t_end=0.5)
        y = measure(traj, 0.01, seed=0)
        state = FilterState.initial([0.0, 0.0], 0.1 * np.eye(2))
        config = AdaptiveKfConfig.constant(
            RobustVffForgetting(RobustVffConfig(order=2)), 0.01 * np.eye(2), 0.01 * np.eye(1)
        )
        vff = RobustVffState.initial(RobustVffConfig(order=2))
        u0 = [params.force(0.0)]
        result = adaptive_step(state, model, config, vff, u0, [y[0]])
        assert result.lam == 1.0
        plain, _ = kf_two_step(
            state, model, NoiseSpec(sigma=0.01 * np.eye(2), gamma=0.01 * np.eye(1)), u0, [y[0]]
        )
        np.testing.assert_allclose(result.state.x_hat, plain.x_hat, rtol=0, atol=1e-12)
        np.testing.assert_allclose(result.state.P.entries, plain.P.entries, rtol=0, atol=1e-12)

    def test_static_case_equals_forgetting_recursion(self):
        # Identity dynamics, no extra noise: the adaptive filter is the
        # forgetting recursion with the converted matrix.
        rng = np.random.default_rng(2)
        c = rng.normal(size=(1, 2))
        model = LtvModel.constant(np.eye(2), np.zeros((2, 1)), c)
        gamma = random_spd(rng, 1)
        strategy = ExponentialForgetting(0.7)
        config = AdaptiveKfConfig.constant(strategy, np.zeros((2, 2)), gamma)
        state = FilterState.initial(rng.normal(size=2), random_spd(rng, 2))
        for k in range(20):
            y = rng.normal(size=1)
            sigma = forgetting_sigma(strategy, k, state.P.entries, c).entries
            f = f_from_sigma(state.P.entries, sigma, np.eye(2))
            via_f = kfls_step(state, model, f, gamma, [0.0], y)
            result = adaptive_step(state, model, config, None, [0.0], y)
            # P inflates geometrically in the unexcited direction (covariance
            # windup), so compare in relative terms.
            np.testing.assert_allclose(result.state.x_hat, via_f.x_hat, rtol=1e-10, atol=1e-12)
            np.testing.assert_allclose(result.state.P.entries, via_f.P.entries, rtol=1e-10)
            state = result.state


class TestInvariants:
    def test_forgetting_prior_dominates_plain_prior(self):
        rng = np.random.default_rng(3)
        model = random_model(rng, 2, 1, 1, 30)
        sigma_kalman = random_spd(rng, 2)
        gamma = random_spd(rng, 1)
        adaptive_config = AdaptiveKfConfig.constant(ExponentialForgetting(0.7), sigma_kalman, gamma)
        noise = NoiseSpec(sigma=sigma_kalman, gamma=gamma)
        state = FilterState.initial(rng.normal(size=2), random_spd(rng, 2))
        for _ in range(30):
            u, y = rng.normal(size=1), rng.normal(size=1)
            result = adaptive_step(state, model, adaptive_config, None, u, y)
            _, plain_diag = kf_two_step(state, model, noise, u, y)
            gap = result.diagnostics.P_prior - plain_diag.P_prior
            assert check_definiteness(gap, 1e-9) is not Definiteness.INDEFINITE
            state = result.state

    def test_posterior_definite_across_seeds(self):
        # Run the adaptive filter over the collision experiment for many
        # seeds; FilterState Cholesky-validates P at every step, and the
        # recorded marginal variances must stay positive.
        config = ExperimentConfig(
            plant=MsdParams(),
            horizon=20.0,
            seeds=tuple(range(50)),
            gamma=0.01,
            x0=np.zeros(2),
            p0=0.1 * np.eye(2),
            filters=(
                FilterSpec(
                    name="kfstar",
                    kind="adaptive",
                    sigma_kalman=0.01 * np.eye(2),
                    strategy=RobustVffForgetting(RobustVffConfig(order=2)),
                ),
            ),
        )
        result = run_experiment(config)
        for run in result.runs:
            trace = run.traces[0]
            assert trace.p_diag.min() > 0.0
            assert np.nanmin(trace.lam) >= 0.5
            assert np.nanmax(trace.lam) <= 1.0


class TestValidation:
    def test_vff_strategy_requires_threaded_state(self):
        model = LtvModel.constant(np.eye(2), np.zeros((2, 1)), np.ones((1, 2)))
        config = AdaptiveKfConfig.constant(
            RobustVffForgetting(RobustVffConfig(order=2)), np.eye(2), np.eye(1)
        )
        state = FilterState.initial(np.zeros(2), np.eye(2))
        with pytest.raises(ValueError, match="RobustVffState"):
            adaptive_step(state, model, config, None, [0.0], [0.0])

    def test_vff_strategy_requires_scalar_measurements(self):
        model = LtvModel.constant(np.eye(2), np.zeros((2, 1)), np.eye(2))
        config = AdaptiveKfConfig.constant(
            RobustVffForgetting(RobustVffConfig(order=2)), np.eye(2), np.eye(2)
        )
        state = FilterState.initial(np.zeros(2), np.eye(2))
        vff = RobustVffState.initial(RobustVffConfig(order=2))
        with pytest.raises(ValueError, match="scalar"):
            adaptive_step(state, model, config, vff, [0.0], [0.0, 0.0])

    def test_vff_strategy_cannot_run_standalone(self):
        strategy = RobustVffForgetting(RobustVffConfig(order=2))
        with pytest.raises(TypeError, match="adaptive_step"):
            forgetting_sigma(strategy, 0, np.eye(2), np.ones((1, 2)))

    def test_criterion_sees_filter_context(self):
        seen = []

        def criterion(k, state, innovation):
            seen.append((k, state is not None, innovation is not None))
            return False

        from kfls.forgetting import CovarianceResetting

        model = LtvModel.constant(np.eye(2), np.zeros((2, 1)), np.ones((1, 2)))
        config = AdaptiveKfConfig.constant(
            CovarianceResetting(p_inf=np.eye(2), criterion=criterion), np.eye(2), np.eye(1)
        )
        state = FilterState.initial(np.zeros(2), np.eye(2))
        adaptive_step(state, model, config, None, [0.0], [1.0])
        assert seen and all(has_state and has_innov for _, has_state, has_innov in seen)
