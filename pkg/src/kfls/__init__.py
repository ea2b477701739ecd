"""Kalman filtering with least-squares forgetting.

State estimation for discrete-time LTV systems built around a
forgetting-matrix least-squares recursion: reference Kalman filter
steps, conversions between forgetting matrices and process noise
covariances, a family of forgetting strategies, adaptive Kalman filters,
and the mass-spring-damper collision experiment that exercises them.
"""

__version__ = "0.1.0"

from .adaptive import AdaptiveKfConfig, AdaptiveStepResult, adaptive_step
from .core import (
    KflsHistory,
    QuadraticForm,
    batch_minimize,
    batch_quadratic,
    check_condition_17,
    f_from_sigma,
    kfls_cost,
    kfls_step,
    recursive_states,
    sigma_from_f,
)
from .forgetting import (
    CovarianceResetting,
    DataDependentForgetting,
    DirectionalForgetting,
    ExponentialForgetting,
    ExponentialResetting,
    ForgettingStrategy,
    NoForgetting,
    RobustVffConfig,
    RobustVffForgetting,
    RobustVffState,
    VariableDirectionForgetting,
    VariableRateForgetting,
    forgetting_sigma,
    robust_vff_update,
)
from .kalman import FilterState, NoiseSpec, StepDiagnostics, kf_one_step, kf_two_step
from .ltv import InputHistory, LtvModel, TransitionMatrix, input_stack_effect, phi, transition
from .msd import MsdParams, Trajectory, discretize_zoh, measure, simulate_truth
from .spd import Definiteness, SpdMatrix, check_definiteness, inversion_lemma, spd_inverse, symmetrize

__all__ = [
    "AdaptiveKfConfig",
    "AdaptiveStepResult",
    "CovarianceResetting",
    "DataDependentForgetting",
    "Definiteness",
    "DirectionalForgetting",
    "ExponentialForgetting",
    "ExponentialResetting",
    "FilterState",
    "ForgettingStrategy",
    "InputHistory",
    "KflsHistory",
    "LtvModel",
    "MsdParams",
    "NoForgetting",
    "NoiseSpec",
    "QuadraticForm",
    "RobustVffConfig",
    "RobustVffForgetting",
    "RobustVffState",
    "SpdMatrix",
    "StepDiagnostics",
    "Trajectory",
    "TransitionMatrix",
    "VariableDirectionForgetting",
    "VariableRateForgetting",
    "adaptive_step",
    "batch_minimize",
    "batch_quadratic",
    "check_condition_17",
    "check_definiteness",
    "discretize_zoh",
    "f_from_sigma",
    "forgetting_sigma",
    "input_stack_effect",
    "inversion_lemma",
    "kf_one_step",
    "kf_two_step",
    "kfls_cost",
    "kfls_step",
    "measure",
    "phi",
    "recursive_states",
    "robust_vff_update",
    "sigma_from_f",
    "simulate_truth",
    "spd_inverse",
    "symmetrize",
    "transition",
]
