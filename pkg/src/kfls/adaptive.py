"""Adaptive Kalman filter with forgetting-based prior covariance inflation.

A standard two-step Kalman filter whose prior covariance update is
replaced by the pair

    P_forget,k  = P_k + Sigma_forget,k
    P_{k+1|k}   = A_k P_forget,k A_k^T + Sigma_Kalman,k

where Sigma_forget,k comes from a forgetting strategy and Sigma_Kalman,k
from conventional tuning.

Step ordering: the forgetting factor of a rate-based strategy is computed
once per step, before the covariance inflation, from the *posterior*
innovation y_k - C_k x_hat_k and excitation x_hat_k^T P_k x_hat_k.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import linalg

from .exceptions import NumericalError
from .forgetting import (
    CovarianceResetting,
    ForgettingStrategy,
    RobustVffForgetting,
    RobustVffState,
    forgetting_sigma,
    robust_vff_update,
)
from .kalman import FilterState, StepDiagnostics, _check_signals
from .ltv import LtvModel
from .spd import SpdMatrix, as_matrix, symmetrize

CovarianceProvider = Callable[[int], np.ndarray]


def _as_provider(value: Union[CovarianceProvider, np.ndarray, SpdMatrix, float]) -> CovarianceProvider:
    if callable(value):
        return value
    fixed = as_matrix(value)
    return lambda k: fixed


@dataclass(frozen=True)
class AdaptiveKfConfig:
    """Forgetting strategy plus per-step noise covariance providers."""

    strategy: ForgettingStrategy
    sigma_kalman_provider: CovarianceProvider = field(repr=False)
    gamma_provider: CovarianceProvider = field(repr=False)

    @classmethod
    def constant(cls, strategy: ForgettingStrategy, sigma_kalman, gamma) -> "AdaptiveKfConfig":
        return cls(
            strategy=strategy,
            sigma_kalman_provider=_as_provider(sigma_kalman),
            gamma_provider=_as_provider(gamma),
        )

    def sigma_kalman(self, k: int) -> np.ndarray:
        return SpdMatrix(as_matrix(self.sigma_kalman_provider(k))).entries

    def gamma(self, k: int) -> np.ndarray:
        return SpdMatrix(as_matrix(self.gamma_provider(k)), definite=True).entries


@dataclass(frozen=True)
class AdaptiveStepResult:
    state: FilterState
    diagnostics: StepDiagnostics
    lam: Optional[float]
    vff: Optional[RobustVffState]


def adaptive_step(
    state: FilterState,
    model: LtvModel,
    config: AdaptiveKfConfig,
    vff: Optional[RobustVffState],
    u,
    y,
) -> AdaptiveStepResult:
    """One adaptive filter step consuming (u_k, y_k).

    Rate-based strategies report the factor lambda_k used this step; the
    robust-VFF strategy additionally threads its updated moment state
    through the returned result.
    """
    u, y = _check_signals(model, u, y)
    k = state.step
    a, b, c = model.system(k)
    p = state.P.entries
    strategy = config.strategy

    innovation_pre = y - c @ state.x_hat
    lam: Optional[float] = None
    new_vff = vff
    if isinstance(strategy, RobustVffForgetting):
        if vff is None:
            raise ValueError("RobustVffForgetting requires an initial RobustVffState")
        if model.p != 1:
            raise ValueError("the robust VFF rule is defined for scalar measurements")
        q = float(state.x_hat @ p @ state.x_hat)
        new_vff, lam = robust_vff_update(vff, float(innovation_pre[0]), q)
        sigma_forget = (1.0 / lam - 1.0) * p
        p_forget = p + sigma_forget
    else:
        sigma_forget = forgetting_sigma(
            strategy, k, p, c, state=state, innovation=innovation_pre
        ).entries
        lam = strategy.rate(k)
        if isinstance(strategy, CovarianceResetting) and strategy.is_reset(k, state, innovation_pre):
            # Assign the resting covariance directly: mathematically equal
            # to P + (P_inf - P) but exact in floating point.
            p_forget = strategy.p_inf.entries.copy()
        else:
            p_forget = p + sigma_forget

    p_prior = symmetrize(a @ p_forget @ a.T + config.sigma_kalman(k))
    x_prior = a @ state.x_hat + b @ u

    s = symmetrize(c @ p_prior @ c.T + config.gamma(k))
    try:
        s_factor = linalg.cho_factor(s, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"singular innovation covariance at step {k}") from exc
    gain = linalg.cho_solve(s_factor, c @ p_prior).T
    innovation = y - c @ x_prior

    x_next = x_prior + gain @ innovation
    p_next = symmetrize(p_prior - gain @ c @ p_prior)
    next_state = FilterState(k + 1, x_next, SpdMatrix(p_next, definite=True))
    diagnostics = StepDiagnostics(x_prior, p_prior, gain, innovation)
    return AdaptiveStepResult(next_state, diagnostics, lam, new_vff)
