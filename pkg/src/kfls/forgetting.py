"""Forgetting strategies as producers of covariance-space forgetting.

Each strategy yields the covariance inflation Sigma_forget,k consumed by
the adaptive filter's prior update (the identity-dynamics form; the
filter conjugates by A_k afterwards).  Also implements the robust
variable-forgetting-factor estimator that drives the rate-based
strategies from innovation statistics.
"""

from __future__ import annotations

import abc
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .exceptions import SingularMatrixError, StrategyParameterError
from .spd import (
    Definiteness,
    SpdMatrix,
    as_matrix,
    check_definiteness,
    spd_inverse,
    symmetrize,
)

SIGMA_PSD_TOL = 1e-9


def _check_rate(lam: float, what: str = "forgetting factor") -> float:
    lam = float(lam)
    if not 0.0 < lam <= 1.0:
        raise StrategyParameterError(f"{what} must be in (0, 1], got {lam}")
    return lam


class ForgettingStrategy(abc.ABC):
    """Rule producing the forgetting covariance from filter state and data."""

    @abc.abstractmethod
    def sigma_forget(self, k: int, p: np.ndarray, c: np.ndarray, *, state=None, innovation=None) -> np.ndarray:
        """Raw (unvalidated) forgetting covariance for step k."""

    def rate(self, k: int) -> Optional[float]:
        """Scalar forgetting factor for step k, when the strategy has one."""
        return None


@dataclass(frozen=True)
class NoForgetting(ForgettingStrategy):
    """Plain recursive least squares: no forgetting."""

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        return np.zeros_like(p)


@dataclass(frozen=True)
class ExponentialForgetting(ForgettingStrategy):
    """Constant-factor exponential forgetting: Sigma = (1/lam - 1) P."""

    lam: float

    def __post_init__(self):
        _check_rate(self.lam)

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        return (1.0 / self.lam - 1.0) * p

    def rate(self, k):
        return self.lam


@dataclass(frozen=True)
class VariableRateForgetting(ForgettingStrategy):
    """Per-step factor lam_k from a provider: Sigma = (1/lam_k - 1) P."""

    rate_provider: Callable[[int], float] = field(repr=False)

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        return (1.0 / self.rate(k) - 1.0) * p

    def rate(self, k):
        return _check_rate(self.rate_provider(k), f"forgetting factor at step {k}")


@dataclass(frozen=True)
class DataDependentForgetting(ForgettingStrategy):
    """Forgetting driven by a weight sequence mu_k in [0, 1), mu_{-1} = 1.

    Sigma_k = ( mu_k / ((1 - mu_k) mu_{k-1}) - 1 ) P_k.
    """

    mu_provider: Callable[[int], float] = field(repr=False)

    def _mu(self, k: int) -> float:
        if k < 0:
            return 1.0
        mu = float(self.mu_provider(k))
        if not 0.0 <= mu < 1.0:
            raise StrategyParameterError(f"mu_{k} must be in [0, 1), got {mu}")
        return mu

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        mu_k = self._mu(k)
        mu_prev = self._mu(k - 1)
        if mu_prev == 0.0:
            raise StrategyParameterError(f"mu_{k - 1} = 0 makes the forgetting weight undefined")
        factor = mu_k / ((1.0 - mu_k) * mu_prev) - 1.0
        return factor * p


@dataclass(frozen=True)
class ExponentialResetting(ForgettingStrategy):
    """Exponential pull of the covariance toward a resting value P_inf.

    Sigma = (lam P^{-1} + (1 - lam) P_inf^{-1})^{-1} - P.  The factor lam
    is a required parameter: the published tuning table lists only P_inf
    but the formula needs both.
    """

    lam: float
    p_inf: SpdMatrix

    def __post_init__(self):
        _check_rate(self.lam)
        p_inf = self.p_inf if isinstance(self.p_inf, SpdMatrix) else SpdMatrix(as_matrix(self.p_inf), definite=True)
        object.__setattr__(self, "p_inf", p_inf)

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        if self.lam == 1.0:
            return np.zeros_like(p)
        blended = self.lam * spd_inverse(p) + (1.0 - self.lam) * spd_inverse(self.p_inf.entries)
        return spd_inverse(symmetrize(blended)) - p


@dataclass(frozen=True)
class CovarianceResetting(ForgettingStrategy):
    """Hard reset of the covariance to P_inf when a criterion fires.

    The criterion is a user predicate over (k, state, innovation);
    ``state`` and ``innovation`` are None when the strategy is evaluated
    outside a filter loop.
    """

    p_inf: SpdMatrix
    criterion: Callable[[int, object, object], bool] = field(repr=False)

    def __post_init__(self):
        p_inf = self.p_inf if isinstance(self.p_inf, SpdMatrix) else SpdMatrix(as_matrix(self.p_inf), definite=True)
        object.__setattr__(self, "p_inf", p_inf)

    def is_reset(self, k: int, state=None, innovation=None) -> bool:
        return bool(self.criterion(k, state, innovation))

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        if self.is_reset(k, state, innovation):
            return self.p_inf.entries - p
        return np.zeros_like(p)


@dataclass(frozen=True)
class DirectionalForgetting(ForgettingStrategy):
    """Forgetting restricted to the currently excited measurement directions.

    Sigma = ((1 - lam)/lam) C^T (C P^{-1} C^T)^{-1} C, with the inner
    matrix exactly as published (P^{-1}, not P, inside).
    """

    lam: float

    def __post_init__(self):
        _check_rate(self.lam)

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        c = np.atleast_2d(np.asarray(c, dtype=float))
        inner = c @ spd_inverse(p) @ c.T
        try:
            solved = np.linalg.solve(inner, c)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError(
                f"C P^-1 C^T is singular at step {k}; directional forgetting undefined"
            ) from exc
        return (1.0 - self.lam) / self.lam * (c.T @ solved)


@dataclass(frozen=True)
class VariableDirectionForgetting(ForgettingStrategy):
    """Direction-weighted forgetting from a per-step PD weight matrix.

    Sigma_k = Lam_k^{-1} P_k^{-1} Lam_k^{-1} - P_k.  Not every PD choice
    of Lam_k yields a valid covariance; invalid choices are rejected
    rather than projected.
    """

    weight_provider: Callable[[int], np.ndarray] = field(repr=False)

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        lam = SpdMatrix(as_matrix(self.weight_provider(k)), definite=True)
        lam_inv = spd_inverse(lam.entries)
        return lam_inv @ spd_inverse(p) @ lam_inv - p


@dataclass(frozen=True)
class RobustVffConfig:
    """Tuning constants of the robust variable-forgetting-factor rule."""

    order: int
    k_alpha: float = 2.0
    k_beta: float = 10.0
    xi: float = 1e-6
    lambda_min: float = 0.5
    lambda_max: float = 1.0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if not 0.0 < self.lambda_min <= self.lambda_max <= 1.0:
            raise ValueError("need 0 < lambda_min <= lambda_max <= 1")

    @property
    def alpha(self) -> float:
        return 1.0 - 1.0 / (self.k_alpha * self.order)

    @property
    def beta(self) -> float:
        return 1.0 - 1.0 / (self.k_beta * self.order)


@dataclass(frozen=True)
class RobustVffState:
    """Running second-moment estimates of the robust VFF rule.

    All three moments start at 1 and are updated as convex combinations,
    so they stay strictly positive.
    """

    config: RobustVffConfig
    sigma_e_sq: float = 1.0
    sigma_q_sq: float = 1.0
    sigma_v_sq: float = 1.0

    def __post_init__(self):
        if min(self.sigma_e_sq, self.sigma_q_sq, self.sigma_v_sq) <= 0.0:
            raise ValueError("moment estimates must be positive")

    @classmethod
    def initial(cls, config: RobustVffConfig) -> "RobustVffState":
        return cls(config=config)


def robust_vff_update(state: RobustVffState, innovation_e: float, q: float) -> tuple[RobustVffState, float]:
    """Advance the VFF moment estimates and produce the factor lambda_k.

    ``innovation_e`` is the scalar innovation y_k - C_k x_hat_k and ``q``
    the state excitation x_hat_k^T P_k x_hat_k (nonnegative since P_k is
    positive definite).  The short-memory innovation power sigma_e and
    the long-memory power sigma_v diverge after an impulsive change,
    which drives lambda below 1; otherwise lambda sits at lambda_max.
    """
    if q < 0.0:
        raise ValueError(f"state excitation q must be nonnegative, got {q}")
    cfg = state.config
    e_sq = float(innovation_e) ** 2
    new_e = cfg.alpha * state.sigma_e_sq + (1.0 - cfg.alpha) * e_sq
    new_q = cfg.alpha * state.sigma_q_sq + (1.0 - cfg.alpha) * float(q) ** 2
    new_v = cfg.beta * state.sigma_v_sq + (1.0 - cfg.beta) * e_sq
    new_state = RobustVffState(config=cfg, sigma_e_sq=new_e, sigma_q_sq=new_q, sigma_v_sq=new_v)

    sigma_e = math.sqrt(new_e)
    sigma_q = math.sqrt(new_q)
    sigma_v = math.sqrt(new_v)
    if sigma_e <= sigma_v:
        lam = cfg.lambda_max
    else:
        ratio = sigma_q * sigma_v / (cfg.xi + abs(sigma_e - sigma_v))
        lam = max(min(ratio, cfg.lambda_max), cfg.lambda_min)
    return new_state, lam


@dataclass(frozen=True)
class RobustVffForgetting(ForgettingStrategy):
    """Variable-rate forgetting with the factor chosen by the robust VFF rule.

    The per-step factor depends on running innovation statistics, so this
    strategy must be driven through the adaptive filter, which threads a
    :class:`RobustVffState` explicitly.
    """

    config: RobustVffConfig

    def sigma_forget(self, k, p, c, *, state=None, innovation=None):
        raise TypeError(
            "RobustVffForgetting needs a threaded RobustVffState; "
            "run it through adaptive_step"
        )


def forgetting_sigma(strategy: ForgettingStrategy, k: int, p_k, c_k, *, state=None, innovation=None) -> SpdMatrix:
    """Validated forgetting covariance produced by a strategy at step k.

    The raw strategy output is symmetrized and must classify positive
    (semi)definite; anything else signals an invalid parameter choice
    (e.g. a resting covariance smaller than the current one) and raises
    :class:`StrategyParameterError`.
    """
    p = as_matrix(p_k)
    c = np.atleast_2d(np.asarray(c_k, dtype=float))
    raw = symmetrize(strategy.sigma_forget(k, p, c, state=state, innovation=innovation))
    if check_definiteness(raw, SIGMA_PSD_TOL) is Definiteness.INDEFINITE:
        raise StrategyParameterError(
            f"{type(strategy).__name__} produced a non-PSD forgetting covariance at step {k}"
        )
    return SpdMatrix(raw, tol=SIGMA_PSD_TOL)
