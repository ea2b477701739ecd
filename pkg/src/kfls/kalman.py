"""Reference two-step and one-step Kalman filter steps over an LtvModel.

Indexing convention
-------------------
The measurement y_k taken at step k updates the *next* estimate: a step
maps (x_hat_k, P_k) and (u_k, y_k) to (x_hat_{k+1}, P_{k+1}), and the
innovation is formed against the one-step prediction,
y_k - C_k (A_k x_hat_k + B_k u_k).  Many texts index the update at the
same step instead; all code and tests in this package follow the
convention above.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .exceptions import NumericalError
from .ltv import LtvModel
from .spd import SpdMatrix, as_matrix, spd_inverse, symmetrize


@dataclass(frozen=True)
class FilterState:
    """Posterior estimate and covariance at one step."""

    step: int
    x_hat: np.ndarray
    P: SpdMatrix

    def __post_init__(self):
        x = np.asarray(self.x_hat, dtype=float).reshape(-1).copy()
        x.flags.writeable = False
        object.__setattr__(self, "x_hat", x)
        p = self.P if isinstance(self.P, SpdMatrix) else SpdMatrix(self.P, definite=True)
        if p.dim != x.shape[0]:
            raise ValueError(f"P is {p.dim}x{p.dim} but x_hat has length {x.shape[0]}")
        object.__setattr__(self, "P", p)

    @classmethod
    def initial(cls, x0, p0) -> "FilterState":
        return cls(step=0, x_hat=np.asarray(x0, dtype=float), P=SpdMatrix(as_matrix(p0), definite=True))


@dataclass(frozen=True)
class NoiseSpec:
    """Process noise covariance (PSD) and measurement noise covariance (PD)."""

    sigma: SpdMatrix
    gamma: SpdMatrix

    def __post_init__(self):
        sigma = self.sigma if isinstance(self.sigma, SpdMatrix) else SpdMatrix(as_matrix(self.sigma))
        gamma = self.gamma if isinstance(self.gamma, SpdMatrix) else SpdMatrix(as_matrix(self.gamma), definite=True)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "gamma", gamma)


@dataclass(frozen=True)
class StepDiagnostics:
    """Intermediate quantities of one two-step update."""

    x_prior: np.ndarray
    P_prior: np.ndarray
    gain: np.ndarray
    innovation: np.ndarray


def _check_signals(model: LtvModel, u, y) -> tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if u.shape != (model.m,):
        raise ValueError(f"input must have length {model.m}, got {u.shape}")
    if y.shape != (model.p,):
        raise ValueError(f"measurement must have length {model.p}, got {y.shape}")
    return u, y


def kf_two_step(
    state: FilterState, model: LtvModel, noise: NoiseSpec, u, y
) -> tuple[FilterState, StepDiagnostics]:
    """One predict-then-update Kalman filter step.

    This is the production path: it never inverts Sigma + A P A^T and
    therefore tolerates positive-semidefinite process noise.
    """
    u, y = _check_signals(model, u, y)
    a, b, c = model.system(state.step)
    p = state.P.entries
    sigma = noise.sigma.entries
    gamma = noise.gamma.entries

    x_prior = a @ state.x_hat + b @ u
    p_prior = symmetrize(a @ p @ a.T + sigma)

    s = symmetrize(c @ p_prior @ c.T + gamma)
    try:
        s_factor = linalg.cho_factor(s, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"singular innovation covariance at step {state.step}"
        ) from exc
    gain = linalg.cho_solve(s_factor, c @ p_prior).T
    innovation = y - c @ x_prior

    x_next = x_prior + gain @ innovation
    p_next = symmetrize(p_prior - gain @ c @ p_prior)
    next_state = FilterState(state.step + 1, x_next, SpdMatrix(p_next, definite=True))
    return next_state, StepDiagnostics(x_prior, p_prior, gain, innovation)


def kf_one_step(state: FilterState, model: LtvModel, noise: NoiseSpec, u, y) -> FilterState:
    """Combined information-form Kalman filter step.

    Requires Sigma_k + A_k P_k A_k^T nonsingular (in particular it rejects
    zero process noise combined with a degenerate A P A^T); exists for
    cross-validation against the forgetting-matrix recursion.
    """
    u, y = _check_signals(model, u, y)
    a, b, c = model.system(state.step)
    p = state.P.entries
    sigma = noise.sigma.entries
    gamma_inv = spd_inverse(noise.gamma.entries)

    prior_cov = symmetrize(sigma + a @ p @ a.T)
    try:
        factor = linalg.cho_factor(prior_cov, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            f"Sigma + A P A^T is singular at step {state.step}; "
            "use kf_two_step for semidefinite process noise"
        ) from exc
    prior_info = linalg.cho_solve(factor, np.eye(model.n))

    p_next_inv = symmetrize(prior_info + c.T @ gamma_inv @ c)
    p_next = spd_inverse(p_next_inv)
    x_pred = a @ state.x_hat + b @ u
    x_next = x_pred + p_next @ c.T @ gamma_inv @ (y - c @ x_pred)
    return FilterState(state.step + 1, x_next, SpdMatrix(p_next, definite=True))
