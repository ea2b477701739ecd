"""Forgetting-matrix least-squares filtering.

The cost function whose recursive minimizer is the Kalman filter, its
one-step recursion with an explicit forgetting matrix F_k, the batch
quadratic expansion used as an independent oracle, and the conversions
between forgetting matrices and process noise covariances.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
import numpy as np
from scipy import linalg

from .exceptions import ForgettingConditionError
from .kalman import FilterState, _check_signals
from .ltv import InputHistory, LtvModel, input_stack_effect, phi, transition
from .spd import (
    Definiteness,
    SpdMatrix,
    as_matrix,
    as_square,
    check_definiteness,
    spd_inverse,
    symmetrize,
)

CONDITION_TOL = 1e-10
FORGETTING_SYM_TOL = 1e-10


def validate_forgetting(f, n: int, tol: float = FORGETTING_SYM_TOL) -> np.ndarray:
    """Validate a forgetting matrix: n x n, symmetric, positive semidefinite.

    Asymmetric inputs within reason are symmetrized with a warning;
    matrices that classify indefinite are rejected outright.
    """
    a = as_square(f, "forgetting matrix")
    if a.shape != (n, n):
        raise ValueError(f"forgetting matrix must be {n}x{n}, got {a.shape}")
    scale = max(1.0, float(np.abs(a).max(initial=0.0)))
    if float(np.abs(a - a.T).max(initial=0.0)) > tol * scale:
        warnings.warn("asymmetric forgetting matrix symmetrized", stacklevel=3)
    a = symmetrize(a)
    if check_definiteness(a, tol) is Definiteness.INDEFINITE:
        raise ForgettingConditionError("forgetting matrix must be positive semidefinite")
    return a


def check_condition_17(p_inv, f, tol: float = CONDITION_TOL) -> bool:
    """True iff P^{-1} - F is strictly positive definite.

    This is the existence condition for the recursive minimizer; it is
    re-checked on every step rather than trusted.
    """
    diff = symmetrize(as_matrix(p_inv) - as_matrix(f))
    return check_definiteness(diff, tol) is Definiteness.POSITIVE_DEFINITE


@dataclass(frozen=True)
class KflsHistory:
    """Complete data of a forgetting-filter run over steps 0..k.

    Measurements, per-step measurement covariances and forgetting
    matrices, the input history, and the prior (x0, P0).
    """

    model: LtvModel
    inputs: InputHistory
    measurements: tuple = field(repr=False)
    gammas: tuple = field(repr=False)
    forgetting: tuple = field(repr=False)
    x0: np.ndarray = field(repr=False)
    p0: SpdMatrix = field(repr=False)

    def __post_init__(self):
        ys = tuple(np.asarray(y, dtype=float).reshape(-1) for y in self.measurements)
        gs = tuple(
            g if isinstance(g, SpdMatrix) else SpdMatrix(as_matrix(g), definite=True)
            for g in self.gammas
        )
        fs = tuple(validate_forgetting(f, self.model.n) for f in self.forgetting)
        object.__setattr__(self, "measurements", ys)
        object.__setattr__(self, "gammas", gs)
        object.__setattr__(self, "forgetting", fs)
        object.__setattr__(self, "x0", np.asarray(self.x0, dtype=float).reshape(-1))
        p0 = self.p0 if isinstance(self.p0, SpdMatrix) else SpdMatrix(as_matrix(self.p0), definite=True)
        object.__setattr__(self, "p0", p0)

    def require_steps(self, k: int):
        """Check that all per-step lists cover steps 0..k."""
        if k < 0:
            raise ValueError("step index must be nonnegative")
        for name, seq in (
            ("measurements", self.measurements),
            ("gammas", self.gammas),
            ("forgetting", self.forgetting),
            ("inputs", self.inputs),
        ):
            if len(seq) < k + 1:
                raise ValueError(f"history.{name} covers {len(seq)} steps, need {k + 1}")


@dataclass(frozen=True)
class QuadraticForm:
    """Quadratic expansion x^T H x + 2 b^T x (+ const) of the filtering cost."""

    h: np.ndarray
    b: np.ndarray


def kfls_step(state: FilterState, model: LtvModel, f, gamma, u, y) -> FilterState:
    """One step of the recursive minimizer with forgetting matrix F_k.

    Maintains the covariance P (not its inverse), inverting once per
    step; the existence condition P_k^{-1} - F_k > 0 is enforced before
    the update.
    """
    u, y = _check_signals(model, u, y)
    a, b, c = model.system(state.step)
    f = validate_forgetting(f, model.n)
    gamma = as_matrix(gamma)
    gamma_inv = spd_inverse(gamma)

    p_inv = spd_inverse(state.P.entries)
    shrunk = symmetrize(p_inv - f)
    if check_definiteness(shrunk, CONDITION_TOL) is not Definiteness.POSITIVE_DEFINITE:
        worst = float(np.linalg.eigvalsh(shrunk).min())
        raise ForgettingConditionError(
            f"P^-1 - F is not positive definite at step {state.step} "
            f"(smallest eigenvalue {worst:.3e})"
        )

    a_inv = np.linalg.inv(a)
    p_next_inv = symmetrize(a_inv.T @ shrunk @ a_inv + c.T @ gamma_inv @ c)
    p_next = spd_inverse(p_next_inv)
    x_pred = a @ state.x_hat + b @ u
    x_next = x_pred + p_next @ c.T @ gamma_inv @ (y - c @ x_pred)
    return FilterState(state.step + 1, x_next, SpdMatrix(p_next, definite=True))


def recursive_states(history: KflsHistory, k: int) -> list[FilterState]:
    """Chain of filter states x_hat_0 .. x_hat_{k+1} from the recursion.

    With k = -1 only the prior state is returned.
    """
    states = [FilterState(0, history.x0, history.p0)]
    if k < 0:
        return states
    history.require_steps(k)
    for i in range(k + 1):
        states.append(
            kfls_step(
                states[-1],
                history.model,
                history.forgetting[i],
                history.gammas[i],
                history.inputs.u(i),
                history.measurements[i],
            )
        )
    return states


def _weighted_sq(r: np.ndarray, w: np.ndarray) -> float:
    return float(r @ w @ r)


def kfls_cost(history: KflsHistory, k: int, x) -> float:
    """Evaluate the filtering cost J_k at a candidate terminal state x.

    The loss, forgetting, and regularizer terms are evaluated directly
    from their definitions via the state transition function; earlier
    estimates entering the forgetting term come from the recursion
    itself.
    """
    history.require_steps(k)
    x = np.asarray(x, dtype=float).reshape(-1)
    model, inputs = history.model, history.inputs
    estimates = [s.x_hat for s in recursive_states(history, k - 1)]

    loss = 0.0
    forget = 0.0
    for i in range(k + 1):
        _, _, c_i = model.system(i)
        gamma_inv = spd_inverse(history.gammas[i].entries)
        r = history.measurements[i] - c_i @ transition(model, inputs, i + 1, k + 1, x)
        loss += _weighted_sq(r, gamma_inv)
        d = transition(model, inputs, i, k + 1, x) - estimates[i]
        forget += _weighted_sq(d, history.forgetting[i])
    d0 = transition(model, inputs, 0, k + 1, x) - history.x0
    reg = _weighted_sq(d0, spd_inverse(history.p0.entries))
    return loss - forget + reg


def batch_quadratic(history: KflsHistory, k: int) -> QuadraticForm:
    """Explicit quadratic expansion of J_k from the full history.

    Built term by term from the transition-matrix sums; independent of
    the per-step recursion except for the earlier estimates that the
    cost itself references.
    """
    history.require_steps(k)
    model, inputs = history.model, history.inputs
    estimates = [s.x_hat for s in recursive_states(history, k - 1)]
    p0_inv = spd_inverse(history.p0.entries)

    phi_0 = phi(model, 0, k + 1).matrix
    reg_info = phi_0.T @ p0_inv @ phi_0
    h = reg_info.copy()
    b = -reg_info @ transition(model, inputs, k + 1, 0, history.x0)

    for i in range(k + 1):
        _, _, c_i = model.system(i)
        gamma_inv = spd_inverse(history.gammas[i].entries)
        f_i = history.forgetting[i]
        phi_next = phi(model, i + 1, k + 1).matrix
        phi_i = phi(model, i, k + 1).matrix

        h += phi_next.T @ c_i.T @ gamma_inv @ c_i @ phi_next
        h -= phi_i.T @ f_i @ phi_i

        b += phi_i.T @ f_i @ (phi_i @ transition(model, inputs, k + 1, i, estimates[i]))
        if i < k:
            stacked = input_stack_effect(model, inputs, k + 1, i + 1)
        else:
            stacked = np.zeros(model.n)
        b -= phi_next.T @ c_i.T @ gamma_inv @ (history.measurements[i] + c_i @ (phi_next @ stacked))

    return QuadraticForm(h=symmetrize(h), b=b)


def batch_minimize(history: KflsHistory, k: int) -> np.ndarray:
    """Global minimizer -H_k^{-1} b_k of the batch quadratic form."""
    form = batch_quadratic(history, k)
    try:
        factor = linalg.cho_factor(form.h, lower=True)
    except linalg.LinAlgError as exc:
        raise ForgettingConditionError(
            "batch quadratic is not positive definite; a forgetting matrix "
            "upstream violates the existence condition"
        ) from exc
    return -linalg.cho_solve(factor, form.b)


def _psd_factor(m: np.ndarray, name: str) -> np.ndarray:
    """Factor a PSD matrix as G^T G with G of shape (rank, n)."""
    w, v = np.linalg.eigh(symmetrize(m))
    top = max(float(w[-1]), 0.0)
    keep = w > 1e-14 * max(top, 1e-300)
    if np.any(w < -1e-10 * max(top, 1.0)):
        raise ForgettingConditionError(f"{name} must be positive semidefinite")
    return (v[:, keep] * np.sqrt(w[keep])).T


def sigma_from_f(p_k, f_k, a_k) -> SpdMatrix:
    """Process noise covariance equivalent to a forgetting matrix.

    Sigma_k = A_k [ (P_k^{-1} - F_k)^{-1} - P_k ] A_k^T; requires
    P_k^{-1} - F_k positive definite.  Evaluated in the factored form
    (A P G^T) (I - G P G^T)^{-1} (A P G^T)^T with F = G^T G, which is the
    same matrix but positive semidefinite by construction instead of a
    difference of nearly equal inverses.  The result has the same
    definiteness class as F_k.
    """
    p = as_matrix(p_k)
    f = as_square(f_k, "forgetting matrix")
    a = as_square(a_k, "a_k")
    p_inv = spd_inverse(p)
    if check_definiteness(symmetrize(p_inv - f), CONDITION_TOL) is not Definiteness.POSITIVE_DEFINITE:
        raise ForgettingConditionError("P^-1 - F must be positive definite")
    g = _psd_factor(f, "forgetting matrix")
    if g.shape[0] == 0:
        return SpdMatrix(np.zeros_like(p))
    inner = symmetrize(np.eye(g.shape[0]) - g @ p @ g.T)
    try:
        factor = linalg.cho_factor(inner, lower=True)
    except linalg.LinAlgError as exc:
        raise ForgettingConditionError("P^-1 - F must be positive definite") from exc
    half = linalg.solve_triangular(factor[0], g @ p @ a.T, lower=True)
    return SpdMatrix(symmetrize(half.T @ half))


def f_from_sigma(p_k, sigma_k, a_k) -> np.ndarray:
    """Forgetting matrix equivalent to a process noise covariance.

    F_k = P_k^{-1} - (A_k^{-1} Sigma_k A_k^{-T} + P_k)^{-1}; positive
    semidefinite whenever Sigma_k is, and it satisfies the existence
    condition by construction.  Evaluated as
    (P^{-1} W) (I + W^T P^{-1} W)^{-1} (P^{-1} W)^T with
    W = A^{-1} H^T, Sigma = H^T H, the factored equivalent of the
    difference of inverses.
    """
    p = as_matrix(p_k)
    sigma = as_matrix(sigma_k)
    a = as_square(a_k, "a_k")
    n = p.shape[0]
    h = _psd_factor(sigma, "noise covariance")
    if h.shape[0] == 0:
        return np.zeros((n, n))
    w = np.linalg.solve(a, h.T)
    p_inv = spd_inverse(p)
    inner = symmetrize(np.eye(h.shape[0]) + w.T @ p_inv @ w)
    factor = linalg.cho_factor(inner, lower=True)
    half = linalg.solve_triangular(factor[0], w.T @ p_inv, lower=True)
    return symmetrize(half.T @ half)
