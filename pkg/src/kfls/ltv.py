"""Discrete-time LTV system container and state-transition machinery.

Holds the time-indexed system matrices (A_k, B_k, C_k) and implements the
state transition matrix Phi between any two step indices, the stacked
input effect, and the two-sided state transition function.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .exceptions import ModelError

# Singularity threshold for A_k, relative to its largest singular value.
A_SINGULARITY_TOL = 1e-12

MatrixProvider = Callable[[int], tuple[np.ndarray, np.ndarray, np.ndarray]]


@dataclass(frozen=True)
class LtvModel:
    """Discrete LTV system x_{k+1} = A_k x_k + B_k u_k, y_k = C_k x_k.

    ``matrix_provider`` maps a step index k >= 0 to (A_k, B_k, C_k).
    Dimensions must be constant over k; every A_k must be nonsingular,
    which is checked on access.
    """

    n: int
    m: int
    p: int
    matrix_provider: MatrixProvider = field(repr=False)

    def __post_init__(self):
        if self.n < 1 or self.m < 0 or self.p < 1:
            raise ValueError(f"invalid dimensions n={self.n}, m={self.m}, p={self.p}")

    @classmethod
    def constant(cls, a, b, c) -> "LtvModel":
        """Model with the same (A, B, C) at every step."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float)
        c = np.asarray(c, dtype=float)
        if b.ndim == 1:
            b = b.reshape(-1, 1)
        if c.ndim == 1:
            c = c.reshape(1, -1)
        n = a.shape[0]
        triple = (a.copy(), b.copy(), c.copy())
        return cls(n=n, m=b.shape[1], p=c.shape[0], matrix_provider=lambda k: triple)

    def system(self, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return validated (A_k, B_k, C_k) for step k."""
        if k < 0:
            raise ValueError(f"step index must be nonnegative, got {k}")
        a, b, c = self.matrix_provider(k)
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        c = np.asarray(c, dtype=float)
        if a.shape != (self.n, self.n):
            raise ModelError(f"A_{k} has shape {a.shape}, expected {(self.n, self.n)}")
        if b.shape != (self.n, self.m):
            raise ModelError(f"B_{k} has shape {b.shape}, expected {(self.n, self.m)}")
        if c.shape != (self.p, self.n):
            raise ModelError(f"C_{k} has shape {c.shape}, expected {(self.p, self.n)}")
        sv = np.linalg.svd(a, compute_uv=False)
        if sv[-1] <= A_SINGULARITY_TOL * sv[0]:
            raise ModelError(f"A_{k} is singular (smallest singular value {sv[-1]:.3e})")
        return a, b, c


@dataclass(frozen=True)
class InputHistory:
    """Ordered inputs u_0, u_1, ... as an (T, m) array."""

    inputs: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.inputs, dtype=float)
        if a.ndim == 1:
            a = a.reshape(-1, 1)
        if a.ndim != 2:
            raise ValueError("inputs must be a sequence of m-vectors")
        a = a.copy()
        a.flags.writeable = False
        object.__setattr__(self, "inputs", a)

    @classmethod
    def from_sequence(cls, us: Sequence) -> "InputHistory":
        return cls(np.array([np.atleast_1d(u) for u in us], dtype=float))

    @classmethod
    def zeros(cls, steps: int, m: int) -> "InputHistory":
        return cls(np.zeros((steps, m)))

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def u(self, j: int) -> np.ndarray:
        if not 0 <= j < len(self):
            raise IndexError(f"input u_{j} is not available (have steps 0..{len(self) - 1})")
        return self.inputs[j]


@dataclass(frozen=True)
class TransitionMatrix:
    """State transition matrix mapping step ``from_step`` to ``to_step``."""

    from_step: int
    to_step: int
    matrix: np.ndarray


def phi(model: LtvModel, k: int, i: int) -> TransitionMatrix:
    """Transition matrix Phi_{k,i} from step i to step k.

    For i < k this is the product A_{k-1} ... A_i; for i == k the
    identity; for k < i the inverse of the forward product Phi_{i,k},
    formed with a single inversion (better conditioned than multiplying
    the individual inverses).
    """
    if i < 0 or k < 0:
        raise ValueError("step indices must be nonnegative")
    if i == k:
        return TransitionMatrix(i, k, np.eye(model.n))
    lo, hi = (i, k) if i < k else (k, i)
    prod = np.eye(model.n)
    for j in range(lo, hi):
        a, _, _ = model.system(j)
        prod = a @ prod
    if i < k:
        return TransitionMatrix(i, k, prod)
    return TransitionMatrix(i, k, np.linalg.inv(prod))


def input_stack_effect(model: LtvModel, inputs: InputHistory, k: int, i: int) -> np.ndarray:
    """Accumulated input effect sum_{j=i}^{k-1} Phi_{k,j+1} B_j u_j for 0 <= i < k."""
    if not 0 <= i < k:
        raise ValueError(f"requires 0 <= i < k, got i={i}, k={k}")
    acc = np.zeros(model.n)
    for j in range(i, k):
        _, b, _ = model.system(j)
        acc += phi(model, k, j + 1).matrix @ (b @ inputs.u(j))
    return acc


def transition(model: LtvModel, inputs: InputHistory, k: int, i: int, x) -> np.ndarray:
    """State transition function T_{k,i}(x), mapping a step-i state to step k.

    Forward (i < k) it applies the dynamics including inputs; backward
    (k < i) it removes the input effect and applies the inverse
    transition; at i == k it is the identity.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (model.n,):
        raise ValueError(f"state must be an n-vector of length {model.n}, got shape {x.shape}")
    if i == k:
        return x.copy()
    if i < k:
        return phi(model, k, i).matrix @ x + input_stack_effect(model, inputs, k, i)
    return phi(model, k, i).matrix @ (x - input_stack_effect(model, inputs, i, k))
