"""Ground-truth mass-spring-damper simulation with an unmodeled wall.

Integrates the forced continuous dynamics with classical RK4 on a fine
grid, reflecting the velocity when the mass hits the wall, and provides
the zero-order-hold discretization of the nominal (wall-free) model plus
noisy measurement generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .exceptions import IntegrationError

# Time resolution of the bisection that locates a wall crossing.
COLLISION_TIME_TOL = 1e-9
_MAX_REFLECTIONS_PER_SUBSTEP = 16


def default_force(t: float) -> float:
    """Downward drive used by the reference experiment: 10 sin(t)."""
    return 10.0 * math.sin(t)


@dataclass(frozen=True)
class MsdParams:
    """Physical parameters of the mass-spring-damper with a wall."""

    mass: float = 10.0
    spring: float = 5.0
    damping: float = 3.0
    wall_position: float = 2.0
    force: Callable[[float], float] = field(default=default_force, repr=False)
    x0: tuple[float, float] = (-1.0, 1.0)
    ts: float = 0.1

    def __post_init__(self):
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if self.ts <= 0.0:
            raise ValueError(f"sampling time must be positive, got {self.ts}")

    def continuous_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Wall-free dynamics matrices: d/dt [z, zdot] = A_c x + B_c F(t)."""
        a_c = np.array([[0.0, 1.0], [-self.spring / self.mass, -self.damping / self.mass]])
        b_c = np.array([[0.0], [1.0 / self.mass]])
        return a_c, b_c

    def discrete_system(self) -> tuple[np.ndarray, np.ndarray]:
        """Nominal ZOH discretization (A_d, B_d) at the sampling time."""
        a_c, b_c = self.continuous_system()
        return discretize_zoh(a_c, b_c, self.ts)

    def measurement_matrix(self) -> np.ndarray:
        """Displacement-plus-velocity output map [1 1]."""
        return np.array([[1.0, 1.0]])

    def acceleration(self, t: float, z: float, zdot: float) -> float:
        return (self.force(t) - self.spring * z - self.damping * zdot) / self.mass


@dataclass(frozen=True)
class Trajectory:
    """Sampled ground truth: instants k*ts, (z, zdot) pairs, collision times."""

    times: np.ndarray
    states: np.ndarray
    collision_times: tuple[float, ...]

    @property
    def displacement(self) -> np.ndarray:
        return self.states[:, 0]

    @property
    def velocity(self) -> np.ndarray:
        return self.states[:, 1]

    def __len__(self) -> int:
        return self.times.shape[0]


def discretize_zoh(a_c, b_c, ts: float) -> tuple[np.ndarray, np.ndarray]:
    """Zero-order-hold discretization via the augmented matrix exponential.

    exp([[A, B], [0, 0]] ts) = [[A_d, B_d], [0, I]], so one scaling-and-
    squaring matrix exponential yields both A_d = exp(A ts) and
    B_d = int_0^ts exp(A tau) dtau B.
    """
    a_c = np.atleast_2d(np.asarray(a_c, dtype=float))
    b_c = np.asarray(b_c, dtype=float)
    if b_c.ndim == 1:
        b_c = b_c.reshape(-1, 1)
    if ts <= 0.0:
        raise ValueError(f"sampling time must be positive, got {ts}")
    n = a_c.shape[0]
    m = b_c.shape[1]
    block = np.zeros((n + m, n + m))
    block[:n, :n] = a_c
    block[:n, n:] = b_c
    exp_block = linalg.expm(block * ts)
    return exp_block[:n, :n], exp_block[:n, n:]


def _rk4_step(params: MsdParams, t: float, state: np.ndarray, h: float) -> np.ndarray:
    def deriv(tt, s):
        return np.array([s[1], params.acceleration(tt, s[0], s[1])])

    k1 = deriv(t, state)
    k2 = deriv(t + 0.5 * h, state + 0.5 * h * k1)
    k3 = deriv(t + 0.5 * h, state + 0.5 * h * k2)
    k4 = deriv(t + h, state + h * k3)
    return state + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance_substep(
    params: MsdParams, t: float, state: np.ndarray, h: float, collisions: list[float]
) -> np.ndarray:
    """Advance one fine-grid step, reflecting at the wall as needed."""
    wall = params.wall_position
    remaining = h
    for _ in range(_MAX_REFLECTIONS_PER_SUBSTEP):
        candidate = _rk4_step(params, t, state, remaining)
        if not np.all(np.isfinite(candidate)):
            raise IntegrationError(f"non-finite state near t = {t:.6f}")
        if candidate[0] <= wall:
            return candidate
        # The step crosses the wall: bisect the step length to locate the
        # crossing instant, then reflect with the same speed.
        lo, hi = 0.0, remaining
        while hi - lo > COLLISION_TIME_TOL:
            mid = 0.5 * (lo + hi)
            if _rk4_step(params, t, state, mid)[0] > wall:
                hi = mid
            else:
                lo = mid
        at_wall = _rk4_step(params, t, state, lo)
        state = np.array([wall, -abs(at_wall[1])])
        t += lo
        remaining -= lo
        collisions.append(t)
        if remaining <= COLLISION_TIME_TOL:
            return state
    raise IntegrationError(f"more than {_MAX_REFLECTIONS_PER_SUBSTEP} reflections near t = {t:.6f}")


def simulate_truth(params: MsdParams, t_end: float = 20.0, substep: float = 1e-3) -> Trajectory:
    """Integrate the true (wall-limited) dynamics, sampling every ts.

    RK4 on a fine grid whose step divides the sampling interval; the
    per-step integration error of this smooth system is far below the
    measurement noise of the experiment.
    """
    if t_end <= 0.0:
        raise ValueError(f"t_end must be positive, got {t_end}")
    if substep > params.ts:
        raise ValueError(f"substep {substep} must not exceed the sampling time {params.ts}")
    n_sub = max(1, round(params.ts / substep))
    h = params.ts / n_sub
    n_samples = round(t_end / params.ts)

    state = np.array(params.x0, dtype=float)
    if state[0] > params.wall_position:
        raise ValueError("initial displacement lies beyond the wall")
    collisions: list[float] = []
    samples = [state.copy()]
    for k in range(n_samples):
        for j in range(n_sub):
            t = k * params.ts + j * h
            state = _advance_substep(params, t, state, h, collisions)
        samples.append(state.copy())

    times = np.arange(n_samples + 1) * params.ts
    return Trajectory(times=times, states=np.array(samples), collision_times=tuple(collisions))


def measure(traj: Trajectory, gamma: float, seed: int) -> np.ndarray:
    """Noisy scalar measurements y_k = z_k + zdot_k + v_k, v_k ~ N(0, gamma).

    A fixed seed yields an identical sequence on every call.
    """
    if gamma <= 0.0:
        raise ValueError(f"measurement noise variance must be positive, got {gamma}")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(gamma), size=len(traj))
    return traj.displacement + traj.velocity + noise
