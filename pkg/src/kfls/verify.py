"""Randomized oracle suites behind the ``verify`` command.

Each suite runs a fixed-seed randomized comparison between an
implementation path and an independent oracle and reports the maximum
observed deviation against its tolerance.  The acceptance tests reuse
these suites directly.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .adaptive import AdaptiveKfConfig, adaptive_step
from .core import (
    KflsHistory,
    batch_minimize,
    batch_quadratic,
    f_from_sigma,
    kfls_cost,
    kfls_step,
    sigma_from_f,
)
from .forgetting import CovarianceResetting, ExponentialForgetting
from .kalman import FilterState, NoiseSpec, kf_one_step, kf_two_step
from .ltv import InputHistory, LtvModel
from .spd import check_definiteness, spd_inverse, symmetrize

DEFAULT_SEED = 0


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one randomized check."""

    name: str
    max_deviation: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_deviation <= self.tolerance

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name}: max deviation {self.max_deviation:.3e} (tolerance {self.tolerance:.0e})"


def rel_dev(actual, reference) -> float:
    """Relative deviation ||a - b|| / ||b|| with a tiny floor on ||b||."""
    a = np.asarray(actual, dtype=float)
    b = np.asarray(reference, dtype=float)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-9))


# ---------------------------------------------------------------------------
# Random instance generators (shared with the test suite)
# ---------------------------------------------------------------------------


def random_nonsingular(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 1.5) -> np.ndarray:
    """Well-conditioned nonsingular matrix with singular values in [lo, hi]."""
    u, _ = np.linalg.qr(rng.normal(size=(n, n)))
    v, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return u @ np.diag(rng.uniform(lo, hi, size=n)) @ v


def random_spd(rng: np.random.Generator, n: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    """Random symmetric positive-definite matrix with eigenvalues in [lo, hi]."""
    q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return symmetrize(q @ np.diag(rng.uniform(lo, hi, size=n)) @ q.T)


def random_psd(rng: np.random.Generator, n: int, rank: int | None = None) -> np.ndarray:
    """Random PSD matrix G^T G, optionally rank-deficient."""
    r = n if rank is None else rank
    g = rng.normal(size=(r, n))
    return symmetrize(g.T @ g)


def scaled_forgetting(rng: np.random.Generator, p_k: np.ndarray, rank: int | None = None) -> np.ndarray:
    """Random PSD forgetting matrix scaled to satisfy the existence condition.

    The largest eigenvalue is pinned to half the smallest eigenvalue of
    P_k^{-1}, which guarantees F < P_k^{-1} by construction.
    """
    n = p_k.shape[0]
    raw = random_psd(rng, n, rank)
    top = float(np.linalg.eigvalsh(raw).max())
    if top <= 0.0:
        return np.zeros((n, n))
    floor = float(np.linalg.eigvalsh(spd_inverse(p_k)).min())
    return raw * (0.5 * floor / top)


def random_model(rng: np.random.Generator, n: int, m: int, p: int, steps: int) -> LtvModel:
    """Random time-varying model with nonsingular state matrices."""
    mats = [
        (random_nonsingular(rng, n), rng.normal(size=(n, m)), rng.normal(size=(p, n)))
        for _ in range(steps)
    ]
    return LtvModel(n=n, m=m, p=p, matrix_provider=lambda k: mats[k])


def random_chain(
    rng: np.random.Generator, n: int, m: int, p: int, k_steps: int
) -> tuple[KflsHistory, list[FilterState]]:
    """Random filtering history plus the chained recursive states.

    Forgetting matrices are drawn on the fly against the running
    covariance so the existence condition holds at every step.
    """
    model = random_model(rng, n, m, p, k_steps + 1)
    us = rng.normal(size=(k_steps + 1, m))
    ys = rng.normal(size=(k_steps + 1, p))
    gammas = [random_spd(rng, p) for _ in range(k_steps + 1)]
    x0 = rng.normal(size=n)
    p0 = random_spd(rng, n)

    states = [FilterState.initial(x0, p0)]
    fs = []
    for k in range(k_steps + 1):
        rank = int(rng.integers(0, n + 1)) if rng.uniform() < 0.3 else n
        f = scaled_forgetting(rng, states[-1].P.entries, rank)
        fs.append(f)
        states.append(kfls_step(states[-1], model, f, gammas[k], us[k], ys[k]))
    history = KflsHistory(
        model=model,
        inputs=InputHistory(us),
        measurements=tuple(ys),
        gammas=tuple(gammas),
        forgetting=tuple(fs),
        x0=x0,
        p0=p0,
    )
    return history, states


def _random_dims(rng: np.random.Generator) -> tuple[int, int, int]:
    return int(rng.integers(1, 4)), int(rng.integers(1, 3)), int(rng.integers(1, 3))


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------


def theorem1_oracle(seed: int = DEFAULT_SEED, instances: int = 200) -> tuple[float, float]:
    """Max deviations of the recursion against the batch quadratic oracle.

    Random instances with n in {1,2,3}, p in {1,2}, up to 15 steps; the
    chained estimate is compared with the batch argmin and the
    recursion's information matrix with the explicit transition-matrix
    sum.  Returns (estimate deviation, information-matrix deviation).
    """
    rng = np.random.default_rng(seed)
    dev_x = 0.0
    dev_h = 0.0
    for _ in range(instances):
        n, m, p = _random_dims(rng)
        k_steps = int(rng.integers(1, 16))
        history, states = random_chain(rng, n, m, p, k_steps)
        x_batch = batch_minimize(history, k_steps)
        dev_x = max(dev_x, rel_dev(states[-1].x_hat, x_batch))
        h = batch_quadratic(history, k_steps).h
        dev_h = max(dev_h, rel_dev(spd_inverse(states[-1].P.entries), h))
    return dev_x, dev_h


def gradient_check(seed: int = DEFAULT_SEED, instances: int = 20, points: int = 10) -> float:
    """Max abs deviation between 2Hx + 2b and a central-difference gradient."""
    rng = np.random.default_rng(seed)
    step = 1e-6
    worst = 0.0
    for _ in range(instances):
        n, m, p = _random_dims(rng)
        k_steps = int(rng.integers(1, 7))
        history, _ = random_chain(rng, n, m, p, k_steps)
        form = batch_quadratic(history, k_steps)
        for _ in range(points):
            x = rng.normal(size=n)
            grad = 2.0 * form.h @ x + 2.0 * form.b
            fd = np.zeros(n)
            for i in range(n):
                e = np.zeros(n)
                e[i] = step
                hi = kfls_cost(history, k_steps, x + e)
                lo = kfls_cost(history, k_steps, x - e)
                fd[i] = (hi - lo) / (2.0 * step)
            worst = max(worst, float(np.abs(grad - fd).max()))
    return worst


def theorem1_suite(seed: int = DEFAULT_SEED, instances: int = 200) -> list[CheckResult]:
    """Recursive minimizer vs batch oracle plus the gradient cross-check."""
    dev_x, dev_h = theorem1_oracle(seed, instances)
    dev_g = gradient_check(seed + 1)
    return [
        CheckResult("recursive estimate vs batch minimizer", dev_x, 1e-8),
        CheckResult("information matrix vs explicit sum", dev_h, 1e-9),
        CheckResult("quadratic gradient vs finite differences", dev_g, 1e-5),
    ]


def one_two_step_deviation(seed: int = DEFAULT_SEED, steps: int = 200) -> float:
    """One-step vs two-step filter form, re-synchronized every step."""
    rng = np.random.default_rng(seed)
    dev = 0.0
    runs, per_run = 10, max(1, steps // 10)
    for _ in range(runs):
        n, m, p = _random_dims(rng)
        model = random_model(rng, n, m, p, per_run)
        state = FilterState.initial(rng.normal(size=n), random_spd(rng, n))
        for k in range(per_run):
            noise = NoiseSpec(sigma=random_spd(rng, n), gamma=random_spd(rng, p))
            u, y = rng.normal(size=m), rng.normal(size=p)
            two, _ = kf_two_step(state, model, noise, u, y)
            one = kf_one_step(state, model, noise, u, y)
            dev = max(dev, rel_dev(one.x_hat, two.x_hat), rel_dev(one.P.entries, two.P.entries))
            state = two
    return dev


def conversion_deviation(seed: int = DEFAULT_SEED, steps: int = 100) -> float:
    """Forgetting recursion with converted noise vs the one-step filter."""
    rng = np.random.default_rng(seed)
    dev = 0.0
    runs, per_run = 10, max(1, steps // 10)
    for _ in range(runs):
        n, m, p = _random_dims(rng)
        model = random_model(rng, n, m, p, per_run)
        state = FilterState.initial(rng.normal(size=n), random_spd(rng, n))
        for k in range(per_run):
            a_k, _, _ = model.system(k)
            sigma = random_psd(rng, n) if rng.uniform() < 0.5 else random_spd(rng, n)
            gamma = random_spd(rng, p)
            u, y = rng.normal(size=m), rng.normal(size=p)
            f = f_from_sigma(state.P.entries, sigma, a_k)
            via_f = kfls_step(state, model, f, gamma, u, y)
            via_sigma = kf_one_step(state, model, NoiseSpec(sigma=sigma, gamma=gamma), u, y)
            dev = max(
                dev,
                rel_dev(via_f.x_hat, via_sigma.x_hat),
                rel_dev(via_f.P.entries, via_sigma.P.entries),
            )
            state = via_sigma
    return dev


def roundtrip_deviation(seed: int = DEFAULT_SEED, draws: int = 100) -> float:
    """Conversion round trips noise -> forgetting -> noise and back."""
    rng = np.random.default_rng(seed)
    dev = 0.0
    for _ in range(draws):
        n = int(rng.integers(1, 4))
        p_k = random_spd(rng, n)
        a_k = random_nonsingular(rng, n)
        sigma = random_psd(rng, n)
        back = sigma_from_f(p_k, f_from_sigma(p_k, sigma, a_k), a_k).entries
        dev = max(dev, rel_dev(back, sigma))
        f = scaled_forgetting(rng, p_k)
        f_back = f_from_sigma(p_k, sigma_from_f(p_k, f, a_k).entries, a_k)
        dev = max(dev, rel_dev(f_back, f))
    return dev


def equivalence_suite(seed: int = DEFAULT_SEED, steps: int = 200) -> list[CheckResult]:
    """Algebraically equivalent filter forms compared step by step."""
    return [
        CheckResult("one-step vs two-step filter", one_two_step_deviation(seed, steps), 1e-9),
        CheckResult(
            "forgetting step with converted noise vs one-step filter",
            conversion_deviation(seed),
            1e-10,
        ),
        CheckResult("noise/forgetting conversion round trip", roundtrip_deviation(seed), 1e-9),
    ]


def exponential_pipeline_deviation(
    seed: int = DEFAULT_SEED, steps: int = 100, lams: Sequence[float] = (0.5, 0.9, 1.0)
) -> float:
    """Adaptive pipeline with exponential forgetting vs the textbook recursion.

    With identity dynamics, no input, and no extra process noise, the
    adaptive filter must reproduce the exponentially-weighted information
    recursion P_{k+1}^{-1} = lam P_k^{-1} + C^T Gamma^{-1} C and its
    estimate update.
    """
    rng = np.random.default_rng(seed)
    n, p = 2, 1
    dev = 0.0
    for lam in lams:
        cs = [rng.normal(size=(p, n)) for _ in range(steps)]
        gammas = [random_spd(rng, p) for _ in range(steps)]
        mats = [(np.eye(n), np.zeros((n, 1)), cs[k]) for k in range(steps)]
        model = LtvModel(n=n, m=1, p=p, matrix_provider=lambda k, mats=mats: mats[k])
        p0 = random_spd(rng, n)
        x0 = rng.normal(size=n)
        config = AdaptiveKfConfig.constant(
            ExponentialForgetting(lam), np.zeros((n, n)), lambda k, gammas=gammas: gammas[k]
        )
        state = FilterState.initial(x0, p0)
        p_inv = spd_inverse(p0)
        x_ref = x0.copy()
        for k in range(steps):
            y = rng.normal(size=p)
            result = adaptive_step(state, model, config, None, [0.0], y)
            state = result.state
            gamma_inv = spd_inverse(gammas[k])
            p_inv = symmetrize(lam * p_inv + cs[k].T @ gamma_inv @ cs[k])
            p_next = spd_inverse(p_inv)
            x_ref = x_ref + p_next @ cs[k].T @ gamma_inv @ (y - cs[k] @ x_ref)
            dev = max(
                dev,
                rel_dev(spd_inverse(state.P.entries), p_inv),
                rel_dev(state.x_hat, x_ref),
            )
    return dev


def resetting_deviation(seed: int = DEFAULT_SEED, steps: int = 10) -> float:
    """Covariance resetting with an always-true criterion.

    With identity dynamics and no process noise the prior covariance
    must land exactly on the resting covariance; returns the max abs
    entry difference (0.0 when exact).
    """
    rng = np.random.default_rng(seed)
    n, p = 2, 1
    p_inf = random_spd(rng, n, 2.0, 4.0)
    strategy = CovarianceResetting(p_inf=p_inf, criterion=lambda k, s, e: True)
    config = AdaptiveKfConfig.constant(strategy, np.zeros((n, n)), random_spd(rng, p))
    model = LtvModel.constant(np.eye(n), np.zeros((n, 1)), rng.normal(size=(p, n)))
    state = FilterState.initial(rng.normal(size=n), random_spd(rng, n, 0.1, 0.5))
    dev = 0.0
    for _ in range(steps):
        result = adaptive_step(state, model, config, None, [0.0], rng.normal(size=p))
        dev = max(dev, float(np.abs(result.diagnostics.P_prior - strategy.p_inf.entries).max()))
        state = result.state
    return dev


def table1_suite(seed: int = DEFAULT_SEED, steps: int = 100) -> list[CheckResult]:
    """Forgetting strategies against their published closed forms."""
    return [
        CheckResult(
            "exponential forgetting pipeline vs textbook recursion",
            exponential_pipeline_deviation(seed, steps),
            1e-10,
        ),
        CheckResult(
            "covariance resetting places prior at resting covariance",
            resetting_deviation(seed),
            0.0,
        ),
    ]


def definiteness_agreement_mismatches(seed: int = DEFAULT_SEED, draws: int = 200) -> int:
    """Count disagreements between the classes of F and its derived noise.

    Half the draws use full-rank (positive-definite) forgetting matrices,
    half rank-deficient (semidefinite) ones; the converted noise
    covariance must classify identically at tolerance 1e-9.
    """
    rng = np.random.default_rng(seed)
    tol = 1e-9
    mismatches = 0
    for i in range(draws):
        n = int(rng.integers(1, 4))
        p_k = random_spd(rng, n)
        a_k = random_nonsingular(rng, n)
        rank = n if i % 2 == 0 else int(rng.integers(0, n))
        f = scaled_forgetting(rng, p_k, rank)
        sigma = sigma_from_f(p_k, f, a_k).entries
        if check_definiteness(f, tol) is not check_definiteness(sigma, tol):
            mismatches += 1
    return mismatches


def prop1_suite(seed: int = DEFAULT_SEED, draws: int = 200) -> list[CheckResult]:
    """Definiteness class agreement between F and its equivalent noise."""
    return [
        CheckResult(
            "definiteness class of F vs derived noise",
            float(definiteness_agreement_mismatches(seed, draws)),
            0.0,
        )
    ]


SUITES: dict[str, Callable[[int], list[CheckResult]]] = {
    "theorem1": theorem1_suite,
    "equivalence": equivalence_suite,
    "table1": table1_suite,
    "prop1": prop1_suite,
}

SUITE_NAMES = tuple(SUITES) + ("all",)


def run_suite(name: str, seed: int = DEFAULT_SEED) -> list[tuple[str, CheckResult]]:
    """Run one named suite (or all), returning (suite, check) pairs."""
    if name == "all":
        names: Sequence[str] = tuple(SUITES)
    elif name in SUITES:
        names = (name,)
    else:
        raise ValueError(f"unknown suite '{name}' (choose from {SUITE_NAMES})")
    results = []
    for suite_name in names:
        for check in SUITES[suite_name](seed):
            results.append((suite_name, check))
    return results
