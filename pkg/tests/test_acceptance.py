"""Acceptance suite: every criterion at its stated tolerance.

Each test prints one PASS/FAIL line (visible with ``pytest -s``) and then
asserts, so a red run still reports every criterion's outcome.
"""

import time

import numpy as np

from kfls.experiment import ExperimentConfig, post_collision_mask, run_experiment, state_rmse
from kfls.msd import MsdParams
from kfls.verify import (
    conversion_deviation,
    definiteness_agreement_mismatches,
    exponential_pipeline_deviation,
    gradient_check,
    one_two_step_deviation,
    resetting_deviation,
    roundtrip_deviation,
    theorem1_oracle,
)
from tests.test_msd import PRINTED_A_D, PRINTED_B_D, agrees_to_sig_figs


def _report(number: int, name: str, passed: bool, detail: str):
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {number}] {status} — {name}: {detail}")


def test_criterion_1_theorem1_oracle():
    started = time.perf_counter()
    dev_x, dev_h = theorem1_oracle(seed=0, instances=200)
    elapsed = time.perf_counter() - started
    passed = dev_x <= 1e-8 and dev_h <= 1e-9 and elapsed < 10.0
    _report(
        1,
        "recursive minimizer vs batch oracle (200 instances)",
        passed,
        f"estimate dev {dev_x:.3e} (tol 1e-8), information dev {dev_h:.3e} (tol 1e-9), {elapsed:.1f}s (< 10s)",
    )
    assert dev_x <= 1e-8
    assert dev_h <= 1e-9
    assert elapsed < 10.0


def test_criterion_2_one_two_step_equivalence():
    started = time.perf_counter()
    dev = one_two_step_deviation(seed=0, steps=200)
    elapsed = time.perf_counter() - started
    passed = dev <= 1e-9 and elapsed < 1.0
    _report(
        2,
        "one-step vs two-step filter (200 steps)",
        passed,
        f"dev {dev:.3e} (tol 1e-9), {elapsed:.2f}s (< 1s)",
    )
    assert dev <= 1e-9
    assert elapsed < 1.0


def test_criterion_3_corollary2_equivalence():
    dev_conv = conversion_deviation(seed=0, steps=100)
    dev_round = roundtrip_deviation(seed=0, draws=100)
    passed = dev_conv <= 1e-10 and dev_round <= 1e-9
    _report(
        3,
        "converted-noise step vs one-step filter + conversion round trip",
        passed,
        f"step dev {dev_conv:.3e} (tol 1e-10), round-trip dev {dev_round:.3e} (tol 1e-9)",
    )
    assert dev_conv <= 1e-10
    assert dev_round <= 1e-9


def test_criterion_4_table1_end_to_end():
    dev_ef = exponential_pipeline_deviation(seed=0, steps=100, lams=(0.5, 0.9, 1.0))
    dev_reset = resetting_deviation(seed=0)
    passed = dev_ef <= 1e-10 and dev_reset == 0.0
    _report(
        4,
        "exponential-forgetting pipeline vs textbook recursion + exact resetting",
        passed,
        f"recursion dev {dev_ef:.3e} (tol 1e-10), resetting dev {dev_reset:.3e} (exact)",
    )
    assert dev_ef <= 1e-10
    assert dev_reset == 0.0


def test_criterion_5_definiteness_agreement():
    mismatches = definiteness_agreement_mismatches(seed=0, draws=200)
    _report(
        5,
        "definiteness class of F vs derived noise (200 draws)",
        mismatches == 0,
        f"{mismatches} mismatch(es) at tol 1e-9",
    )
    assert mismatches == 0


def test_criterion_6_zoh_matches_printed_matrices():
    a_d, b_d = MsdParams().discrete_system()
    pairs = list(zip(a_d.ravel(), PRINTED_A_D.ravel())) + list(zip(b_d.ravel(), PRINTED_B_D.ravel()))
    bad = [(c, p) for c, p in pairs if not agrees_to_sig_figs(c, p, figs=4)]
    _report(
        6,
        "nominal ZOH discretization vs printed entries",
        not bad,
        "all 6 entries agree to 4 significant figures" if not bad else f"mismatches: {bad}",
    )
    assert not bad


def test_criterion_7_collision_experiment():
    started = time.perf_counter()
    config = ExperimentConfig.reference(seeds=range(20))
    result = run_experiment(config)
    elapsed = time.perf_counter() - started

    collisions = result.trajectory.collision_times
    has_collisions = len(collisions) >= 1

    # (b) the forgetting factor dips below 0.9 within 0.5 s of a collision
    # in at least 90% of (seed, collision) pairs.
    dips = 0
    pairs = 0
    for run in result.runs:
        lam = next(t.lam for t in run.traces if t.spec.name == "kfstar")
        for t_c in collisions:
            pairs += 1
            window = (run.times >= t_c) & (run.times <= t_c + 0.5)
            if np.nanmin(lam[window]) < 0.9:
                dips += 1
    dip_fraction = dips / pairs if pairs else 0.0

    # (c) the adaptive filter's post-collision RMSE beats the plain one in
    # at least 80% of seeds and in the across-seed mean.
    mask = post_collision_mask(result.trajectory.times, collisions)
    wins = 0
    kf_rmses, adaptive_rmses = [], []
    for run in result.runs:
        by_name = {t.spec.name: t for t in run.traces}
        kf_rmse = state_rmse(run.truth, by_name["kf"].estimates, mask)
        adaptive_rmse = state_rmse(run.truth, by_name["kfstar"].estimates, mask)
        kf_rmses.append(kf_rmse)
        adaptive_rmses.append(adaptive_rmse)
        if adaptive_rmse < kf_rmse:
            wins += 1
    win_fraction = wins / len(result.runs)
    mean_improves = float(np.mean(adaptive_rmses)) < float(np.mean(kf_rmses))

    # (d) every posterior covariance stayed positive definite: each step
    # Cholesky-validates P on construction, and the recorded marginal
    # variances must be strictly positive.
    all_definite = all(trace.p_diag.min() > 0.0 for run in result.runs for trace in run.traces)

    passed = (
        has_collisions
        and dip_fraction >= 0.9
        and win_fraction >= 0.8
        and mean_improves
        and all_definite
        and elapsed < 30.0
    )
    _report(
        7,
        "wall-collision experiment over 20 seeds",
        passed,
        f"{len(collisions)} collision(s); lambda dips in {dips}/{pairs} pairs; "
        f"adaptive wins {wins}/{len(result.runs)} seeds "
        f"(means {np.mean(adaptive_rmses):.4f} vs {np.mean(kf_rmses):.4f}); "
        f"P definite: {all_definite}; {elapsed:.1f}s (< 30s)",
    )
    assert has_collisions
    assert dip_fraction >= 0.9
    assert win_fraction >= 0.8
    assert mean_improves
    assert all_definite
    assert elapsed < 30.0


def test_criterion_8_gradient_check():
    dev = gradient_check(seed=1, instances=20, points=10)
    _report(
        8,
        "quadratic gradient vs central finite differences (20 instances x 10 points)",
        dev <= 1e-5,
        f"max abs dev {dev:.3e} (tol 1e-5, step 1e-6)",
    )
    assert dev <= 1e-5
