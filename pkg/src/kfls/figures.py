"""Matplotlib rendering of experiment runs to image files.

Produces the three standard report figures for one seed's run: state
estimates with the forgetting factor, estimation errors, and the
marginal variances of the estimates.  Collision instants are marked on
every panel.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .experiment import SeedRun

_TRUTH_STYLE = {"color": "black", "linewidth": 1.0, "label": "true"}
_FILTER_COLORS = ("tab:blue", "tab:red", "tab:green", "tab:orange")


def _mark_collisions(ax, collisions):
    for t_c in collisions:
        ax.axvline(t_c, color="gray", linewidth=0.6, linestyle=":")


def plot_state(run: SeedRun, path: Path) -> Path:
    """Displacement, velocity, and forgetting factor over time."""
    adaptive = [t for t in run.traces if t.lam is not None]
    n_rows = 3 if adaptive else 2
    fig, axes = plt.subplots(n_rows, 1, sharex=True, figsize=(7.0, 2.2 * n_rows))

    axes[0].plot(run.times, run.truth[:, 0], **_TRUTH_STYLE)
    axes[1].plot(run.times, run.truth[:, 1], **_TRUTH_STYLE)
    for trace, color in zip(run.traces, _FILTER_COLORS):
        axes[0].plot(run.times, trace.estimates[:, 0], color=color, linewidth=0.9, label=trace.spec.name)
        axes[1].plot(run.times, trace.estimates[:, 1], color=color, linewidth=0.9, label=trace.spec.name)
    axes[0].set_ylabel("z [m]")
    axes[1].set_ylabel("zdot [m/s]")
    axes[0].legend(loc="upper right", fontsize=8)
    if adaptive:
        for trace, color in zip(adaptive, _FILTER_COLORS[1:]):
            axes[2].plot(run.times, trace.lam, color=color, linewidth=0.9, label=trace.spec.name)
        axes[2].set_ylabel("lambda")
        axes[2].set_ylim(0.0, 1.05)
    for ax in axes:
        _mark_collisions(ax, run.collision_times)
    axes[-1].set_xlabel("t [s]")
    fig.suptitle(f"State estimation, seed {run.seed}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_error(run: SeedRun, path: Path) -> Path:
    """Estimation error of displacement and velocity over time."""
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7.0, 4.4))
    for trace, color in zip(run.traces, _FILTER_COLORS):
        err = run.truth - trace.estimates
        axes[0].plot(run.times, err[:, 0], color=color, linewidth=0.9, label=trace.spec.name)
        axes[1].plot(run.times, err[:, 1], color=color, linewidth=0.9, label=trace.spec.name)
    axes[0].set_ylabel("z error [m]")
    axes[1].set_ylabel("zdot error [m/s]")
    axes[0].legend(loc="upper right", fontsize=8)
    for ax in axes:
        _mark_collisions(ax, run.collision_times)
        ax.axhline(0.0, color="black", linewidth=0.5)
    axes[-1].set_xlabel("t [s]")
    fig.suptitle(f"Estimation error, seed {run.seed}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_covariance(run: SeedRun, path: Path) -> Path:
    """Marginal variances (diagonal of P) of both state components."""
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7.0, 4.4))
    for trace, color in zip(run.traces, _FILTER_COLORS):
        axes[0].plot(run.times, trace.p_diag[:, 0], color=color, linewidth=0.9, label=trace.spec.name)
        axes[1].plot(run.times, trace.p_diag[:, 1], color=color, linewidth=0.9, label=trace.spec.name)
    axes[0].set_ylabel("var(z est)")
    axes[1].set_ylabel("var(zdot est)")
    axes[0].legend(loc="upper right", fontsize=8)
    for ax in axes:
        _mark_collisions(ax, run.collision_times)
    axes[-1].set_xlabel("t [s]")
    fig.suptitle(f"Marginal variance, seed {run.seed}")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_run_figures(run: SeedRun, out_dir: Path) -> list[Path]:
    """Write the three report figures for one run; returns the paths."""
    out_dir = Path(out_dir)
    return [
        plot_state(run, out_dir / f"fig_state_seed{run.seed}.png"),
        plot_error(run, out_dir / f"fig_error_seed{run.seed}.png"),
        plot_covariance(run, out_dir / f"fig_covariance_seed{run.seed}.png"),
    ]
