"""Experiment configuration, filter runs, and delimited output.

Parses the JSON experiment description (explicit units in field names,
unknown fields rejected), runs the configured filters over simulated or
external measurements, and writes the per-step and summary CSV files
with 17-significant-digit numbers so output is byte-reproducible.
"""

from __future__ import annotations

import functools
import hashlib
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .adaptive import AdaptiveKfConfig, adaptive_step
from .exceptions import ConfigError
from .forgetting import (
    CovarianceResetting,
    DirectionalForgetting,
    ExponentialForgetting,
    ExponentialResetting,
    ForgettingStrategy,
    NoForgetting,
    RobustVffConfig,
    RobustVffForgetting,
    RobustVffState,
)
from .kalman import FilterState, NoiseSpec, kf_two_step
from .ltv import LtvModel
from .msd import MsdParams, Trajectory, measure, simulate_truth

POST_COLLISION_WINDOW_S = 2.0

LAMBDA_ORDERING_NOTE = (
    "lambda_k is computed once per step, before the covariance inflation and "
    "time update, from the posterior innovation y_k - C_k x_hat_k and the "
    "excitation x_hat_k^T P_k x_hat_k."
)


def _fmt(value: float) -> str:
    return f"{float(value):.17g}"


def _reject_unknown(section: dict, allowed: set[str], where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown field(s) {sorted(unknown)}")


def _require(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"{where}: missing required field '{key}'")
    return section[key]


def _as_cov(value, n: int, where: str) -> np.ndarray:
    """Covariance field: scalar -> scale * I, vector -> diag, nested -> full."""
    if isinstance(value, (int, float)):
        return float(value) * np.eye(n)
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1 and arr.shape == (n,):
        return np.diag(arr)
    if arr.shape == (n, n):
        return arr
    raise ConfigError(f"{where}: expected a scalar, length-{n} diagonal, or {n}x{n} matrix")


@dataclass(frozen=True)
class FilterSpec:
    """One named filter of the experiment: plain Kalman or adaptive."""

    name: str
    kind: str
    sigma: Optional[np.ndarray] = None
    sigma_kalman: Optional[np.ndarray] = None
    strategy: Optional[ForgettingStrategy] = None


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a simulation plus filtering run."""

    plant: MsdParams
    horizon: float
    seeds: tuple[int, ...]
    gamma: float
    x0: np.ndarray
    p0: np.ndarray
    filters: tuple[FilterSpec, ...]

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be nonempty")
        if not self.filters:
            raise ConfigError("at least one filter is required")
        if self.gamma <= 0.0:
            raise ConfigError(f"measurement noise variance must be positive, got {self.gamma}")

    @classmethod
    def reference(cls, seeds: Sequence[int] = tuple(range(20))) -> "ExperimentConfig":
        """The standard wall-collision experiment configuration."""
        plant = MsdParams()
        n = 2
        return cls(
            plant=plant,
            horizon=20.0,
            seeds=tuple(int(s) for s in seeds),
            gamma=0.01,
            x0=np.zeros(2),
            p0=0.1 * np.eye(2),
            filters=(
                FilterSpec(name="kf", kind="kalman", sigma=0.01 * np.eye(2)),
                FilterSpec(
                    name="kfstar",
                    kind="adaptive",
                    sigma_kalman=0.01 * np.eye(2),
                    strategy=RobustVffForgetting(RobustVffConfig(order=n)),
                ),
            ),
        )

    def model(self) -> LtvModel:
        a_d, b_d = self.plant.discrete_system()
        return LtvModel.constant(a_d, b_d, self.plant.measurement_matrix())

    def inputs(self, n_rows: int) -> np.ndarray:
        return np.array([self.plant.force(k * self.plant.ts) for k in range(n_rows)])


_PLANT_FIELDS = {
    "mass_kg",
    "spring_n_per_m",
    "damping_ns_per_m",
    "wall_position_m",
    "force_amplitude_newtons",
    "initial_displacement_m",
    "initial_velocity_m_per_s",
    "ts_seconds",
}

_STRATEGY_FIELDS = {
    "none": {"type"},
    "exponential": {"type", "lam"},
    "exponential_resetting": {"type", "lam", "p_inf"},
    "covariance_resetting": {"type", "p_inf", "criterion"},
    "directional": {"type", "lam"},
    "robust_vff": {"type", "k_alpha", "k_beta", "xi", "lambda_min", "lambda_max"},
}


def _parse_plant(section: dict) -> MsdParams:
    _reject_unknown(section, _PLANT_FIELDS, "plant")
    amplitude = float(section.get("force_amplitude_newtons", 10.0))
    force = functools.partial(_sinusoid, amplitude)
    try:
        return MsdParams(
            mass=float(section.get("mass_kg", 10.0)),
            spring=float(section.get("spring_n_per_m", 5.0)),
            damping=float(section.get("damping_ns_per_m", 3.0)),
            wall_position=float(section.get("wall_position_m", 2.0)),
            force=force,
            x0=(
                float(section.get("initial_displacement_m", -1.0)),
                float(section.get("initial_velocity_m_per_s", 1.0)),
            ),
            ts=float(section.get("ts_seconds", 0.1)),
        )
    except ValueError as exc:
        raise ConfigError(f"plant: {exc}") from exc


def _sinusoid(amplitude: float, t: float) -> float:
    return amplitude * math.sin(t)


def _parse_strategy(section: dict, n: int, where: str) -> ForgettingStrategy:
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: strategy must be an object")
    kind = _require(section, "type", where)
    if kind not in _STRATEGY_FIELDS:
        raise ConfigError(
            f"{where}.type: unknown strategy '{kind}' (choose from {sorted(_STRATEGY_FIELDS)})"
        )
    _reject_unknown(section, _STRATEGY_FIELDS[kind], where)
    if kind == "none":
        return NoForgetting()
    if kind == "exponential":
        return ExponentialForgetting(lam=float(_require(section, "lam", where)))
    if kind == "exponential_resetting":
        return ExponentialResetting(
            lam=float(_require(section, "lam", where)),
            p_inf=_as_cov(_require(section, "p_inf", where), n, f"{where}.p_inf"),
        )
    if kind == "covariance_resetting":
        criterion = section.get("criterion", "always")
        if criterion not in ("always", "never"):
            raise ConfigError(f"{where}.criterion: expected 'always' or 'never'")
        fire = criterion == "always"
        return CovarianceResetting(
            p_inf=_as_cov(_require(section, "p_inf", where), n, f"{where}.p_inf"),
            criterion=lambda k, state, innovation: fire,
        )
    if kind == "directional":
        return DirectionalForgetting(lam=float(_require(section, "lam", where)))
    return RobustVffForgetting(
        RobustVffConfig(
            order=n,
            k_alpha=float(section.get("k_alpha", 2.0)),
            k_beta=float(section.get("k_beta", 10.0)),
            xi=float(section.get("xi", 1e-6)),
            lambda_min=float(section.get("lambda_min", 0.5)),
            lambda_max=float(section.get("lambda_max", 1.0)),
        )
    )


def _parse_filter(section: dict, n: int, index: int) -> FilterSpec:
    where = f"filters[{index}]"
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    kind = _require(section, "type", where)
    name = str(_require(section, "name", where))
    if kind == "kalman":
        _reject_unknown(section, {"name", "type", "sigma"}, where)
        return FilterSpec(
            name=name, kind=kind, sigma=_as_cov(_require(section, "sigma", where), n, f"{where}.sigma")
        )
    if kind == "adaptive":
        _reject_unknown(section, {"name", "type", "sigma_kalman", "strategy"}, where)
        return FilterSpec(
            name=name,
            kind=kind,
            sigma_kalman=_as_cov(
                _require(section, "sigma_kalman", where), n, f"{where}.sigma_kalman"
            ),
            strategy=_parse_strategy(_require(section, "strategy", where), n, f"{where}.strategy"),
        )
    raise ConfigError(f"{where}.type: expected 'kalman' or 'adaptive', got '{kind}'")


_TOP_FIELDS = {
    "plant",
    "horizon_seconds",
    "seeds",
    "measurement_noise_variance",
    "initial",
    "filters",
}


def parse_config(doc: dict) -> ExperimentConfig:
    """Build a validated ExperimentConfig from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    _reject_unknown(doc, _TOP_FIELDS, "config")
    plant = _parse_plant(doc.get("plant", {}))
    n = 2

    initial = doc.get("initial", {})
    _reject_unknown(initial, {"x0", "p0"}, "initial")
    x0 = np.asarray(initial.get("x0", [0.0, 0.0]), dtype=float)
    if x0.shape != (n,):
        raise ConfigError(f"initial.x0: expected a length-{n} vector")
    p0 = _as_cov(initial.get("p0", 0.1), n, "initial.p0")

    seeds_raw = doc.get("seeds", list(range(20)))
    if not isinstance(seeds_raw, list) or not all(isinstance(s, int) for s in seeds_raw):
        raise ConfigError("seeds: expected a list of integers")

    filters_raw = _require(doc, "filters", "config")
    if not isinstance(filters_raw, list) or not filters_raw:
        raise ConfigError("filters: expected a nonempty list")
    filters = tuple(_parse_filter(f, n, i) for i, f in enumerate(filters_raw))
    names = [f.name for f in filters]
    if len(set(names)) != len(names):
        raise ConfigError("filters: names must be unique")

    return ExperimentConfig(
        plant=plant,
        horizon=float(doc.get("horizon_seconds", 20.0)),
        seeds=tuple(seeds_raw),
        gamma=float(doc.get("measurement_noise_variance", 0.01)),
        x0=x0,
        p0=p0,
        filters=filters,
    )


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as handle:
        try:
            doc = json.load(handle)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return parse_config(doc)


def reference_config_document() -> dict:
    """JSON document equivalent to ExperimentConfig.reference()."""
    return {
        "plant": {
            "mass_kg": 10.0,
            "spring_n_per_m": 5.0,
            "damping_ns_per_m": 3.0,
            "wall_position_m": 2.0,
            "force_amplitude_newtons": 10.0,
            "initial_displacement_m": -1.0,
            "initial_velocity_m_per_s": 1.0,
            "ts_seconds": 0.1,
        },
        "horizon_seconds": 20.0,
        "seeds": list(range(20)),
        "measurement_noise_variance": 0.01,
        "initial": {"x0": [0.0, 0.0], "p0": 0.1},
        "filters": [
            {"name": "kf", "type": "kalman", "sigma": 0.01},
            {
                "name": "kfstar",
                "type": "adaptive",
                "sigma_kalman": 0.01,
                "strategy": {
                    "type": "robust_vff",
                    "k_alpha": 2.0,
                    "k_beta": 10.0,
                    "xi": 1e-6,
                    "lambda_min": 0.5,
                    "lambda_max": 1.0,
                },
            },
        ],
    }


@dataclass(frozen=True)
class FilterTrace:
    """Per-step outputs of one filter over one measurement sequence."""

    spec: FilterSpec
    estimates: np.ndarray
    p_diag: np.ndarray
    lam: Optional[np.ndarray]


@dataclass(frozen=True)
class SeedRun:
    """One seed's complete record: truth samples, measurements, filter traces."""

    seed: int
    times: np.ndarray
    truth: np.ndarray
    y: np.ndarray
    traces: tuple[FilterTrace, ...]
    collision_times: tuple[float, ...]


@dataclass(frozen=True)
class SummaryRow:
    seed: str
    filter_name: str
    rmse_overall: float
    rmse_post_collision: float


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    trajectory: Trajectory
    runs: tuple[SeedRun, ...]
    summary: tuple[SummaryRow, ...]


def run_filters(
    config: ExperimentConfig, y: np.ndarray, inputs: np.ndarray
) -> list[FilterTrace]:
    """Run every configured filter over a measurement sequence.

    Row k records the posterior (x_hat_k, diag P_k) held *before*
    consuming y_k, and the forgetting factor produced while consuming it.
    """
    model = config.model()
    n_rows = len(y)
    traces = []
    for spec in config.filters:
        state = FilterState.initial(config.x0, config.p0)
        estimates = np.zeros((n_rows, model.n))
        p_diag = np.zeros((n_rows, model.n))
        lams = np.full(n_rows, np.nan) if spec.kind == "adaptive" else None
        if spec.kind == "kalman":
            noise = NoiseSpec(sigma=spec.sigma, gamma=config.gamma * np.eye(1))
            stepper = None
        else:
            adaptive_config = AdaptiveKfConfig.constant(
                spec.strategy, spec.sigma_kalman, config.gamma * np.eye(1)
            )
            stepper = adaptive_config
        vff = (
            RobustVffState.initial(spec.strategy.config)
            if spec.kind == "adaptive" and isinstance(spec.strategy, RobustVffForgetting)
            else None
        )
        for k in range(n_rows):
            estimates[k] = state.x_hat
            p_diag[k] = np.diag(state.P.entries)
            u_k = np.atleast_1d(inputs[k])
            if spec.kind == "kalman":
                state, _ = kf_two_step(state, model, noise, u_k, [y[k]])
            else:
                result = adaptive_step(state, model, stepper, vff, u_k, [y[k]])
                state, vff = result.state, result.vff
                if result.lam is not None:
                    lams[k] = result.lam
        traces.append(FilterTrace(spec=spec, estimates=estimates, p_diag=p_diag, lam=lams))
    return traces


def post_collision_mask(times: np.ndarray, collisions: Sequence[float], window: float = POST_COLLISION_WINDOW_S) -> np.ndarray:
    """Rows falling in the union of [t_c, t_c + window] over all collisions."""
    mask = np.zeros(len(times), dtype=bool)
    for t_c in collisions:
        mask |= (times >= t_c) & (times <= t_c + window)
    return mask


def state_rmse(truth: np.ndarray, estimates: np.ndarray, mask: Optional[np.ndarray] = None) -> float:
    """Root-mean-square of the full-state error norm over selected rows."""
    err = truth - estimates
    if mask is not None:
        err = err[mask]
    if err.shape[0] == 0:
        return float("nan")
    return float(np.sqrt(np.mean(np.sum(err**2, axis=1))))


def run_experiment(config: ExperimentConfig, substep: float = 1e-3) -> ExperimentResult:
    """Simulate the plant once, then filter per-seed measurement sequences."""
    trajectory = simulate_truth(config.plant, t_end=config.horizon, substep=substep)
    n_rows = len(trajectory)
    inputs = config.inputs(n_rows)

    runs = []
    for seed in config.seeds:
        y = measure(trajectory, config.gamma, seed)
        traces = run_filters(config, y, inputs)
        runs.append(
            SeedRun(
                seed=seed,
                times=trajectory.times,
                truth=trajectory.states,
                y=y,
                traces=tuple(traces),
                collision_times=trajectory.collision_times,
            )
        )

    window_mask = post_collision_mask(trajectory.times, trajectory.collision_times)
    summary = []
    for run in runs:
        for trace in run.traces:
            summary.append(
                SummaryRow(
                    seed=str(run.seed),
                    filter_name=trace.spec.name,
                    rmse_overall=state_rmse(run.truth, trace.estimates),
                    rmse_post_collision=state_rmse(run.truth, trace.estimates, window_mask),
                )
            )
    for spec in config.filters:
        rows = [r for r in summary if r.filter_name == spec.name]
        summary.append(
            SummaryRow(
                seed="mean",
                filter_name=spec.name,
                rmse_overall=float(np.mean([r.rmse_overall for r in rows])),
                rmse_post_collision=float(np.mean([r.rmse_post_collision for r in rows])),
            )
        )
    return ExperimentResult(
        config=config, trajectory=trajectory, runs=tuple(runs), summary=tuple(summary)
    )


def run_columns(filters: Sequence[FilterSpec]) -> list[str]:
    """Column names of the per-seed CSV, fixed by the filter list."""
    cols = ["k", "t", "z_true", "zdot_true", "y"]
    for spec in filters:
        cols += [f"{spec.name}_z", f"{spec.name}_zdot"]
    adaptive = [spec for spec in filters if spec.kind == "adaptive"]
    if len(adaptive) == 1:
        cols.append("lambda")
    else:
        cols += [f"{spec.name}_lambda" for spec in adaptive]
    for spec in filters:
        cols += [f"{spec.name}_sig_z", f"{spec.name}_sig_zdot"]
    return cols


def run_csv_text(run: SeedRun) -> str:
    """Render one seed's record as CSV (17 significant digits)."""
    filters = [trace.spec for trace in run.traces]
    lines = [",".join(run_columns(filters))]
    adaptive_traces = [t for t in run.traces if t.spec.kind == "adaptive"]
    for k in range(len(run.times)):
        row = [str(k), _fmt(run.times[k]), _fmt(run.truth[k, 0]), _fmt(run.truth[k, 1]), _fmt(run.y[k])]
        for trace in run.traces:
            row += [_fmt(trace.estimates[k, 0]), _fmt(trace.estimates[k, 1])]
        for trace in adaptive_traces:
            row.append(_fmt(trace.lam[k]))
        for trace in run.traces:
            row += [_fmt(trace.p_diag[k, 0]), _fmt(trace.p_diag[k, 1])]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def summary_csv_text(summary: Sequence[SummaryRow]) -> str:
    lines = ["seed,filter,rmse_overall,rmse_post_collision"]
    for row in summary:
        lines.append(
            f"{row.seed},{row.filter_name},{_fmt(row.rmse_overall)},{_fmt(row.rmse_post_collision)}"
        )
    return "\n".join(lines) + "\n"


def metadata_document(config_bytes: bytes, seeds: Sequence[int]) -> dict:
    return {
        "config_sha256": hashlib.sha256(config_bytes).hexdigest(),
        "seeds": list(seeds),
        "version": __version__,
        "lambda_ordering_note": LAMBDA_ORDERING_NOTE,
    }
