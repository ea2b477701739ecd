"""Command-line front end: simulate, filter, verify.

``simulate`` runs the wall-collision experiment from a JSON config and
writes per-seed CSVs, a summary CSV, a metadata file, and report
figures.  ``filter`` runs the configured filters over an external
measurement CSV.  ``verify`` executes the randomized oracle suites.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, KflsError
from .experiment import (
    ExperimentConfig,
    FilterTrace,
    load_config,
    metadata_document,
    run_columns,
    run_csv_text,
    run_experiment,
    run_filters,
    summary_csv_text,
    _fmt,
)
from .verify import DEFAULT_SEED, SUITE_NAMES, run_suite


def _write_text(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(text)


def _fail(message: str, code: int = 1) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_simulate(args) -> int:
    try:
        config = load_config(args.config)
    except (ConfigError, OSError) as exc:
        return _fail(str(exc))
    if args.seed is not None:
        config = ExperimentConfig(
            plant=config.plant,
            horizon=config.horizon,
            seeds=(args.seed,),
            gamma=config.gamma,
            x0=config.x0,
            p0=config.p0,
            filters=config.filters,
        )
    elif args.seeds is not None:
        config = ExperimentConfig(
            plant=config.plant,
            horizon=config.horizon,
            seeds=tuple(range(args.seeds)),
            gamma=config.gamma,
            x0=config.x0,
            p0=config.p0,
            filters=config.filters,
        )

    result = run_experiment(config)
    out = Path(args.out)
    try:
        for run in result.runs:
            _write_text(out / f"run_seed{run.seed}.csv", run_csv_text(run))
        _write_text(out / "summary.csv", summary_csv_text(result.summary))
        config_bytes = Path(args.config).read_bytes()
        _write_text(
            out / "metadata.json",
            json.dumps(metadata_document(config_bytes, config.seeds), indent=2) + "\n",
        )
        if args.figures != "none":
            from .figures import render_run_figures

            targets = result.runs if args.figures == "all" else result.runs[:1]
            for run in targets:
                render_run_figures(run, out)
    except OSError as exc:
        return _fail(str(exc))

    n_collisions = len(result.trajectory.collision_times)
    print(f"wrote {len(result.runs)} run file(s) to {out} ({n_collisions} collision(s) detected)")
    for row in result.summary:
        if row.seed == "mean":
            print(
                f"mean RMSE {row.filter_name}: overall {row.rmse_overall:.4f}, "
                f"post-collision {row.rmse_post_collision:.4f}"
            )
    return 0


def _read_data_file(path: Path, config: ExperimentConfig) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Parse an external data CSV into (k, y, u) with field-level errors."""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: no rows")
        for column in ("k", "y"):
            if column not in reader.fieldnames:
                raise ConfigError(f"{path}: missing column '{column}'")
        has_u = "u" in reader.fieldnames
        ks, ys, us = [], [], []
        for index, row in enumerate(reader):
            try:
                ks.append(int(float(row["k"])))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: row {index}: bad step index {row['k']!r}") from exc
            try:
                y = float(row["y"])
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"{path}: row {index}: bad measurement {row['y']!r}") from exc
            if not math.isfinite(y):
                raise ConfigError(f"{path}: row {index}: non-finite measurement {row['y']!r}")
            ys.append(y)
            if has_u:
                try:
                    u = float(row["u"])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{path}: row {index}: bad input {row['u']!r}") from exc
                if not math.isfinite(u):
                    raise ConfigError(f"{path}: row {index}: non-finite input {row['u']!r}")
                us.append(u)
    if not ys:
        raise ConfigError(f"{path}: no rows")
    y_arr = np.array(ys)
    u_arr = np.array(us) if has_u else config.inputs(len(ys))
    return ks, y_arr, u_arr


def _estimates_csv_text(config: ExperimentConfig, ks, y, traces: list[FilterTrace]) -> str:
    specs = [trace.spec for trace in traces]
    cols = [c for c in run_columns(specs) if c not in ("z_true", "zdot_true")]
    lines = [",".join(cols)]
    adaptive = [t for t in traces if t.spec.kind == "adaptive"]
    ts = config.plant.ts
    for row, k in enumerate(ks):
        cells = [str(k), _fmt(k * ts), _fmt(y[row])]
        for trace in traces:
            cells += [_fmt(trace.estimates[row, 0]), _fmt(trace.estimates[row, 1])]
        for trace in adaptive:
            cells.append(_fmt(trace.lam[row]))
        for trace in traces:
            cells += [_fmt(trace.p_diag[row, 0]), _fmt(trace.p_diag[row, 1])]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def cmd_filter(args) -> int:
    try:
        config = load_config(args.config)
        ks, y, u = _read_data_file(Path(args.data), config)
    except (ConfigError, OSError) as exc:
        return _fail(str(exc))
    try:
        traces = run_filters(config, y, u)
    except KflsError as exc:
        return _fail(str(exc))
    out = Path(args.out)
    try:
        _write_text(out / "estimates.csv", _estimates_csv_text(config, ks, y, traces))
    except OSError as exc:
        return _fail(str(exc))
    print(f"wrote estimates for {len(y)} rows to {out / 'estimates.csv'}")
    return 0


def cmd_verify(args) -> int:
    if args.suite_positional and args.suite and args.suite_positional != args.suite:
        return _fail(
            f"conflicting suites '{args.suite_positional}' and '{args.suite}'", code=2
        )
    name = args.suite_positional or args.suite or "all"
    results = run_suite(name, args.seed)
    failed = 0
    for suite, check in results:
        print(f"[{suite}] {check.line()}")
        if not check.passed:
            failed += 1
    if failed:
        print(f"{failed} check(s) failed", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kfls",
        description="State estimation experiments with forgetting-based adaptive Kalman filters",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the wall-collision experiment from a config")
    sim.add_argument("--config", required=True, help="JSON experiment configuration")
    sim.add_argument("--out", default="results", help="output directory (default: results)")
    sim.add_argument("--seed", type=int, default=None, help="run a single seed instead of the configured list")
    sim.add_argument("--seeds", type=int, default=None, help="run seeds 0..N-1 instead of the configured list")
    sim.add_argument(
        "--figures",
        choices=("first", "all", "none"),
        default="first",
        help="render report figures for the first seed, every seed, or not at all",
    )
    sim.set_defaults(func=cmd_simulate)

    filt = sub.add_parser("filter", help="run the configured filters over an external data CSV")
    filt.add_argument("data", help="CSV with columns k, y and optionally u")
    filt.add_argument("--config", required=True, help="JSON experiment configuration (provides the model)")
    filt.add_argument("--out", default="results", help="output directory (default: results)")
    filt.set_defaults(func=cmd_filter)

    ver = sub.add_parser("verify", help="run the randomized oracle suites")
    ver.add_argument(
        "suite_positional",
        nargs="?",
        choices=SUITE_NAMES,
        metavar="suite",
        help=f"suite to run: {', '.join(SUITE_NAMES)} (default: all)",
    )
    ver.add_argument("--suite", choices=SUITE_NAMES, default=None, help="suite to run (flag form)")
    ver.add_argument("--seed", type=int, default=DEFAULT_SEED, help="seed of the randomized checks")
    ver.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
