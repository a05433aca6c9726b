"""Experiment CLI: run the filter comparison, validate configs, emit defaults.

Subcommands:

  bblr defaults            print the default config as YAML
  bblr validate CONFIG     parse and sanity-check a config
  bblr run CONFIG          simulate the configured modes, write artifacts

``run`` writes one trajectory CSV + JSON per mode, a ``summary.json`` with
per-mode safety statistics, a ``phase_plot.csv`` pairing the trajectories
with the sampled safe-set boundary, and (unless ``--no-plots``) the rendered
figures.

Exit codes: 0 success, 2 config error, 3 integrator blow-up, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import random
import sys
import time
from pathlib import Path

import numpy as np

from .config import (
    ConfigError,
    ExperimentConfig,
    config_to_yaml,
    default_config,
    load_config,
    validation_report,
)
from .plots import render_figures, safe_set_ellipse
from .sim import IntegrationDiverged, Trajectory, run_closed_loop

__all__ = ["main", "run_experiment"]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Path | str,
    modes: tuple[str, ...] | None = None,
    duration: float | None = None,
    render: bool = True,
) -> dict:
    """Run the configured modes and write all artifact files. Returns the summary."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    modes = tuple(modes) if modes else cfg.modes

    true_sys = cfg.build_true_system()
    nominal_sys = cfg.build_nominal_system()
    bf = cfg.build_barrier()
    filter_cfg = cfg.build_filter_config()
    basis = cfg.build_basis()
    learn_cfg = cfg.build_learning_config()

    trajectories: dict[str, Trajectory] = {}
    for mode in modes:
        sim_cfg = cfg.build_sim_config(mode, duration=duration)
        traj = run_closed_loop(
            sim_cfg, filter_cfg, true_sys, nominal_sys, bf, basis, learn_cfg
        )
        trajectories[mode] = traj
        traj.write_csv(out_dir / f"trajectory_{mode}.csv")
        traj.write_json(out_dir / f"trajectory_{mode}.json")

    summary = {"modes": {mode: tr.summary() for mode, tr in trajectories.items()}}
    with open(out_dir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)

    _write_phase_plot(trajectories, cfg, out_dir / "phase_plot.csv")
    if render:
        render_figures(trajectories, cfg.theta_max, cfg.thetadot_max, cfg.rho, out_dir)
    return summary


def _write_phase_plot(
    trajectories: dict[str, Trajectory], cfg: ExperimentConfig, path: Path
) -> None:
    """Long-format (series, theta, thetadot) pairs plus the safe-set boundary."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["series", "theta", "thetadot"])
        for mode, tr in trajectories.items():
            for i in range(len(tr)):
                writer.writerow(
                    [mode, f"{tr.states[i, 0]:.17g}", f"{tr.states[i, 1]:.17g}"]
                )
        for theta, thetadot in safe_set_ellipse(cfg.theta_max, cfg.thetadot_max):
            writer.writerow(["safe_set", f"{theta:.17g}", f"{thetadot:.17g}"])


def _cmd_defaults(args: argparse.Namespace) -> int:
    sys.stdout.write(config_to_yaml(default_config()))
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    ok = True
    for check, passed, detail in validation_report(cfg):
        tag = "ok" if passed else "warn" if check == "rho_condition" else "fail"
        ok = ok and (passed or check == "rho_condition")
        print(f"[{tag:4s}] {check}: {detail}")
    return EXIT_OK if ok else EXIT_CONFIG


def _cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    modes = tuple(args.mode) if args.mode else cfg.modes
    for mode in modes:
        if mode not in cfg.modes and mode not in ("unfiltered", "true_oracle", "nominal", "bblr"):
            print(f"config error: unknown mode {mode!r}", file=sys.stderr)
            return EXIT_CONFIG

    if args.seed_free:
        py_state = random.getstate()
        np_state = np.random.get_state()

    started = time.perf_counter()
    try:
        summary = run_experiment(
            cfg,
            args.out_dir,
            modes=modes,
            duration=args.duration,
            render=not args.no_plots,
        )
    except IntegrationDiverged as exc:
        print(f"integrator blow-up: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO
    elapsed = time.perf_counter() - started

    if args.seed_free:
        same_py = py_state == random.getstate()
        same_np = all(
            np.array_equal(a, b) if isinstance(a, np.ndarray) else a == b
            for a, b in zip(np_state, np.random.get_state())
        )
        if not (same_py and same_np):
            print("seed-free check failed: global RNG state was consumed", file=sys.stderr)
            return 1
        print("seed-free check: no global RNG use detected")

    for mode, stats in summary["modes"].items():
        final = ", ".join(f"{v:+.4f}" for v in stats["final_state"])
        print(
            f"mode={mode:12s} min_h={stats['min_h']:+.5f} final_state=[{final}] "
            f"infeasible_count={stats['infeasible_count']}"
        )
    print(f"artifacts written to {Path(args.out_dir).resolve()} ({elapsed:.1f}s)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bblr",
        description="Safety-filtered pendulum experiments with online barrier learning.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run the configured filter modes")
    p_run.add_argument("config", help="path to the experiment config (YAML)")
    p_run.add_argument(
        "--mode",
        action="append",
        choices=("unfiltered", "true_oracle", "nominal", "bblr"),
        help="run only this mode (repeatable)",
    )
    p_run.add_argument("--out-dir", default="results", help="artifact directory")
    p_run.add_argument("--duration", type=float, default=None, help="override duration [s]")
    p_run.add_argument(
        "--seed-free",
        action="store_true",
        help="assert that the pipeline consumes no global RNG state",
    )
    p_run.add_argument("--no-plots", action="store_true", help="skip figure rendering")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="parse and sanity-check a config")
    p_val.add_argument("config", help="path to the experiment config (YAML)")
    p_val.set_defaults(func=_cmd_validate)

    p_def = sub.add_parser("defaults", help="print the default config as YAML")
    p_def.set_defaults(func=_cmd_defaults)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
