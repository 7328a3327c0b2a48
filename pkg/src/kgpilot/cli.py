"""Command-line front end.

Subcommands: calibrate | run | ensemble | analytic | compare | export.
Outputs go to a run directory named by the content digest of the effective
configuration, so identical commands overwrite with identical bytes.  Each
run directory contains a ``manifest.txt`` sufficient to re-execute the
command.  Progress goes to stderr; stdout carries only data.

Exit codes: 0 success, 2 usage, 3 invalid configuration or parameters,
4 I/O or archive failure, 5 simulation failure (divergence, light-cone
breach, calibration), 6 data/format failure.
"""
from __future__ import annotations

import argparse
import hashlib
import os
import sys

import numpy as np

from . import __version__
from .analytic import AnalyticParams, ModeSet, born_density
from .config import (
    SCHEMA_VERSION,
    RunConfig,
    _parse_value,
    config_digest,
    default_config,
    dumps_config,
    ensure_valid,
    from_flat_dict,
    load_config,
    node_coords,
    to_flat_dict,
)
from .ensemble import (
    FORMAT_VERSION,
    EnsembleResult,
    calibrate,
    load as load_archive,
    normalize_forcing,
    run_ensemble,
    run_single,
    save as save_archive,
)
from .errors import (
    ArchiveError,
    CalibrationError,
    ConfigError,
    DataError,
    DivergenceError,
    KgpilotError,
    LightConeBreachError,
    OutOfDomainError,
    ParameterError,
)
from .reports import (
    figure_comparison,
    figure_ensemble,
    figure_heatmap,
    figure_trajectory,
    snapshot_matrix,
    write_comparison_summary,
    write_comparison_table,
    write_density_table,
    write_heatmap,
    write_snapshot_table,
    write_trajectory_table,
)
from .stats import analytic_density_series, compare, pdf_series

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_IO = 4
EXIT_SIMULATION = 5
EXIT_DATA = 6

_ERROR_CODES = (
    ((ConfigError, ParameterError), "config-error", EXIT_CONFIG),
    ((DivergenceError, LightConeBreachError, CalibrationError), "simulation-error", EXIT_SIMULATION),
    ((ArchiveError, OSError), "io-error", EXIT_IO),
    ((DataError, OutOfDomainError), "data-error", EXIT_DATA),
)


def _progress(message: str) -> None:
    print(message, file=sys.stderr, flush=True)


def _load_effective_config(args) -> RunConfig:
    if args.config is not None:
        config = load_config(args.config)
    else:
        config = default_config(horizon=args.horizon)
    if getattr(args, "seed", None) is not None:
        flat = to_flat_dict(config)
        flat["seed"] = args.seed
        config = from_flat_dict(flat)
    if getattr(args, "snapshots", None) is not None:
        flat = to_flat_dict(config)
        stride = max(1, config.grid.nt // args.snapshots) if args.snapshots else None
        flat["snapshot_stride"] = stride
        config = from_flat_dict(flat)
    for item in args.set or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        flat = to_flat_dict(config)
        if key not in flat:
            raise ConfigError(f"unknown config key {key!r}")
        flat[key] = _parse_value(key, value.strip())
        config = from_flat_dict(flat)
    ensure_valid(config)
    return config


def _run_dir(args, config_or_key, label: str) -> str:
    if args.output is not None:
        path = args.output
    else:
        if isinstance(config_or_key, RunConfig):
            digest = config_digest(config_or_key)
        else:
            digest = hashlib.sha256(repr(config_or_key).encode()).hexdigest()
        path = os.path.join("runs", f"{label}-{digest[:12]}")
    os.makedirs(path, exist_ok=True)
    return path


def _write_manifest(path: str, argv: list[str]) -> None:
    lines = [
        f"kgpilot_version = {__version__}",
        f"schema_version = {SCHEMA_VERSION}",
        f"format_version = {FORMAT_VERSION}",
        "command = kgpilot " + " ".join(argv),
    ]
    with open(os.path.join(path, "manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key=value config file")
    parser.add_argument("--horizon", type=float, default=40.0,
                        help="time horizon in tau_c when no --config is given (default 40)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override a config key (repeatable)")
    parser.add_argument("-o", "--output", help="output directory (default runs/<label>-<digest>)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kgpilot",
        description="Deterministic pilot-wave dynamics: forced Klein-Gordon field "
        "coupled to a relativistic guided particle.",
    )
    parser.add_argument(
        "--version",
        action="version",
        version=f"kgpilot {__version__} (config schema {SCHEMA_VERSION}, "
        f"archive format {FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("calibrate", help="measure the stagnant-particle wave amplitude")
    _add_config_options(p)

    p = sub.add_parser("run", help="single seeded simulation")
    _add_config_options(p)
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--snapshots", type=int, help="number of field snapshots to keep")
    p.add_argument("--no-normalize", action="store_true",
                   help="use epsilon_p as configured instead of calibrating to phi_char = 1")

    p = sub.add_parser("ensemble", help="seeded parallel ensemble")
    _add_config_options(p)
    p.add_argument("--runs", type=int, required=True, help="number of runs")
    p.add_argument("--seed-base", type=int, default=1, help="seed of the first run")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default $KGPILOT_WORKERS or 1)")

    p = sub.add_parser("analytic", help="evaluate the Gaussian-response Born density")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--a", type=float, default=2.0, help="Gaussian width (default 2)")
    p.add_argument("--beta-amp", type=float, default=1.0, help="Gaussian amplitude (default 1)")
    p.add_argument("--x-p0", type=float, default=0.0, help="Gaussian center (default 0)")
    p.add_argument("--half-domain", type=float, default=40.0, help="series half-domain L (default 40)")
    p.add_argument("--n-modes", type=int, default=4096, help="Fourier modes (default 4096)")
    p.add_argument("--t-max", type=float, default=5.0, help="final time (default 5)")
    p.add_argument("--times", type=int, default=11, help="number of time samples (default 11)")
    p.add_argument("--points", type=int, default=801, help="spatial samples (default 801)")
    p.add_argument("--x-half", type=float, default=20.0, help="evaluation half-width (default 20)")

    p = sub.add_parser("compare", help="ensemble PDF vs analytic Born density")
    p.add_argument("--ensemble", required=True, help="ensemble archive directory")
    p.add_argument("-o", "--output", help="output directory")
    p.add_argument("--bandwidth", type=float, default=1.0, help="KDE bandwidth (default 1 lambda_c)")
    p.add_argument("--analytic-auto", action="store_true",
                   help="derive analytic parameters from the ensemble (a = 2*bandwidth, shared grid)")
    p.add_argument("--a", type=float, help="analytic Gaussian width (with --analytic-auto omitted)")
    p.add_argument("--t-max", type=float, default=5.0, help="last compared time (default 5)")
    p.add_argument("--times", type=int, default=6, help="number of compared times (default 6)")

    p = sub.add_parser("export", help="flat columnar export of an ensemble archive")
    p.add_argument("--ensemble", required=True, help="ensemble archive directory")
    p.add_argument("-o", "--output", help="output directory")
    return parser


# --- subcommand bodies -------------------------------------------------------

def _cmd_calibrate(args, argv) -> int:
    config = _load_effective_config(args)
    _progress("calibrating (stagnant particle, 10 tau_c)...")
    phi_char = calibrate(config)
    out = _run_dir(args, config, "calibrate")
    _write_manifest(out, argv)
    with open(os.path.join(out, "config.cfg"), "w", encoding="utf-8") as fh:
        fh.write(dumps_config(config))
    with open(os.path.join(out, "calibration.txt"), "w", encoding="utf-8") as fh:
        fh.write(f"phi_char = {phi_char!r}\n")
        fh.write(f"epsilon_p_normalized = {config.params.epsilon_p / phi_char!r}\n")
    print(f"phi_char = {phi_char!r}")
    _progress(f"wrote {out}")
    return EXIT_OK


def _cmd_run(args, argv) -> int:
    config = _load_effective_config(args)
    if args.no_normalize:
        phi_char = 1.0
    else:
        _progress("calibrating...")
        config, phi_char = normalize_forcing(config)
    out = _run_dir(args, config, "run")
    _write_manifest(out, argv)
    with open(os.path.join(out, "config.cfg"), "w", encoding="utf-8") as fh:
        fh.write(dumps_config(config))
    _progress(f"running seed {config.seed} for {config.grid.nt} steps...")
    result = run_single(config, 1.0 if not args.no_normalize else phi_char)
    write_trajectory_table(os.path.join(out, "trajectory.txt"), [result.record])
    figure_trajectory(os.path.join(out, "trajectory.png"), result.record)
    if result.snapshots:
        for index, snap in enumerate(result.snapshots):
            write_snapshot_table(os.path.join(out, f"snapshot_{index:04d}.txt"), snap)
        matrix = snapshot_matrix(result.snapshots)
        write_heatmap(os.path.join(out, "field.ppm"), matrix)
        grid = config.grid
        figure_heatmap(
            os.path.join(out, "field.png"),
            matrix,
            (grid.x_min, grid.x_max, result.snapshots[0].t, result.snapshots[-1].t),
        )
    _progress(f"wrote {out}")
    return EXIT_OK


def _cmd_ensemble(args, argv) -> int:
    config = _load_effective_config(args)
    workers = args.workers
    if workers is None:
        workers = int(os.environ.get("KGPILOT_WORKERS", "1"))
    if args.runs < 1 or workers < 1:
        raise ConfigError("--runs and --workers must be positive")
    _progress(f"ensemble: {args.runs} runs, seeds {args.seed_base}.."
              f"{args.seed_base + args.runs - 1}, {workers} workers")
    result = run_ensemble(config, args.runs, args.seed_base, workers=workers)
    out = _run_dir(args, result.config, "ensemble")
    _write_manifest(out, argv)
    archive = os.path.join(out, "archive")
    save_archive(result, archive)
    write_trajectory_table(os.path.join(out, "trajectories.txt"), result.records)
    figure_ensemble(os.path.join(out, "ensemble.png"), result)
    if result.failures:
        _progress(f"warning: {len(result.failures)} of {args.runs} runs failed")
    _progress(f"wrote {out}")
    return EXIT_OK


def _cmd_analytic(args, argv) -> int:
    params = AnalyticParams(
        beta_amp=args.beta_amp,
        a=args.a,
        x_p0=args.x_p0,
        L=args.half_domain,
        n_modes=args.n_modes,
    )
    key = (params, args.t_max, args.times, args.points, args.x_half)
    out = _run_dir(args, key, "analytic")
    _write_manifest(out, argv)
    xs = np.linspace(-args.x_half, args.x_half, args.points)
    times = np.linspace(0.0, args.t_max, args.times)
    _progress(f"evaluating {len(times)} times x {len(xs)} points...")
    modes = ModeSet(params)
    rows = np.stack([born_density(xs, float(t), params, modes=modes) for t in times])
    from .stats import DensitySeries

    series = DensitySeries(times=times, x_centers=xs, densities=rows)
    write_density_table(os.path.join(out, "born_density.txt"), series)
    write_heatmap(os.path.join(out, "born_density.ppm"), rows)
    figure_heatmap(os.path.join(out, "born_density.png"), rows,
                   (xs[0], xs[-1], times[0], times[-1]))
    _progress(f"wrote {out}")
    return EXIT_OK


def _compare_series(result: EnsembleResult, args):
    sampled = result.records[0].times
    t_max = min(args.t_max, float(sampled[-1]))
    wanted = np.linspace(0.0, t_max, args.times)
    dt_sample = float(sampled[1] - sampled[0])
    times = np.unique(np.round(wanted / dt_sample)) * dt_sample
    xs = node_coords(result.config.grid)
    keep = np.abs(xs) <= 20.0
    x_grid = xs[keep]
    empirical = pdf_series(result, args.bandwidth, x_grid, times)
    if args.analytic_auto or args.a is None:
        a = 2.0 * args.bandwidth
    else:
        a = args.a
    half_domain = max(abs(result.config.grid.x_min), abs(result.config.grid.x_max))
    params = AnalyticParams(beta_amp=1.0, a=a, x_p0=result.config.x0, L=half_domain,
                            n_modes=4096)
    analytic = analytic_density_series(params, x_grid, times)
    return empirical, analytic


def _cmd_compare(args, argv) -> int:
    result = load_archive(args.ensemble)
    _progress(f"loaded {len(result.records)} trajectories")
    empirical, analytic = _compare_series(result, args)
    report = compare(empirical, analytic)
    key = (config_digest(result.config), args.bandwidth, args.analytic_auto, args.a,
           args.t_max, args.times)
    out = _run_dir(args, key, "compare")
    _write_manifest(out, argv)
    write_density_table(os.path.join(out, "empirical.txt"), empirical)
    write_density_table(os.path.join(out, "analytic.txt"), analytic)
    write_heatmap(os.path.join(out, "empirical.ppm"), empirical.densities)
    write_heatmap(os.path.join(out, "analytic.ppm"), analytic.densities)
    write_comparison_table(os.path.join(out, "comparison.txt"), report)
    write_comparison_summary(os.path.join(out, "summary.txt"), report)
    figure_comparison(os.path.join(out, "comparison.png"), empirical, analytic)
    for kv in sorted(report.summary().items()):
        print(f"{kv[0]} = {kv[1]!r}")
    _progress(f"wrote {out}")
    return EXIT_OK


def _cmd_export(args, argv) -> int:
    result = load_archive(args.ensemble)
    out = _run_dir(args, result.config, "export")
    _write_manifest(out, argv)
    write_trajectory_table(os.path.join(out, "trajectories.txt"), result.records)
    _progress(f"wrote {out}")
    return EXIT_OK


_DISPATCH = {
    "calibrate": _cmd_calibrate,
    "run": _cmd_run,
    "ensemble": _cmd_ensemble,
    "analytic": _cmd_analytic,
    "compare": _cmd_compare,
    "export": _cmd_export,
}


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) if exc.code != 2 else EXIT_USAGE
    try:
        return _DISPATCH[args.command](args, argv)
    except KgpilotError as exc:
        for classes, label, code in _ERROR_CODES:
            if isinstance(exc, classes):
                print(f"kgpilot: {label}: {exc}", file=sys.stderr)
                return code
        print(f"kgpilot: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"kgpilot: io-error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
