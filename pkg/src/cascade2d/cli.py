"""Command-line surface.

Subcommands: ``run`` (integrate, snapshot, report), ``diagnose`` (rebuild
tables from snapshot files), ``sweep`` (multi-point cascade experiments),
``verify-kernels`` (print the analytic identity table), and ``report``
(re-render a report directory).  Exit codes: 0 success, 1 usage error,
2 runtime failure.
"""

from __future__ import annotations

import argparse
import glob as globmod
import json
import math
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .config import ConfigError, config_echo, load_config
from .diagnostics import (
    DiagnosticAccumulator,
    balance_report,
    build_ell_grid,
    energy_spectrum_from_radial,
    khm_residuals,
    quadratic_functionals,
    structure_functions,
)
from .experiment import SweepConfig, run_sweep
from .experiment import _batch_size_for as _inline_batch_size
from .integrator import RunConfig, Snapshot, run
from .integrator import _assemble_stats as _stats_from_series
from .kernels import verify_identities
from .reports import (
    BALANCE_FILE,
    CONFIG_ECHO_FILE,
    CORRELATOR_FILE,
    KHM_FILE,
    SPECTRUM_FILE,
    STATS_FILE,
    STRUCTURE_FILE,
    SWEEP_REPORT_FILE,
    correlator_csv,
    khm_csv,
    read_csv,
    spectrum_csv,
    structure_csv,
    write_provenance,
    write_run_report,
    write_sweep_report,
)
from .snapshots import atomic_write_text, load_checkpoint, load_snapshot, save_checkpoint, save_snapshot
from .spectral import SpectralScalarField, make_grid

SNAPSHOT_DIR = "snapshots"
CHECKPOINT_FILE = "checkpoint.json"


class UsageError(ValueError):
    """Bad invocation or bad inputs; maps to exit code 1."""


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cascade2d",
        description="Stochastic 2d cascade simulations and their flux diagnostics.",
    )
    sub = parser.add_subparsers(dest="command")

    p_run = sub.add_parser("run", help="integrate one configuration and write its report")
    p_run.add_argument("--config", required=True, help="JSON run configuration")
    p_run.add_argument("--resume", help="checkpoint JSON written by a previous run")
    p_run.add_argument("--out", required=True, help="report directory")
    p_run.set_defaults(func=_cmd_run)

    p_diag = sub.add_parser("diagnose", help="rebuild diagnostic tables from snapshots")
    p_diag.add_argument("--snapshots", required=True, help="glob of .c2ds files")
    p_diag.add_argument("--out", required=True, help="report directory")
    p_diag.add_argument(
        "--config",
        help="run config; enables the balance report and flux residuals",
    )
    p_diag.add_argument(
        "--ell-points",
        type=int,
        default=96,
        help="separation count when no config sets the grid (default 96)",
    )
    p_diag.add_argument(
        "--angles",
        type=int,
        default=0,
        help="if > 0, also emit direction-sampled structure functions at this many angles",
    )
    p_diag.set_defaults(func=_cmd_diagnose)

    p_sweep = sub.add_parser("sweep", help="run a multi-point cascade experiment")
    p_sweep.add_argument("--config", required=True, help="JSON sweep configuration")
    p_sweep.add_argument("--out", required=True, help="report directory")
    p_sweep.add_argument(
        "--jobs",
        type=int,
        help="worker processes (default: CASCADE_JOBS env var, then 1)",
    )
    p_sweep.set_defaults(func=_cmd_sweep)

    p_verify = sub.add_parser("verify-kernels", help="check the analytic kernel identities")
    p_verify.set_defaults(func=_cmd_verify_kernels)

    p_report = sub.add_parser("report", help="re-render an existing report directory")
    p_report.add_argument("--in", dest="report_dir", required=True, help="report directory")
    p_report.set_defaults(func=_cmd_report)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if getattr(args, "func", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except (UsageError, ConfigError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure, exit 2 per contract
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _require_run_config(path) -> RunConfig:
    config = load_config(path)
    if not isinstance(config, RunConfig):
        raise UsageError(f"{path} is a sweep configuration; use the sweep subcommand")
    return config


def _snapshot_name(index: int) -> str:
    return f"sample_{index:06d}.c2ds"


def _cmd_run(args) -> int:
    config = _require_run_config(args.config)
    out = Path(args.out)
    snap_dir = out / SNAPSHOT_DIR
    snap_dir.mkdir(parents=True, exist_ok=True)
    write_provenance(out, config_echo(config))

    grid = config.grid
    spec = config.forcing.build(grid)
    accumulator = DiagnosticAccumulator(grid, batch_size=_inline_batch_size(config))
    emitted = 0

    resume = None
    if args.resume:
        resume = load_checkpoint(args.resume, config)
        prior = sorted(snap_dir.glob("*.c2ds"))[: len(resume.sample_times)]
        if len(prior) != len(resume.sample_times):
            raise UsageError(
                f"{snap_dir} holds {len(prior)} snapshots but the checkpoint "
                f"recorded {len(resume.sample_times)} emissions"
            )
        for path in prior:
            accumulator.add(SpectralScalarField.from_real(grid, load_snapshot(path).payload))
        emitted = len(prior)

    def sink(snapshot: Snapshot) -> None:
        nonlocal emitted
        save_snapshot(snapshot, snap_dir / _snapshot_name(emitted))
        accumulator.add(SpectralScalarField.from_real(grid, snapshot.payload))
        emitted += 1

    result = run(config, sink, resume=resume)
    save_checkpoint(result, config, out / CHECKPOINT_FILE)

    if accumulator.sample_count == 0:
        atomic_write_text(out / STATS_FILE, json.dumps({"sample_count": 0}, indent=2) + "\n")
        print(f"run finished at t={result.final.t:g} with no samples; wrote {out}")
        return 0

    ell = build_ell_grid(grid, config.forcing.k_max)
    correlators = accumulator.correlator_table(ell, config.gamma)
    structure = accumulator.structure_table(ell)
    khm = khm_residuals(correlators, structure, spec, config.nu, config.alpha)
    balance = balance_report(result.stats.means, spec, config.nu, config.alpha)
    spectrum = energy_spectrum_from_radial(grid, accumulator.mean_spectra()["velocity_spec"])
    write_run_report(
        out,
        echo=config_echo(config),
        stats=result.stats,
        balance=balance,
        correlators=correlators,
        structure=structure,
        khm=khm,
        spectrum=spectrum,
    )
    print(
        f"run finished: t={result.final.t:g}, {result.stats.sample_count} samples, "
        f"energy residual {balance.energy_relative:+.2%}, "
        f"enstrophy residual {balance.enstrophy_relative:+.2%}; wrote {out}"
    )
    return 0


def _consistent_header(snaps: list[Snapshot], paths: list[str]) -> None:
    first = snaps[0]
    for snap, path in zip(snaps, paths):
        same = (
            snap.payload.shape == first.payload.shape
            and snap.box_size == first.box_size
            and snap.params == first.params
            and snap.seed == first.seed
        )
        if not same:
            raise UsageError(
                f"{path} disagrees with {paths[0]} on grid, box, parameters, or seed"
            )


def _cmd_diagnose(args) -> int:
    paths = sorted(globmod.glob(args.snapshots))
    if not paths:
        raise UsageError(f"no snapshots match {args.snapshots!r}")
    snaps = [load_snapshot(p) for p in paths]
    _consistent_header(snaps, paths)
    first = snaps[0]
    n = first.payload.shape[0]
    grid = make_grid(first.box_size, n)
    params = first.params

    config = None
    if args.config:
        config = _require_run_config(args.config)
        mismatches = [
            name
            for name, got, expect in (
                ("lambda", config.box_size, first.box_size),
                ("grid_n", config.n, n),
                ("nu", config.nu, params.nu),
                ("alpha", config.alpha, params.alpha),
                ("gamma", config.gamma, params.gamma),
            )
            if got != expect
        ]
        if mismatches:
            raise UsageError(
                f"config does not match the snapshot headers on: {', '.join(mismatches)}"
            )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if config is not None:
        echo = config_echo(config)
        ell = build_ell_grid(grid, config.forcing.k_max)
    else:
        echo = {
            "nu": params.nu,
            "alpha": params.alpha,
            "gamma": params.gamma,
            "lambda": first.box_size,
            "grid_n": n,
            "seed": first.seed,
        }
        if args.ell_points < 2:
            raise UsageError(f"--ell-points must be at least 2, got {args.ell_points}")
        ell = np.geomspace(2.0 * first.box_size / n, first.box_size / 2.0, args.ell_points)
    write_provenance(out, echo)

    accumulator = DiagnosticAccumulator(
        grid, batch_size=max(1, math.ceil(len(snaps) / 32))
    )
    fields = []
    times = []
    series = {}
    for snap in snaps:
        field = SpectralScalarField.from_real(grid, snap.payload)
        fields.append(field)
        accumulator.add(field)
        times.append(snap.t)
        for key, value in quadratic_functionals(field, params.gamma).items():
            series.setdefault(key, []).append(value)
    stats = _stats_from_series(times, series)
    correlators = accumulator.correlator_table(ell, params.gamma)
    structure = accumulator.structure_table(ell)
    spectrum = energy_spectrum_from_radial(grid, accumulator.mean_spectra()["velocity_spec"])

    atomic_write_text(out / STATS_FILE, json.dumps(asdict(stats), indent=2) + "\n")
    atomic_write_text(out / CORRELATOR_FILE, correlator_csv(correlators))
    atomic_write_text(out / STRUCTURE_FILE, structure_csv(structure))
    atomic_write_text(out / SPECTRUM_FILE, spectrum_csv(spectrum))
    if config is not None:
        spec = config.forcing.build(grid)
        khm = khm_residuals(correlators, structure, spec, config.nu, config.alpha)
        balance = balance_report(stats.means, spec, config.nu, config.alpha)
        atomic_write_text(out / KHM_FILE, khm_csv(khm))
        atomic_write_text(out / BALANCE_FILE, json.dumps(asdict(balance), indent=2) + "\n")
    if args.angles > 0:
        if args.angles < 16:
            raise UsageError(f"--angles needs at least 16 directions, got {args.angles}")
        sampled = structure_functions(fields, ell, angle_count=args.angles)
        atomic_write_text(out / "structure_functions_sampled.csv", structure_csv(sampled))
    print(f"diagnosed {len(snaps)} snapshots; wrote {out}")
    return 0


def _cmd_sweep(args) -> int:
    config = load_config(args.config)
    if not isinstance(config, SweepConfig):
        raise UsageError(f"{args.config} is a run configuration; use the run subcommand")
    report = run_sweep(config, jobs=args.jobs)
    write_sweep_report(report, args.out, config_echo(config))
    for label, reason in report.failures:
        print(f"point {label} failed: {reason}", file=sys.stderr)
    for point in report.points:
        plateau_bits = ", ".join(
            f"{law}: {'n/a' if not stats.defined else f'{stats.band_fraction:.0%} in band'}"
            for law, stats in point.plateaus.items()
        )
        print(
            f"{point.label}: {point.sample_count} samples, "
            f"energy residual {point.balance.energy_relative:+.2%}, "
            f"enstrophy residual {point.balance.enstrophy_relative:+.2%}"
            + (f"; {plateau_bits}" if plateau_bits else "")
        )
    print(f"wrote {args.out}")
    if not report.points:
        print("error: every sweep point failed", file=sys.stderr)
        return 2
    return 0


def _cmd_verify_kernels(args) -> int:
    checks = verify_identities()
    name_width = max(len(check.name) for check in checks)
    all_passed = True
    for check in checks:
        status = "ok" if check.passed else "FAIL"
        all_passed &= check.passed
        print(
            f"{check.name:<{name_width}}  observed {check.observed:.3e}  "
            f"bound {check.bound:.3e}  {status}"
        )
    print("all kernel identities hold" if all_passed else "kernel identity FAILURES above")
    return 0 if all_passed else 2


def _render_table(title: str, columns: dict[str, np.ndarray]) -> None:
    print(f"\n{title}")
    names = list(columns)
    widths = [max(len(name), 12) for name in names]
    print("  ".join(name.rjust(width) for name, width in zip(names, widths)))
    length = len(next(iter(columns.values())))
    for i in range(length):
        print(
            "  ".join(
                f"{columns[name][i]:>{width}.6g}" for name, width in zip(names, widths)
            )
        )


def _cmd_report(args) -> int:
    directory = Path(args.report_dir)
    sweep_path = directory / SWEEP_REPORT_FILE
    stats_path = directory / STATS_FILE
    echo_path = directory / CONFIG_ECHO_FILE
    if echo_path.exists():
        print(f"configuration: {echo_path.read_text().strip()}")
    if sweep_path.exists():
        doc = json.loads(sweep_path.read_text())
        print(f"\nsweep mode: {doc['mode']}")
        for label, reason in doc.get("failures", []):
            print(f"failed point {label}: {reason}")
        for point in doc.get("points", []):
            balance = point["balance"]
            print(
                f"\npoint {point['label']}: {point['sample_count']} samples, "
                f"energy residual {balance['energy_relative']:+.2%}, "
                f"enstrophy residual {balance['enstrophy_relative']:+.2%}"
            )
            scales = point["scales"]
            print(f"  scales: ell_nu={scales['ell_nu']:.4g} ell_alpha={scales['ell_alpha']:.4g}")
            for law, stats in point.get("plateaus", {}).items():
                if not stats["defined"]:
                    print(f"  {law}: no separations in window")
                    continue
                print(
                    f"  {law}: target {stats['target']:.4g}, mean {stats['mean']:.4g}, "
                    f"deviation {stats['relative_deviation']:.2%}, "
                    f"band fraction {stats['band_fraction']:.0%}"
                )
        return 0
    if stats_path.exists():
        stats = json.loads(stats_path.read_text())
        print(f"\nsamples: {stats.get('sample_count', 0)}")
        for key, value in stats.get("means", {}).items():
            error = stats.get("std_errors", {}).get(key, float("nan"))
            print(f"  {key:>16} = {value:.6g} +- {error:.2g}")
        balance_path = directory / BALANCE_FILE
        if balance_path.exists():
            balance = json.loads(balance_path.read_text())
            print("\nstationary budgets:")
            for key, value in balance.items():
                print(f"  {key:>20} = {value:.6g}")
        for name in (STRUCTURE_FILE, CORRELATOR_FILE, KHM_FILE, SPECTRUM_FILE):
            path = directory / name
            if path.exists():
                _render_table(name, read_csv(path))
        return 0
    raise UsageError(f"{directory} is not a report directory")


if __name__ == "__main__":
    sys.exit(main())
