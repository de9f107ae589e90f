"""CSV and JSON report emission.

Every CSV value is serialized with 17 significant digits, which is enough
for an f64 to round-trip exactly; JSON floats round-trip through Python's
shortest-repr rule.  All writes are atomic.  File names are module
constants so the CLI and the tests never drift apart on spelling.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .diagnostics import (
    BalanceReport,
    CompactnessReport,
    CorrelatorTable,
    EnergySpectrum,
    KhmResiduals,
    StructureFunctionTable,
)
from .experiment import PointReport, SweepReport
from .integrator import StationaryStats
from .snapshots import atomic_write_text

__all__ = [
    "STRUCTURE_FILE",
    "CORRELATOR_FILE",
    "KHM_FILE",
    "SPECTRUM_FILE",
    "BALANCE_FILE",
    "STATS_FILE",
    "COMPACTNESS_FILE",
    "CONFIG_ECHO_FILE",
    "VERSION_FILE",
    "SWEEP_REPORT_FILE",
    "POINT_SUMMARY_FILE",
    "structure_csv",
    "correlator_csv",
    "khm_csv",
    "spectrum_csv",
    "read_csv",
    "write_run_report",
    "write_sweep_report",
    "write_provenance",
]

STRUCTURE_FILE = "structure_functions.csv"
CORRELATOR_FILE = "correlators.csv"
KHM_FILE = "khm_residuals.csv"
SPECTRUM_FILE = "spectrum.csv"
BALANCE_FILE = "balance.json"
STATS_FILE = "stats.json"
COMPACTNESS_FILE = "compactness.json"
CONFIG_ECHO_FILE = "config.json"
VERSION_FILE = "VERSION.txt"
SWEEP_REPORT_FILE = "report.json"
POINT_SUMMARY_FILE = "summary.json"


def _fmt(value) -> str:
    return f"{float(value):.17g}"


def _csv(header: list[str], columns: list) -> str:
    arrays = [np.asarray(col) for col in columns]
    length = len(arrays[0])
    if any(len(col) != length for col in arrays):
        raise ValueError("all CSV columns must share a length")
    lines = [",".join(header)]
    for i in range(length):
        lines.append(",".join(_fmt(col[i]) for col in arrays))
    return "\n".join(lines) + "\n"


def structure_csv(table: StructureFunctionTable) -> str:
    """Third-order tables in the fixed interchange schema."""
    count = np.full(len(table.ell), table.sample_count)
    return _csv(
        ["ell", "D_frak", "D_frak_se", "D", "D_se", "D_par", "D_par_se", "n_samples"],
        [
            table.ell,
            table.vorticity,
            table.std_errors["vorticity"],
            table.velocity,
            table.std_errors["velocity"],
            table.longitudinal,
            table.std_errors["longitudinal"],
            count,
        ],
    )


def correlator_csv(table: CorrelatorTable) -> str:
    """Two-point correlators, same value/se layout as the structure CSV.

    The damped and separation-derivative companions ride along as plain
    value columns; they are deterministic transforms of the same spectra,
    so they carry no separate errors.
    """
    count = np.full(len(table.ell), table.sample_count)
    return _csv(
        [
            "ell",
            "corr_vorticity",
            "corr_vorticity_se",
            "corr_velocity",
            "corr_velocity_se",
            "corr_longitudinal",
            "corr_longitudinal_se",
            "corr_vorticity_damped",
            "corr_velocity_damped",
            "corr_longitudinal_damped",
            "corr_vorticity_deriv",
            "corr_velocity_deriv",
            "corr_longitudinal_deriv",
            "n_samples",
        ],
        [
            table.ell,
            table.vorticity,
            table.std_errors["vorticity"],
            table.velocity,
            table.std_errors["velocity"],
            table.longitudinal,
            table.std_errors["longitudinal"],
            table.vorticity_damped,
            table.velocity_damped,
            table.longitudinal_damped,
            table.vorticity_deriv,
            table.velocity_deriv,
            table.longitudinal_deriv,
            count,
        ],
    )


def khm_csv(residuals: KhmResiduals) -> str:
    header = ["ell"]
    columns = [residuals.ell]
    for law in ("vorticity", "velocity", "longitudinal"):
        for part in ("lhs", "rhs", "residual", "normalized"):
            header.append(f"{law}_{part}")
            columns.append(getattr(residuals, f"{law}_{part}"))
    return _csv(header, columns)


def spectrum_csv(spectrum: EnergySpectrum) -> str:
    return _csv(
        ["wavenumber", "energy", "mode_count", "compensated_five_thirds", "compensated_cubed"],
        [
            spectrum.wavenumber,
            spectrum.energy,
            spectrum.mode_count,
            spectrum.compensated_five_thirds,
            spectrum.compensated_cubed,
        ],
    )


def read_csv(path) -> dict[str, np.ndarray]:
    """Read back one of our CSVs as {column name: float array}."""
    lines = Path(path).read_text().strip().split("\n")
    header = lines[0].split(",")
    if not lines[1:]:
        return {name: np.empty(0) for name in header}
    data = np.array([[float(cell) for cell in line.split(",")] for line in lines[1:]])
    return {name: data[:, i] for i, name in enumerate(header)}


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, dict):
        return {key: _jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(item) for item in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def _dump_json(doc) -> str:
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def write_provenance(out_dir, echo: dict) -> None:
    """Drop the config echo and the code version into a report directory."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / CONFIG_ECHO_FILE, _dump_json(echo))
    atomic_write_text(out / VERSION_FILE, f"cascade2d {__version__}\n")


def write_run_report(
    out_dir,
    *,
    echo: dict,
    stats: StationaryStats,
    balance: BalanceReport,
    correlators: CorrelatorTable,
    structure: StructureFunctionTable,
    khm: KhmResiduals,
    spectrum: EnergySpectrum,
) -> None:
    """Emit the full table set of one stationary run."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_provenance(out, echo)
    atomic_write_text(out / STATS_FILE, _dump_json(asdict(stats)))
    atomic_write_text(out / BALANCE_FILE, _dump_json(asdict(balance)))
    atomic_write_text(out / CORRELATOR_FILE, correlator_csv(correlators))
    atomic_write_text(out / STRUCTURE_FILE, structure_csv(structure))
    atomic_write_text(out / KHM_FILE, khm_csv(khm))
    atomic_write_text(out / SPECTRUM_FILE, spectrum_csv(spectrum))


def _point_summary(point: PointReport) -> dict:
    return {
        "label": point.label,
        "nu": point.nu,
        "alpha": point.alpha,
        "gamma": point.gamma,
        "lambda": point.box_size,
        "grid_n": point.n,
        "seeds": list(point.seeds),
        "sample_count": point.sample_count,
        "epsilon": point.epsilon,
        "eta": point.eta,
        "means": point.means,
        "balance": asdict(point.balance),
        "scales": asdict(point.scales),
        "plateaus": {law: asdict(stats) for law, stats in point.plateaus.items()},
    }


def write_sweep_report(report: SweepReport, out_dir, echo: dict) -> None:
    """Emit the sweep summary plus one subdirectory per surviving point."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_provenance(out, echo)
    summary = {
        "mode": report.mode,
        "failures": report.failures,
        "wad_viscous_trend": report.wad_viscous_trend,
        "wad_friction_trend": report.wad_friction_trend,
        "enstrophy_rate_trend": report.enstrophy_rate_trend,
        "energy_rate_trend": report.energy_rate_trend,
        "wad_viscous_decreasing": report.wad_viscous_decreasing,
        "wad_friction_decreasing": report.wad_friction_decreasing,
        "points": [_point_summary(point) for point in report.points],
    }
    atomic_write_text(out / SWEEP_REPORT_FILE, _dump_json(summary))
    for point in report.points:
        point_dir = out / point.label
        point_dir.mkdir(exist_ok=True)
        atomic_write_text(point_dir / POINT_SUMMARY_FILE, _dump_json(_point_summary(point)))
        atomic_write_text(point_dir / CORRELATOR_FILE, correlator_csv(point.correlators))
        atomic_write_text(point_dir / STRUCTURE_FILE, structure_csv(point.structure))
        atomic_write_text(point_dir / SPECTRUM_FILE, spectrum_csv(point.spectrum))
        atomic_write_text(point_dir / COMPACTNESS_FILE, _dump_json(_compactness_doc(point.compactness)))


def _compactness_doc(report: CompactnessReport) -> dict:
    return asdict(report)
