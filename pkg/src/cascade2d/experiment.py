"""Parameter sweeps: inertial-range selection, flux plateaus, trend verdicts.

A sweep runs one simulation per (point, seed), pools each point's statistics
across seeds in canonical order, and reduces the pooled tables to the
headline numbers: the compensated flux constants over the selected inertial
ranges, the dissipation-rate substitutes for isolated cascades, and whether
the small-scale and large-scale dissipation metrics trend to zero along the
sweep.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .diagnostics import (
    CompactnessReport,
    CorrelatorTable,
    DiagnosticAccumulator,
    EnergySpectrum,
    FUNCTIONAL_KEYS,
    StructureFunctionTable,
    BalanceReport,
    balance_report,
    build_ell_grid,
    compactness_from_radial,
    energy_spectrum_from_radial,
)
from .forcing import build_shell_forcing
from .integrator import RunConfig, ShellForcingConfig, run
from .spectral import SpectralScalarField, make_grid

SWEEP_MODES = ("dual", "direct_isolated", "inverse_isolated")

DIRECT_LAWS = ("vorticity_flux", "velocity_cubed", "longitudinal_cubed")
INVERSE_LAWS = ("velocity_linear", "longitudinal_linear")


@dataclass(frozen=True)
class ScaleSelection:
    """Inertial-range endpoints picked from the dissipation metrics."""

    ell_nu: float
    ell_alpha: float


def select_scales(
    wad_viscous: float,
    wad_friction: float,
    box_size: float,
    beta: float = 0.1,
) -> ScaleSelection:
    """Dissipative and friction scales from the two damping metrics.

    The small scale is (nu E‖w‖²)^(1/2 - beta) and the large scale is
    (alpha E‖(-Δ)^(-gamma) w‖²)^(-1/2 + beta); the slack exponent keeps both
    strictly inside the ranges they delimit as the metrics tend to zero.
    Results are clipped to (0, 1] and [1, box_size/2] respectively.
    """
    if not 0.0 < beta < 0.5:
        raise ValueError(f"beta must lie in (0, 1/2), got {beta}")
    if wad_viscous <= 0 or wad_friction <= 0:
        raise ValueError(
            "scale selection needs positive dissipation metrics, got "
            f"{wad_viscous} and {wad_friction}"
        )
    ell_nu = min(wad_viscous ** (0.5 - beta), 1.0)
    ell_alpha = min(max(wad_friction ** (-0.5 + beta), 1.0), box_size / 2.0)
    return ScaleSelection(ell_nu=ell_nu, ell_alpha=ell_alpha)


def select_scales_from_balance(
    balance: BalanceReport, box_size: float, beta: float = 0.1
) -> ScaleSelection:
    return select_scales(balance.wad_viscous, balance.wad_friction, box_size, beta)


@dataclass(frozen=True)
class PlateauStats:
    """Compensated flux statistics of one law over one separation window."""

    law: str
    target: float
    defined: bool
    count: int
    mean: float
    minimum: float
    maximum: float
    relative_deviation: float
    band_fraction: float


def compensated_fluxes(sf: StructureFunctionTable) -> dict[str, np.ndarray]:
    """The five flux compensations of a third-order table."""
    ell = sf.ell
    cube = ell**3
    return {
        "vorticity_flux": sf.vorticity / ell,
        "velocity_cubed": sf.velocity / cube,
        "longitudinal_cubed": sf.longitudinal / cube,
        "velocity_linear": sf.velocity / ell,
        "longitudinal_linear": sf.longitudinal / ell,
    }


def direct_targets(enstrophy_rate: float) -> dict[str, float]:
    """Small-scale flux constants for a given enstrophy dissipation rate."""
    return {
        "vorticity_flux": -2.0 * enstrophy_rate,
        "velocity_cubed": enstrophy_rate / 4.0,
        "longitudinal_cubed": enstrophy_rate / 8.0,
    }


def inverse_targets(energy_rate: float) -> dict[str, float]:
    """Large-scale flux constants for a given energy dissipation rate."""
    return {
        "velocity_linear": 2.0 * energy_rate,
        "longitudinal_linear": 1.5 * energy_rate,
    }


def flux_plateau(
    sf: StructureFunctionTable,
    targets: dict[str, float],
    window: tuple[float, float],
    tolerance: float = 0.3,
) -> dict[str, PlateauStats]:
    """Compensated plateau statistics against the target constants.

    An empty window (no table points inside, or lo >= hi) yields stats with
    ``defined=False`` rather than an error: "no inertial range" is a finding.
    """
    lo, hi = window
    mask = (sf.ell >= lo) & (sf.ell <= hi)
    columns = compensated_fluxes(sf)
    out: dict[str, PlateauStats] = {}
    for law, target in targets.items():
        values = columns[law][mask]
        if lo >= hi or values.size == 0:
            out[law] = PlateauStats(
                law=law,
                target=target,
                defined=False,
                count=0,
                mean=math.nan,
                minimum=math.nan,
                maximum=math.nan,
                relative_deviation=math.nan,
                band_fraction=math.nan,
            )
            continue
        mean = float(np.mean(values))
        scale = abs(target)
        if scale > 0:
            deviation = abs(mean - target) / scale
            in_band = np.abs(values - target) <= tolerance * scale
        else:
            deviation = abs(mean)
            in_band = np.abs(values) <= tolerance
        out[law] = PlateauStats(
            law=law,
            target=target,
            defined=True,
            count=int(values.size),
            mean=mean,
            minimum=float(np.min(values)),
            maximum=float(np.max(values)),
            relative_deviation=float(deviation),
            band_fraction=float(np.mean(in_band)),
        )
    return out


def dual_box_size(alpha: float, coefficient: float = 2.0 * np.pi) -> float:
    """Box period growing like alpha^(-1/2), snapped to half-pi steps.

    The snap keeps integer wavevector shells commensurate across the sweep;
    the floor of one full period 2*pi keeps the forcing shell resolvable.
    """
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    raw = coefficient / math.sqrt(alpha)
    snapped = max(2.0 * np.pi, round(raw / (0.5 * np.pi)) * 0.5 * np.pi)
    return float(snapped)


@dataclass(frozen=True)
class SweepPoint:
    """One (nu, alpha, gamma, box, resolution) sweep location."""

    nu: float
    alpha: float
    gamma: float
    box_size: float
    n: int
    seeds: tuple[int, ...] = (0,)

    @property
    def label(self) -> str:
        return f"nu{self.nu:g}_alpha{self.alpha:g}_L{self.box_size:g}_n{self.n}"


@dataclass(frozen=True)
class SweepConfig:
    """A sweep: its mode, points, and the shared run settings."""

    mode: str
    points: tuple[SweepPoint, ...]
    forcing_k_min: float = 4.0
    forcing_k_max: float = 6.0
    epsilon: float = 1.0
    t_burn: float = 50.0
    t_sample: float = 200.0
    sample_interval: float = 0.5
    dt_max: float = 0.05
    beta: float = 0.1
    plateau_tolerance: float = 0.3

    def __post_init__(self):
        problems = []
        if self.mode not in SWEEP_MODES:
            problems.append(f"mode must be one of {SWEEP_MODES}, got {self.mode!r}")
        if not self.points:
            problems.append("sweep needs at least one point")
        if self.mode == "direct_isolated":
            if any(p.gamma <= 0 for p in self.points):
                problems.append("direct_isolated requires gamma > 0 at every point")
            if len({p.alpha for p in self.points}) > 1:
                problems.append("direct_isolated holds alpha fixed across points")
        if self.mode == "inverse_isolated":
            if len({p.nu for p in self.points}) > 1:
                problems.append("inverse_isolated holds nu fixed across points")
        for point in self.points:
            if len(point.seeds) == 0:
                problems.append(f"{point.label}: needs at least one seed")
            if len(set(point.seeds)) != len(point.seeds):
                problems.append(f"{point.label}: duplicate seeds")
            try:
                grid = make_grid(point.box_size, point.n)
                build_shell_forcing(
                    grid, self.forcing_k_min, self.forcing_k_max, self.epsilon
                )
            except ValueError as exc:
                problems.append(f"{point.label}: {exc}")
        if problems:
            raise ValueError("; ".join(problems))

    def run_config(self, point: SweepPoint, seed: int) -> RunConfig:
        return RunConfig(
            box_size=point.box_size,
            n=point.n,
            nu=point.nu,
            alpha=point.alpha,
            gamma=point.gamma,
            forcing=ShellForcingConfig(
                k_min=self.forcing_k_min,
                k_max=self.forcing_k_max,
                epsilon_target=self.epsilon,
            ),
            dt_max=self.dt_max,
            t_burn=self.t_burn,
            t_sample=self.t_sample,
            sample_interval=self.sample_interval,
            seed=seed,
        )


@dataclass(frozen=True)
class PointReport:
    """Everything the sweep reduces one point to."""

    label: str
    nu: float
    alpha: float
    gamma: float
    box_size: float
    n: int
    seeds: tuple[int, ...]
    sample_count: int
    epsilon: float
    eta: float
    means: dict[str, float]
    balance: BalanceReport
    scales: ScaleSelection
    correlators: CorrelatorTable
    structure: StructureFunctionTable
    plateaus: dict[str, PlateauStats]
    compactness: CompactnessReport
    spectrum: EnergySpectrum


@dataclass(frozen=True)
class SweepReport:
    """Per-point reductions plus the cross-point trend verdicts."""

    mode: str
    points: tuple[PointReport, ...]
    failures: tuple[tuple[str, str], ...]
    wad_viscous_trend: tuple[float, ...]
    wad_friction_trend: tuple[float, ...]
    enstrophy_rate_trend: tuple[float, ...]
    energy_rate_trend: tuple[float, ...]
    wad_viscous_decreasing: bool
    wad_friction_decreasing: bool


def _default_jobs() -> int:
    env = os.environ.get("CASCADE_JOBS", "")
    try:
        return max(1, int(env))
    except ValueError:
        return 1


def _point_task(args):
    """One (point, seed) simulation, returning picklable partial sums."""
    config, seed = args
    acc_grid = make_grid(config.box_size, config.n)
    acc = DiagnosticAccumulator(acc_grid, batch_size=_batch_size_for(config))

    def sink(snapshot):
        acc.add(SpectralScalarField.from_real(acc_grid, snapshot.payload))

    result = run(replace(config, seed=seed), sample_sink=sink)
    count = result.stats.sample_count
    return {
        "seed": seed,
        "count": count,
        "sums": {key: result.stats.means[key] * count for key in FUNCTIONAL_KEYS},
        "state": acc.state_arrays(),
    }


def _batch_size_for(config: RunConfig) -> int:
    expected = max(1, int(round(config.t_sample / config.sample_interval)))
    return max(1, math.ceil(expected / 32))


def _reduce_point(
    sweep: SweepConfig, point: SweepPoint, partials: list[dict]
) -> PointReport:
    grid = make_grid(point.box_size, point.n)
    forcing = build_shell_forcing(
        grid, sweep.forcing_k_min, sweep.forcing_k_max, sweep.epsilon
    )
    batch = _batch_size_for(sweep.run_config(point, point.seeds[0]))
    pooled = DiagnosticAccumulator(grid, batch_size=batch)
    total = 0
    sums = {key: 0.0 for key in FUNCTIONAL_KEYS}
    for part in sorted(partials, key=lambda p: p["seed"]):
        pooled.merge(DiagnosticAccumulator.from_state(grid, part["state"], batch))
        total += part["count"]
        for key in FUNCTIONAL_KEYS:
            sums[key] += part["sums"][key]
    means = {key: sums[key] / total for key in FUNCTIONAL_KEYS}

    balance = balance_report(means, forcing, point.nu, point.alpha)
    scales = select_scales_from_balance(balance, point.box_size, sweep.beta)
    ell = build_ell_grid(grid, sweep.forcing_k_max)
    correlators = pooled.correlator_table(ell, point.gamma)
    structure = pooled.structure_table(ell)

    targets: dict[str, float] = {}
    windows: dict[str, tuple[float, float]] = {}
    if sweep.mode in ("dual", "direct_isolated"):
        rate = (
            balance.viscous_enstrophy_rate
            if sweep.mode == "direct_isolated"
            else forcing.eta
        )
        targets.update(direct_targets(rate))
        for law in DIRECT_LAWS:
            windows[law] = (scales.ell_nu, 1.0)
    if sweep.mode in ("dual", "inverse_isolated"):
        rate = (
            balance.friction_energy_rate
            if sweep.mode == "inverse_isolated"
            else forcing.epsilon
        )
        targets.update(inverse_targets(rate))
        for law in INVERSE_LAWS:
            windows[law] = (1.0, scales.ell_alpha)
    plateaus: dict[str, PlateauStats] = {}
    for law, target in targets.items():
        plateaus.update(
            flux_plateau(
                structure, {law: target}, windows[law], sweep.plateau_tolerance
            )
        )

    spectra = pooled.mean_spectra()
    forcing_scale = 1.0 / sweep.forcing_k_max
    h_values = np.array([0.25, 0.5, 1.0, 2.0]) * forcing_scale
    delta_values = np.array(
        [0.5 * sweep.forcing_k_min, sweep.forcing_k_max, grid.k_max / 2.0]
    )
    compactness = compactness_from_radial(
        grid,
        spectra["omega_spec"],
        spectra["velocity_spec"],
        point.nu,
        point.alpha,
        point.gamma,
        h_values,
        delta_values,
    )
    spectrum = energy_spectrum_from_radial(grid, spectra["velocity_spec"])
    return PointReport(
        label=point.label,
        nu=point.nu,
        alpha=point.alpha,
        gamma=point.gamma,
        box_size=point.box_size,
        n=point.n,
        seeds=tuple(sorted(point.seeds)),
        sample_count=total,
        epsilon=forcing.epsilon,
        eta=forcing.eta,
        means=means,
        balance=balance,
        scales=scales,
        correlators=correlators,
        structure=structure,
        plateaus=plateaus,
        compactness=compactness,
        spectrum=spectrum,
    )


def run_sweep(config: SweepConfig, jobs: int | None = None) -> SweepReport:
    """Execute every (point, seed), pool per point, and assemble verdicts.

    Point/seed simulations are independent; with jobs > 1 they run in a
    process pool.  A failing simulation quarantines its point with the
    failure reason and the sweep continues.  Reduction always walks points
    and seeds in canonical (declaration, sorted-seed) order, so reports are
    reproducible for a fixed seed set regardless of worker count.
    """
    jobs = jobs if jobs is not None else _default_jobs()
    tasks = []
    for index, point in enumerate(config.points):
        for seed in sorted(point.seeds):
            tasks.append((index, seed, (config.run_config(point, seed), seed)))

    outcomes: dict[int, list[dict]] = {i: [] for i in range(len(config.points))}
    errors: dict[int, str] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = pool.map(_run_task_guarded, [t[2] for t in tasks])
            for (index, seed, _), outcome in zip(tasks, results):
                _collect(outcomes, errors, index, seed, outcome)
    else:
        for index, seed, payload in tasks:
            _collect(outcomes, errors, index, seed, _run_task_guarded(payload))

    reports: list[PointReport] = []
    failures: list[tuple[str, str]] = []
    for index, point in enumerate(config.points):
        if index in errors:
            failures.append((point.label, errors[index]))
            continue
        reports.append(_reduce_point(config, point, outcomes[index]))

    wad_viscous = tuple(r.balance.wad_viscous for r in reports)
    wad_friction = tuple(r.balance.wad_friction for r in reports)
    return SweepReport(
        mode=config.mode,
        points=tuple(reports),
        failures=tuple(failures),
        wad_viscous_trend=wad_viscous,
        wad_friction_trend=wad_friction,
        enstrophy_rate_trend=tuple(
            r.balance.viscous_enstrophy_rate for r in reports
        ),
        energy_rate_trend=tuple(r.balance.friction_energy_rate for r in reports),
        wad_viscous_decreasing=_strictly_decreasing(wad_viscous),
        wad_friction_decreasing=_strictly_decreasing(wad_friction),
    )


def _run_task_guarded(payload):
    try:
        return _point_task(payload)
    except Exception as exc:  # noqa: BLE001 - quarantine any point failure
        return {"failure": f"{type(exc).__name__}: {exc}", "seed": payload[1]}


def _collect(outcomes, errors, index, seed, outcome):
    if "failure" in outcome:
        existing = errors.get(index)
        note = f"seed {seed}: {outcome['failure']}"
        errors[index] = note if existing is None else f"{existing}; {note}"
    else:
        outcomes[index].append(outcome)


def _strictly_decreasing(values) -> bool:
    return len(values) >= 2 and all(b < a for a, b in zip(values, values[1:]))
