"""Time integration of the damped, stochastically forced vorticity equation.

The state advances by an exponential splitting: the linear multiplier
μ_k = ν|k|² + α|k|^{-4γ} is applied exactly through its semigroup, the
advection term -u·∇ω enters through the φ₁/φ₂ weights of a two-stage
exponential integrator (predictor plus Heun-type corrector, needed so the
neutral advective rotation of the cutoff modes stays inside the viscous
stability margin), and the stochastic convolution is sampled exactly per
mode.  Exactness of the noise is possible because every forcing field
lives on a single ±k pair, so the Ornstein-Uhlenbeck variance
(1 - e^{-2μ_k dt})/(2μ_k) is a scalar per mode rather than an operator.

Advection is evaluated pseudospectrally under the 2/3 rule with both the
inputs and the product truncated, which makes the quadratic term exactly the
Galerkin truncation on the retained band (no aliasing residue).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .diagnostics import FUNCTIONAL_KEYS, quadratic_functionals
from .forcing import ForcingSpec, build_shell_forcing, scatter_mode_coefficients
from .spectral import (
    Grid,
    SpectralScalarField,
    _has_significant_mean,
    make_grid,
)

#: Courant number above which a step refuses to proceed.
COURANT_LIMIT = 0.5

#: Courant number the adaptive timestep aims for.
COURANT_TARGET = 0.2

#: Fraction of the cutoff-mode damping the ⅛(u·k·dt)⁴ residual growth of
#: the two-stage scheme is allowed to consume (see _estimate_dt).
STABILITY_SAFETY = 0.25

#: Steps between re-estimates of the adaptive timestep.
ADAPT_EVERY = 50


class CourantError(RuntimeError):
    """Advective stability bound violated; carries the measured number."""

    def __init__(self, courant: float):
        super().__init__(
            f"Courant number {courant:.3f} exceeds the {COURANT_LIMIT} stability bound"
        )
        self.courant = courant


@dataclass(frozen=True)
class FlowParams:
    """Viscosity, large-scale damping rate, and hypofriction exponent.

    nu = 0 is admitted so the inviscid conservation checks can run; every
    production configuration requires nu > 0 (enforced by RunConfig).
    """

    nu: float
    alpha: float
    gamma: float

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be nonnegative, got {self.alpha}")
        if self.gamma < 0:
            raise ValueError(f"gamma must be nonnegative, got {self.gamma}")


@dataclass(frozen=True)
class SimState:
    """Vorticity field at one instant, with its clock and parameters."""

    omega: SpectralScalarField
    t: float
    params: FlowParams
    step_count: int = 0

    def __post_init__(self):
        if _has_significant_mean(self.omega.coeffs):
            raise ValueError("simulation state requires a mean-zero vorticity")


@dataclass(frozen=True)
class ShellForcingConfig:
    """Forcing block of a run configuration (absolute-wavenumber shell)."""

    k_min: float
    k_max: float
    epsilon_target: float

    def build(self, grid: Grid) -> ForcingSpec:
        return build_shell_forcing(grid, self.k_min, self.k_max, self.epsilon_target)


@dataclass(frozen=True)
class RunConfig:
    """Everything one stationary-statistics run needs, validated up front."""

    box_size: float
    n: int
    nu: float
    alpha: float
    gamma: float
    forcing: ShellForcingConfig
    dt_max: float = 0.05
    t_burn: float = 50.0
    t_sample: float = 200.0
    sample_interval: float = 0.5
    seed: int = 0
    cfl_failure_limit: int = 5

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"runs require nu > 0, got {self.nu}")
        FlowParams(self.nu, self.alpha, self.gamma)
        if not self.dt_max > 0:
            raise ValueError(f"dt_max must be positive, got {self.dt_max}")
        if self.t_burn < 0 or self.t_sample < 0:
            raise ValueError("t_burn and t_sample must be nonnegative")
        if not self.sample_interval > 0:
            raise ValueError("sample_interval must be positive")
        if self.sample_interval < self.dt_max:
            raise ValueError(
                f"sample_interval {self.sample_interval} is below the timestep "
                f"ceiling {self.dt_max}"
            )
        if self.cfl_failure_limit < 1:
            raise ValueError("cfl_failure_limit must be at least 1")

    @property
    def grid(self) -> Grid:
        return make_grid(self.box_size, self.n)

    @property
    def params(self) -> FlowParams:
        return FlowParams(self.nu, self.alpha, self.gamma)


@dataclass(frozen=True)
class Snapshot:
    """One emitted sample: the real-space vorticity plus its provenance."""

    payload: np.ndarray
    box_size: float
    t: float
    step_count: int
    params: FlowParams
    seed: int


@dataclass(frozen=True)
class StationaryStats:
    """Time averages of the quadratic functionals with batch-mean errors."""

    sample_count: int
    batch_count: int
    means: dict[str, float]
    std_errors: dict[str, float]
    energy_slope: float
    energy_slope_std_error: float


@dataclass(frozen=True)
class RunResult:
    """Stats plus everything needed to continue the trajectory later."""

    stats: StationaryStats
    final: SimState
    rng_state: dict
    dt: float
    next_emit: float
    since_adapt: int
    sample_times: list[float]
    sample_series: dict[str, list[float]]


@dataclass
class ResumePoint:
    """Mid-run restart data, as captured in a checkpoint."""

    state: SimState
    rng_state: dict
    dt: float
    next_emit: float
    since_adapt: int = 0
    sample_times: list[float] = field(default_factory=list)
    sample_series: dict[str, list[float]] = field(default_factory=dict)


@lru_cache(maxsize=8)
def _linear_tables(grid: Grid, params: FlowParams, dt: float):
    """Semigroup decay e^{-μdt} and the φ₁, φ₂ stage weights (times dt).

    φ₁(z) = (e^z - 1)/z weights the predictor's nonlinear term, φ₂(z) =
    (e^z - 1 - z)/z² the corrector difference; both evaluated at z = -μdt
    with series fallbacks where the closed forms lose digits.
    """
    safe = grid.k_sq.copy()
    safe[0, 0] = 1.0
    inv_pow = safe ** (-2.0 * params.gamma)
    inv_pow[0, 0] = 0.0
    mu = params.nu * grid.k_sq + params.alpha * inv_pow
    mu_dt = mu * dt
    decay = np.exp(-mu_dt)
    positive = mu_dt > 0
    phi1_dt = np.full_like(mu_dt, dt)
    phi1_dt[positive] = -np.expm1(-mu_dt[positive]) / mu[positive]
    z = mu_dt[positive]
    small = z < 1e-4
    exact = (z + np.expm1(-z)) / (mu[positive] * z)
    series = dt * (0.5 - z / 6.0 + z**2 / 24.0)
    phi2_dt = np.full_like(mu_dt, 0.5 * dt)
    phi2_dt[positive] = np.where(small, series, exact)
    return mu, decay, phi1_dt, phi2_dt


@lru_cache(maxsize=8)
def _noise_tables(spec: ForcingSpec, params: FlowParams, dt: float) -> np.ndarray:
    """Per-mode amplitude of the exactly integrated stochastic convolution.

    For the vorticity equation each mode pair injects curl coefficients of
    magnitude A|k|/2 on the cos and sin channels; the exact OU step scales
    them by sqrt((1 - e^{-2μdt})/(2μ)).
    """
    k_sq = spec.k_mags**2
    mu = params.nu * k_sq + params.alpha * k_sq ** (-2.0 * params.gamma)
    variance = np.where(
        mu > 0, -np.expm1(-2.0 * mu * dt) / (2.0 * np.where(mu > 0, mu, 1.0)), dt
    )
    return np.sqrt(variance) * 0.5 * spec.amplitudes * spec.k_mags


def step(
    state: SimState,
    dt: float,
    rng: np.random.Generator | None = None,
    forcing: ForcingSpec | None = None,
    *,
    advect: bool = True,
) -> SimState:
    """Advance one timestep; pure given (state, dt, forcing, rng state).

    The deterministic part is a two-stage exponential update: the predictor
    e^{-μdt}ω̂ + dt·φ₁(-μdt)N̂(ω) is corrected by dt·φ₂(-μdt)(N̂(ω*) - N̂(ω)).
    A single-stage exponential Euler step leaves the advective rotation of
    the highest dealiased modes growing by ½(u·k·dt)² per step, which beats
    the νk²dt damping at any useful Courant number once max|u| exceeds
    roughly 2νn/λ; the corrector cuts that growth to ⅛(u·k·dt)⁴, where the
    damping wins with room to spare.  The stochastic convolution keeps its
    exact per-mode Ornstein-Uhlenbeck form and enters once, after both
    stages, so the stability checks run before any randomness is consumed
    and a rejected step can be retried at smaller dt with the generator
    untouched.  ``advect=False`` drops the nonlinear term (test hook for
    semigroup and noise checks).

    Raises:
        CourantError: when max|u|·dt·n/λ exceeds COURANT_LIMIT at either
            stage.
        FloatingPointError: when the velocity field stops being finite.
        ValueError: if dt ≤ 0 or forcing is given without an rng.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    if forcing is not None and rng is None:
        raise ValueError("sampling the forcing requires an rng")
    grid = state.omega.grid
    omega_hat = state.omega.coeffs

    _, decay, phi1_dt, phi2_dt = _linear_tables(grid, state.params, dt)
    if advect:
        stage_one, max_u = _advection(grid, omega_hat)
        _check_stability(grid, max_u, dt)
        new_hat = decay * omega_hat + phi1_dt * stage_one
        stage_two, max_u = _advection(grid, new_hat)
        _check_stability(grid, max_u, dt)
        new_hat += phi2_dt * (stage_two - stage_one)
    else:
        new_hat = decay * omega_hat
    if forcing is not None and forcing.modes:
        draws = rng.standard_normal((len(forcing.modes), 2))
        scale_per_mode = _noise_tables(forcing, state.params, dt)
        weights = scale_per_mode * (1j * draws[:, 0] + draws[:, 1])
        new_hat += scatter_mode_coefficients(grid, forcing.indices, weights)

    return SimState(
        omega=state.omega.with_coeffs(new_hat),
        t=state.t + dt,
        params=state.params,
        step_count=state.step_count + 1,
    )


def _advection(grid: Grid, omega_hat: np.ndarray) -> tuple[np.ndarray, float]:
    """-(u·∇ω)^ on the dealiased band, plus max|u| for stability checks."""
    band = omega_hat * grid.dealias_mask
    psi = band * grid.inv_k_sq
    scale = grid.n**2
    ux = np.fft.irfft2(1j * grid.ky * psi * scale, s=(grid.n, grid.n))
    uy = np.fft.irfft2(-1j * grid.kx * psi * scale, s=(grid.n, grid.n))
    dx = np.fft.irfft2(1j * grid.kx * band * scale, s=(grid.n, grid.n))
    dy = np.fft.irfft2(1j * grid.ky * band * scale, s=(grid.n, grid.n))
    max_u = max(float(np.max(np.abs(ux))), float(np.max(np.abs(uy))))
    product = np.fft.rfft2(ux * dx + uy * dy) / scale
    advection_hat = -product * grid.dealias_mask
    advection_hat[0, 0] = 0.0
    advection_hat[~grid.nyquist_mask] = 0.0
    return advection_hat, max_u


def _check_stability(grid: Grid, max_u: float, dt: float) -> None:
    if not np.isfinite(max_u):
        raise FloatingPointError("velocity field is no longer finite")
    courant = max_u * dt * grid.n / grid.box_size
    if courant > COURANT_LIMIT:
        raise CourantError(courant)


def max_speed(state: SimState) -> float:
    """max|u| of the dealiased velocity, used for timestep estimation."""
    grid = state.omega.grid
    band = state.omega.coeffs * grid.dealias_mask
    psi = band * grid.inv_k_sq
    scale = grid.n**2
    ux = np.fft.irfft2(1j * grid.ky * psi * scale, s=(grid.n, grid.n))
    uy = np.fft.irfft2(-1j * grid.kx * psi * scale, s=(grid.n, grid.n))
    return max(float(np.max(np.abs(ux))), float(np.max(np.abs(uy))))


def _batch_stats(series: list[float]) -> tuple[float, float, int]:
    values = np.asarray(series)
    if values.size == 0:
        return float("nan"), float("nan"), 0
    batches = min(32, values.size)
    means = [float(np.mean(chunk)) for chunk in np.array_split(values, batches)]
    mean = float(np.mean(values))
    if batches < 2:
        return mean, float("nan"), batches
    stderr = float(np.std(means, ddof=1) / np.sqrt(batches))
    return mean, stderr, batches


def _series_slope(times: list[float], values: list[float]) -> tuple[float, float]:
    """Least-squares slope and its naive standard error (diagnostic only)."""
    if len(values) < 3:
        return float("nan"), float("nan")
    t = np.asarray(times)
    y = np.asarray(values)
    design = np.stack([np.ones_like(t), t - t.mean()], axis=1)
    coef, residual_ss, *_ = np.linalg.lstsq(design, y, rcond=None)
    dof = len(y) - 2
    if dof <= 0 or residual_ss.size == 0:
        return float(coef[1]), float("nan")
    sigma_sq = float(residual_ss[0]) / dof
    slope_var = sigma_sq / float(np.sum((t - t.mean()) ** 2))
    return float(coef[1]), float(np.sqrt(slope_var))


def _assemble_stats(
    times: list[float], series: dict[str, list[float]]
) -> StationaryStats:
    means = {}
    errors = {}
    batch_count = 0
    for key in FUNCTIONAL_KEYS:
        mean, stderr, batches = _batch_stats(series.get(key, []))
        means[key] = mean
        errors[key] = stderr
        batch_count = batches
    slope, slope_err = _series_slope(times, series.get("u_sq", []))
    return StationaryStats(
        sample_count=len(times),
        batch_count=batch_count,
        means=means,
        std_errors=errors,
        energy_slope=slope,
        energy_slope_std_error=slope_err,
    )


def run(
    config: RunConfig,
    sample_sink: Callable[[Snapshot], None] | None = None,
    *,
    resume: ResumePoint | None = None,
) -> RunResult:
    """Integrate to t_burn + t_sample, sampling every sample_interval.

    Burn-in runs without sampling; afterwards a snapshot goes to the sink at
    every emission time and the six quadratic functionals are accumulated
    from exactly the payload the sink receives.  The timestep follows
    COURANT_TARGET, re-estimated every ADAPT_EVERY steps and halved on a
    stability rejection; the run aborts after cfl_failure_limit consecutive
    rejections.  Fixed seed means bit-identical snapshots, resumable
    mid-flight through ``resume``.
    """
    grid = config.grid
    params = config.params
    spec = config.forcing.build(grid)

    if resume is not None:
        state = resume.state
        rng = np.random.Generator(np.random.Philox())
        rng.bit_generator.state = resume.rng_state
        dt = resume.dt
        next_emit = resume.next_emit
        since_adapt = resume.since_adapt
        times = list(resume.sample_times)
        series = {
            key: list(resume.sample_series.get(key, [])) for key in FUNCTIONAL_KEYS
        }
    else:
        state = SimState(
            omega=SpectralScalarField.zero(grid), t=0.0, params=params, step_count=0
        )
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(config.seed)))
        dt = _estimate_dt(config, state)
        next_emit = config.t_burn + config.sample_interval
        since_adapt = 0
        times = []
        series = {key: [] for key in FUNCTIONAL_KEYS}

    t_end = config.t_burn + config.t_sample
    tiny = 1e-9 * config.sample_interval
    consecutive_failures = 0

    while state.t < t_end - tiny:
        # Land exactly on the next emission time so the sample cadence is
        # independent of how the adaptive timestep happens to drift.
        dt_step = dt
        if state.t < next_emit < state.t + dt_step:
            dt_step = next_emit - state.t
        try:
            state = step(state, dt_step, rng, spec)
        except CourantError:
            consecutive_failures += 1
            if consecutive_failures >= config.cfl_failure_limit:
                raise RuntimeError(
                    f"aborting: {consecutive_failures} consecutive stability "
                    f"rejections (dt down to {dt:.3e})"
                )
            dt *= 0.5
            continue
        consecutive_failures = 0
        since_adapt += 1

        if since_adapt >= ADAPT_EVERY:
            dt = _estimate_dt(config, state)
            since_adapt = 0

        if state.t >= next_emit - tiny and state.t <= t_end + tiny:
            payload = state.omega.to_real()
            if sample_sink is not None:
                sample_sink(
                    Snapshot(
                        payload=payload,
                        box_size=grid.box_size,
                        t=state.t,
                        step_count=state.step_count,
                        params=params,
                        seed=config.seed,
                    )
                )
            sampled = SpectralScalarField.from_real(grid, payload)
            values = quadratic_functionals(sampled, params.gamma)
            times.append(state.t)
            for key in FUNCTIONAL_KEYS:
                series[key].append(values[key])
            while next_emit <= state.t + tiny:
                next_emit += config.sample_interval

    return RunResult(
        stats=_assemble_stats(times, series),
        final=state,
        rng_state=rng.bit_generator.state,
        dt=dt,
        next_emit=next_emit,
        since_adapt=since_adapt,
        sample_times=times,
        sample_series=series,
    )


def _estimate_dt(config: RunConfig, state: SimState) -> float:
    """Largest dt honoring the Courant target and the cutoff-mode bound.

    The residual growth of the corrector at the dealiasing cutoff k_c is
    ⅛(u·k_c·dt)⁴ per step against damping μ(k_c)·dt, so dt also obeys
    dt³ ≤ 8·s·μ(k_c)/(u·k_c)⁴; that bound only bites when ν is small and
    the flow fast, where the Courant condition alone leaves thin margins.
    """
    speed = max_speed(state)
    if speed <= 0.0:
        return config.dt_max
    dt_courant = COURANT_TARGET * config.box_size / (config.n * speed)
    k_cut = 2.0 * np.pi * ((config.n - 1) // 3) / config.box_size
    mu_cut = config.nu * k_cut**2 + config.alpha * k_cut ** (-4.0 * config.gamma)
    dt_growth = (8.0 * STABILITY_SAFETY * mu_cut) ** (1.0 / 3.0) / (
        speed * k_cut
    ) ** (4.0 / 3.0)
    return min(config.dt_max, dt_courant, dt_growth)
