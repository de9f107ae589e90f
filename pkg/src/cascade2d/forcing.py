"""Band-limited stochastic forcing and its exact accounting.

The noise is a finite family of divergence-free trigonometric fields: every
representative wavevector k in the chosen shell contributes a cosine and a
sine field

    g_cos = A (k_perp/|k|) cos(k·x),      g_sin = A (k_perp/|k|) sin(k·x),

each multiplied by an independent Wiener process.  This realization is smooth
and band-limited by construction and every statistic the analysis needs
(injection rates, spatial correlators, Taylor coefficients) has a closed form
over the mode list.

Energy bookkeeping per representative pair: the cos and sin fields carry
box-averaged energy A²/4 each, so one pair injects epsilon_pair = A²/2 per
unit time and |k|² times that in enstrophy.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .kernels import bessel_j_table
from .spectral import Grid, SpectralScalarField, SpectralVectorField


@dataclass(frozen=True)
class ForcingMode:
    """One representative wavevector (integer lattice coords) and its amplitude."""

    index: tuple[int, int]
    amplitude: float


@dataclass(frozen=True)
class ForcingSpec:
    """Immutable mode family with its derived injection rates."""

    grid: Grid
    modes: tuple[ForcingMode, ...]
    epsilon: float
    eta: float

    @classmethod
    def from_modes(cls, grid: Grid, modes) -> "ForcingSpec":
        modes = tuple(modes)
        for mode in modes:
            if mode.index == (0, 0):
                raise ValueError("forcing modes must have nonzero wavevector")
            if not mode.amplitude > 0:
                raise ValueError("forcing amplitudes must be positive")
        eps, eta = _rates_from_modes(grid, modes)
        return cls(grid, modes, eps, eta)

    @cached_property
    def indices(self) -> np.ndarray:
        """Integer lattice coordinates, shape (N, 2)."""
        if not self.modes:
            return np.zeros((0, 2), dtype=int)
        return np.array([m.index for m in self.modes], dtype=int)

    @cached_property
    def amplitudes(self) -> np.ndarray:
        return np.array([m.amplitude for m in self.modes])

    @cached_property
    def wavevectors(self) -> np.ndarray:
        return self.grid.spacing * self.indices.astype(float)

    @cached_property
    def k_mags(self) -> np.ndarray:
        return np.hypot(self.wavevectors[:, 0], self.wavevectors[:, 1])

    @cached_property
    def unit_perp(self) -> np.ndarray:
        """Unit vectors k_perp/|k| = (-k̂_y, k̂_x), shape (N, 2)."""
        k = self.wavevectors
        out = np.stack([-k[:, 1], k[:, 0]], axis=1)
        return out / self.k_mags[:, None]

    @cached_property
    def pair_energies(self) -> np.ndarray:
        """Energy injection rate of each cos/sin pair, A²/2."""
        return 0.5 * self.amplitudes**2


@dataclass(frozen=True)
class NoiseIncrement:
    """One sampled forcing increment Σ_j g_j ΔW_j over a step of length dt."""

    velocity: SpectralVectorField
    dt: float


@dataclass(frozen=True)
class ForcingCorrelators:
    """Circle averages of the noise covariance on a separation grid.

    velocity_trace is the angle-averaged trace of the velocity-level
    covariance (value epsilon at zero separation), velocity_longitudinal its
    separation-direction component (epsilon/2 at zero), vorticity_trace the
    same for the curl of the noise (eta at zero).
    """

    ell: np.ndarray
    velocity_trace: np.ndarray
    velocity_longitudinal: np.ndarray
    vorticity_trace: np.ndarray


@dataclass(frozen=True)
class RegularityReport:
    """Smoothness and low-frequency accounting for one mode family."""

    third_derivative_sum: float
    deltas: np.ndarray
    low_frequency_content: np.ndarray
    min_mode_magnitude: float
    delta_min: float
    violation: bool


def _rates_from_modes(grid: Grid, modes) -> tuple[float, float]:
    if not modes:
        return 0.0, 0.0
    spacing = grid.spacing
    eps = 0.0
    eta = 0.0
    for mode in modes:
        k_sq = (spacing * mode.index[0]) ** 2 + (spacing * mode.index[1]) ** 2
        pair = 0.5 * mode.amplitude**2
        eps += pair
        eta += pair * k_sq
    return eps, eta


def shell_indices(grid: Grid, k_min: float, k_max: float) -> list[tuple[int, int]]:
    """Representatives (one per ±k pair) with k_min ≤ |k| ≤ k_max.

    The representative convention is j > 0, or j = 0 with i > 0; results are
    sorted lexicographically so mode order is deterministic everywhere.
    """
    spacing = grid.spacing
    top = grid.n // 2 - 1
    slack = 1e-9 * max(k_max, 1.0)
    found = []
    for i in range(-top, top + 1):
        for j in range(0, top + 1):
            if j == 0 and i <= 0:
                continue
            mag = spacing * np.hypot(i, j)
            if k_min - slack <= mag <= k_max + slack:
                found.append((i, j))
    return sorted(found)


def build_shell_forcing(
    grid: Grid, k_min: float, k_max: float, epsilon_target: float
) -> ForcingSpec:
    """Uniform-amplitude forcing over the shell k_min ≤ |k| ≤ k_max.

    The common amplitude is scaled so the total energy injection rate is
    exactly epsilon_target; with the shell given in absolute wavenumbers the
    rates do not depend on the box size (as long as the shell is nonempty on
    the box's lattice).

    Raises:
        ValueError: for a bad shell, an empty shell, or nonpositive target.
    """
    if not 0 < k_min <= k_max:
        raise ValueError(f"need 0 < k_min <= k_max, got [{k_min}, {k_max}]")
    if k_max >= grid.k_max:
        raise ValueError(
            f"shell top {k_max} must sit below the lattice maximum {grid.k_max}"
        )
    if not epsilon_target > 0:
        raise ValueError(f"epsilon_target must be positive, got {epsilon_target}")
    reps = shell_indices(grid, k_min, k_max)
    if not reps:
        raise ValueError(
            f"shell [{k_min}, {k_max}] contains no lattice points of box {grid.box_size}"
        )
    amplitude = float(np.sqrt(2.0 * epsilon_target / len(reps)))
    return ForcingSpec.from_modes(
        grid, (ForcingMode(index, amplitude) for index in reps)
    )


def injection_rates(spec: ForcingSpec) -> tuple[float, float]:
    """(energy, enstrophy) injection rates recomputed from the mode list."""
    return _rates_from_modes(spec.grid, spec.modes)


def scatter_mode_coefficients(
    grid: Grid, indices: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """Place per-mode complex values at their +k lattice sites.

    Takes representative indices in the shell_indices convention.  Modes with
    j > 0 land in the stored half-plane directly; j = 0 modes own both the
    (i, 0) and (-i, 0) slots of the self-conjugate column, so the conjugate is
    written explicitly.
    """
    coeffs = np.zeros((grid.n, grid.n // 2 + 1), dtype=np.complex128)
    if len(indices) == 0:
        return coeffs
    i, j = indices[:, 0], indices[:, 1]
    interior = j > 0
    np.add.at(coeffs, (i[interior] % grid.n, j[interior]), values[interior])
    axis = ~interior
    np.add.at(coeffs, (i[axis] % grid.n, 0), values[axis])
    np.add.at(coeffs, (-i[axis] % grid.n, 0), np.conj(values[axis]))
    return coeffs


def realize_mode_fields(
    spec: ForcingSpec, which: int
) -> tuple[SpectralVectorField, SpectralVectorField]:
    """The (cos, sin) velocity fields of one representative, as spectral fields."""
    mode = spec.modes[which]
    idx = np.array([mode.index])
    perp = spec.unit_perp[which]
    fields = []
    for factor in (0.5 * mode.amplitude, -0.5j * mode.amplitude):
        value = np.array([factor], dtype=np.complex128)
        comps = [
            SpectralScalarField.from_coeffs(
                spec.grid, scatter_mode_coefficients(spec.grid, idx, value * perp[c])
            )
            for c in (0, 1)
        ]
        fields.append(SpectralVectorField(comps[0], comps[1], divergence_free=True))
    return fields[0], fields[1]


def sample_increment(
    spec: ForcingSpec, dt: float, rng: np.random.Generator
) -> NoiseIncrement:
    """Draw Σ_j g_j ΔW_j with independent ΔW_j ~ N(0, dt).

    Consumes exactly one (N, 2) standard-normal block from the caller's
    generator, columns ordered (cos, sin) within each mode, modes in spec
    order; replaying the generator state replays the increment bit for bit.

    Raises:
        ValueError: if dt ≤ 0.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    draws = rng.standard_normal((len(spec.modes), 2))
    weight = (
        0.5 * spec.amplitudes * np.sqrt(dt) * (draws[:, 0] - 1j * draws[:, 1])
    )
    components = []
    for c in (0, 1):
        coeffs = scatter_mode_coefficients(
            spec.grid, spec.indices, weight * spec.unit_perp[:, c]
        )
        components.append(SpectralScalarField.from_coeffs(spec.grid, coeffs))
    field = SpectralVectorField(components[0], components[1], divergence_free=True)
    return NoiseIncrement(field, dt)


def forcing_correlators(spec: ForcingSpec, ell_grid) -> ForcingCorrelators:
    """Closed-form circle-averaged covariances of the noise family.

    Each mode pair contributes its pair energy times a Bessel factor:
    J₀(ℓ|k|) for the velocity trace, the longitudinal (J₀+J₂)/2 combination
    for the separation-direction component, and |k|²J₀(ℓ|k|) for the
    vorticity trace.

    Raises:
        ValueError: if any separation is negative.
    """
    ell = np.asarray(ell_grid, dtype=float)
    if np.any(ell < 0):
        raise ValueError("separations must be nonnegative")
    energies = spec.pair_energies
    z = ell[..., None] * spec.k_mags
    j = bessel_j_table(z)
    return ForcingCorrelators(
        ell=ell,
        velocity_trace=j[0] @ energies,
        velocity_longitudinal=(0.5 * (j[0] + j[2])) @ energies,
        vorticity_trace=j[0] @ (energies * spec.k_mags**2),
    )


def validate_regularity(
    spec: ForcingSpec, deltas=(0.25, 0.5, 1.0, 2.0, 4.0), delta_min: float = 0.0
) -> RegularityReport:
    """Report smoothness and low-frequency content of the mode family.

    third_derivative_sum is Σ_j of the box-averaged squared third gradient,
    |k|⁶ times twice the pair energy per representative.  The low-frequency
    content at cutoff δ sums twice the pair energy of modes with |k| ≤ δ; a
    family is flagged when any mode sits below delta_min.
    """
    deltas = np.asarray(deltas, dtype=float)
    energies = spec.pair_energies
    third = float(np.sum(2.0 * energies * spec.k_mags**6))
    content = np.array(
        [float(np.sum(2.0 * energies[spec.k_mags <= d])) for d in deltas]
    )
    lowest = float(np.min(spec.k_mags)) if len(spec.modes) else np.inf
    return RegularityReport(
        third_derivative_sum=third,
        deltas=deltas,
        low_frequency_content=content,
        min_mode_magnitude=lowest,
        delta_min=float(delta_min),
        violation=bool(lowest < delta_min),
    )
