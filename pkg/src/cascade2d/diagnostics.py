"""Statistical diagnostics computed from vorticity snapshots.

Everything here is a pure function of snapshot batches (or of tables built
from them).  Two routes exist for the isotropic statistics:

* an exact route that reduces circle averages to Bessel-weighted sums over
  the radial spectrum (and, for third-order quantities, over two transfer
  spectra accumulated from dealiased quadratic products);
* a direct route (``structure_functions``) that shifts fields spectrally
  along M explicit directions and averages pointwise products on a 3/2
  zero-padded grid.

The direct route is the reference; the Bessel route is what production runs
use because its cost per snapshot is a handful of transforms regardless of
how many separations are requested.  The two agree to machine precision on
band-limited fields.

The entry point shared with the time stepper is ``quadratic_functionals``,
which both the in-run sampling and the offline snapshot pass call so their
outputs agree bit for bit on identical payloads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_simpson

from .forcing import ForcingSpec, forcing_correlators
from .kernels import bessel_j_table
from .spectral import (
    Grid,
    SpectralScalarField,
    apply_fractional_laplacian,
    biot_savart,
    norm_lambda,
)

#: Order of the scalar time-average keys every stats consumer relies on.
FUNCTIONAL_KEYS = (
    "omega_sq",
    "grad_omega_sq",
    "damped_omega_sq",
    "u_sq",
    "grad_u_sq",
    "damped_u_sq",
)


def quadratic_functionals(omega: SpectralScalarField, gamma: float) -> dict[str, float]:
    """The six box-averaged quadratic functionals of one vorticity field.

    Returns ‖ω‖², ‖∇ω‖², ‖(-Δ)^{-γ}ω‖² and the same three for the induced
    velocity, as a dict keyed by FUNCTIONAL_KEYS.  Gradients are evaluated as
    the half-power of the (positive) Laplacian, which has the same squared
    norm.
    """
    u = biot_savart(omega)
    half = 0.5
    return {
        "omega_sq": norm_lambda(omega) ** 2,
        "grad_omega_sq": norm_lambda(apply_fractional_laplacian(omega, half)) ** 2,
        "damped_omega_sq": norm_lambda(apply_fractional_laplacian(omega, -gamma)) ** 2,
        "u_sq": norm_lambda(u) ** 2,
        "grad_u_sq": norm_lambda(apply_fractional_laplacian(u, half)) ** 2,
        "damped_u_sq": norm_lambda(apply_fractional_laplacian(u, -gamma)) ** 2,
    }


def build_ell_grid(grid: Grid, forcing_k_max: float) -> np.ndarray:
    """Separation grid for correlator and structure-function tables.

    Logarithmic with 24 points per decade from twice the grid spacing up to
    half the box period, plus a linear cluster below the forcing scale
    1/forcing_k_max (twelve points) with a finer sub-cluster below a tenth
    of it (eight points) so small-separation Taylor fits are well posed.
    """
    if forcing_k_max <= 0:
        raise ValueError(f"forcing_k_max must be positive, got {forcing_k_max}")
    lo = 2.0 * grid.box_size / grid.n
    hi = grid.box_size / 2.0
    decades = math.log10(hi / lo)
    count = max(2, int(math.ceil(24.0 * decades)) + 1)
    log_part = np.geomspace(lo, hi, count)
    scale = 1.0 / forcing_k_max
    fine = np.linspace(scale / 80.0, scale / 10.0, 8)
    cluster = np.linspace(scale / 10.0, scale, 13)[1:]
    values = np.concatenate([fine, cluster, log_part])
    values = np.unique(values[(values > 0) & (values <= hi)])
    return values


def _check_ell(grid: Grid, ell: np.ndarray) -> np.ndarray:
    ell = np.atleast_1d(np.asarray(ell, dtype=float))
    if np.any(ell < 0):
        raise ValueError("separations must be nonnegative")
    limit = grid.box_size / 2.0
    if np.any(ell > limit * (1.0 + 1e-12)):
        bad = float(ell.max())
        raise ValueError(
            f"separation {bad:g} exceeds half the period {limit:g}; beyond it "
            "the circle average aliases through the torus"
        )
    return ell


@dataclass(frozen=True)
class RadialBins:
    """Distinct-|k| binning of the rfft2 half-plane.

    ``k_values[0]`` is the zero mode; mean-free fields carry no content
    there, so its bin stays empty without being special-cased.
    """

    k_values: np.ndarray
    index: np.ndarray
    weights: np.ndarray
    unit_kx: np.ndarray
    unit_ky: np.ndarray


@lru_cache(maxsize=8)
def radial_bins(grid: Grid) -> RadialBins:
    # i² + j² is an exact integer, so binning by it is float-fuzz free.
    squares = np.rint(grid.k_sq / grid.spacing**2).astype(np.int64)
    keys, index = np.unique(squares, return_inverse=True)
    index = index.reshape(squares.shape)
    k_values = grid.spacing * np.sqrt(keys.astype(float))
    safe = np.where(grid.k_mag > 0, grid.k_mag, 1.0)
    unit_kx = np.where(grid.k_mag > 0, grid.kx / safe, 0.0)
    unit_ky = np.where(grid.k_mag > 0, grid.ky / safe, 0.0)
    for arr in (k_values, index, unit_kx, unit_ky):
        arr.setflags(write=False)
    return RadialBins(
        k_values=k_values,
        index=index,
        weights=grid.parseval_weights,
        unit_kx=unit_kx,
        unit_ky=unit_ky,
    )


@dataclass(frozen=True)
class CorrelatorTable:
    """Direction-averaged two-point correlators on a separation grid.

    ``vorticity``/``velocity`` are the trace correlators, ``*_damped`` carry
    the extra |k|^{-4γ} spectral weight of the large-scale friction, and
    ``longitudinal`` projects both increments on the separation direction.
    ``*_deriv`` are separation derivatives evaluated analytically.
    """

    ell: np.ndarray
    vorticity: np.ndarray
    vorticity_damped: np.ndarray
    vorticity_deriv: np.ndarray
    velocity: np.ndarray
    velocity_damped: np.ndarray
    velocity_deriv: np.ndarray
    longitudinal: np.ndarray
    longitudinal_damped: np.ndarray
    longitudinal_deriv: np.ndarray
    sample_count: int
    std_errors: dict[str, np.ndarray]


@dataclass(frozen=True)
class StructureFunctionTable:
    """Third-order structure functions on a separation grid.

    ``vorticity`` is the mixed form E⨍⨍|δω|²(δu·n); ``velocity`` replaces
    |δω|² by |δu|²; ``longitudinal`` is E⨍⨍(δu·n)³.
    """

    ell: np.ndarray
    vorticity: np.ndarray
    velocity: np.ndarray
    longitudinal: np.ndarray
    sample_count: int
    std_errors: dict[str, np.ndarray]


def _batch_mean_se(rows: np.ndarray) -> np.ndarray:
    """Batch-mean standard error along axis 0 (nan when under two batches)."""
    count = rows.shape[0]
    batches = min(32, count)
    if batches < 2:
        return np.full(rows.shape[1:], np.nan)
    means = np.stack([chunk.mean(axis=0) for chunk in np.array_split(rows, batches)])
    return np.std(means, axis=0, ddof=1) / np.sqrt(batches)


class DiagnosticAccumulator:
    """Streaming collector of the radial spectra behind every isotropic table.

    Per snapshot it bins four quantities over distinct |k|: the vorticity and
    velocity spectra and the two third-order transfer spectra (the imaginary
    parts of ω̂·conj((ωu)^) and û·conj((uu)^) contracted with the unit
    wavevector).  Tables for any separation grid are then Bessel-weighted
    sums over the bins, so the per-snapshot cost is independent of how many
    separations are eventually requested.

    Snapshots are grouped into batches of ``batch_size`` for standard
    errors; a partial final batch still counts toward the means.
    """

    _KEYS = ("omega_spec", "velocity_spec", "vorticity_transfer", "velocity_transfer")

    def __init__(self, grid: Grid, batch_size: int):
        if batch_size < 1:
            raise ValueError(f"batch_size must be at least 1, got {batch_size}")
        self.grid = grid
        self.batch_size = batch_size
        self.bins = radial_bins(grid)
        self._closed: list[dict[str, np.ndarray]] = []
        self._closed_counts: list[int] = []
        self._current = self._zero_block()
        self._current_count = 0

    def _zero_block(self) -> dict[str, np.ndarray]:
        size = len(self.bins.k_values)
        return {key: np.zeros(size) for key in self._KEYS}

    @property
    def sample_count(self) -> int:
        return sum(self._closed_counts) + self._current_count

    def add(self, omega: SpectralScalarField) -> None:
        """Ingest one snapshot (truncated to the dealiased band)."""
        if omega.grid is not self.grid and omega.grid != self.grid:
            raise ValueError("snapshot grid does not match the accumulator grid")
        grid = self.grid
        bins = self.bins
        n = grid.n
        scale = n**2

        omega_hat = omega.coeffs * grid.dealias_mask
        psi = omega_hat * grid.inv_k_sq
        u_hat_x = 1j * grid.ky * psi
        u_hat_y = -1j * grid.kx * psi

        w = np.fft.irfft2(omega_hat * scale, s=(n, n))
        ux = np.fft.irfft2(u_hat_x * scale, s=(n, n))
        uy = np.fft.irfft2(u_hat_y * scale, s=(n, n))

        p_ox = np.fft.rfft2(w * ux) / scale
        p_oy = np.fft.rfft2(w * uy) / scale
        p_xx = np.fft.rfft2(ux * ux) / scale
        p_xy = np.fft.rfft2(ux * uy) / scale
        p_yy = np.fft.rfft2(uy * uy) / scale

        h_cells = bins.unit_kx * np.imag(omega_hat * np.conj(p_ox))
        h_cells += bins.unit_ky * np.imag(omega_hat * np.conj(p_oy))
        g_cells = bins.unit_kx * (
            np.imag(u_hat_x * np.conj(p_xx)) + np.imag(u_hat_y * np.conj(p_xy))
        )
        g_cells += bins.unit_ky * (
            np.imag(u_hat_x * np.conj(p_xy)) + np.imag(u_hat_y * np.conj(p_yy))
        )

        cells = {
            "omega_spec": np.abs(omega_hat) ** 2,
            "velocity_spec": np.abs(u_hat_x) ** 2 + np.abs(u_hat_y) ** 2,
            "vorticity_transfer": h_cells,
            "velocity_transfer": g_cells,
        }
        size = len(bins.k_values)
        flat_index = bins.index.ravel()
        for key, values in cells.items():
            binned = np.bincount(
                flat_index,
                weights=(bins.weights * values).ravel(),
                minlength=size,
            )
            self._current[key] += binned
        self._current_count += 1
        if self._current_count >= self.batch_size:
            self._close_batch()

    def _close_batch(self) -> None:
        if self._current_count == 0:
            return
        self._closed.append(self._current)
        self._closed_counts.append(self._current_count)
        self._current = self._zero_block()
        self._current_count = 0

    def merge(self, other: DiagnosticAccumulator) -> None:
        """Fold another accumulator's batches into this one (count-weighted).

        Both partial batches are closed first; callers fix the merge order.
        """
        if other.grid != self.grid:
            raise ValueError("cannot merge accumulators over different grids")
        self._close_batch()
        other._close_batch()
        self._closed.extend({k: v.copy() for k, v in b.items()} for b in other._closed)
        self._closed_counts.extend(other._closed_counts)

    def _batches(self) -> tuple[list[dict[str, np.ndarray]], list[int]]:
        blocks = list(self._closed)
        counts = list(self._closed_counts)
        if self._current_count > 0:
            blocks.append(self._current)
            counts.append(self._current_count)
        if not blocks:
            raise ValueError("no snapshots have been accumulated")
        return blocks, counts

    def mean_spectra(self) -> dict[str, np.ndarray]:
        blocks, counts = self._batches()
        total = float(sum(counts))
        return {
            key: sum(block[key] for block in blocks) / total for key in self._KEYS
        }

    def _column_stats(
        self, weight_rows: dict[str, tuple[np.ndarray, str]]
    ) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        """Means and batch-mean SEs of Bessel-weighted bin sums.

        ``weight_rows`` maps column name to (matrix over (ell, bin), source
        spectrum key).
        """
        blocks, counts = self._batches()
        total = float(sum(counts))
        means = {}
        ses = {}
        for name, (matrix, key) in weight_rows.items():
            total_bins = sum(block[key] for block in blocks)
            means[name] = matrix @ (total_bins / total)
            if len(blocks) < 2:
                ses[name] = np.full(matrix.shape[0], np.nan)
            else:
                per_batch = np.stack(
                    [matrix @ (block[key] / c) for block, c in zip(blocks, counts)]
                )
                ses[name] = np.std(per_batch, axis=0, ddof=1) / np.sqrt(len(blocks))
        return means, ses

    def correlator_table(self, ell: np.ndarray, gamma: float) -> CorrelatorTable:
        ell = _check_ell(self.grid, ell)
        k = self.bins.k_values
        j = bessel_j_table(np.outer(ell, k))
        damped = np.zeros_like(k)
        damped[1:] = k[1:] ** (-4.0 * gamma)

        trace = j[0]
        longitudinal = 0.5 * (j[0] + j[2])
        trace_deriv = -j[1] * k
        longitudinal_deriv = -0.25 * (j[1] + j[3]) * k

        means, ses = self._column_stats(
            {
                "vorticity": (trace, "omega_spec"),
                "vorticity_damped": (trace * damped, "omega_spec"),
                "velocity": (trace, "velocity_spec"),
                "velocity_damped": (trace * damped, "velocity_spec"),
                "longitudinal": (longitudinal, "velocity_spec"),
                "longitudinal_damped": (longitudinal * damped, "velocity_spec"),
            }
        )
        deriv_means, _ = self._column_stats(
            {
                "vorticity_deriv": (trace_deriv, "omega_spec"),
                "velocity_deriv": (trace_deriv, "velocity_spec"),
                "longitudinal_deriv": (longitudinal_deriv, "velocity_spec"),
            }
        )
        return CorrelatorTable(
            ell=ell,
            vorticity=means["vorticity"],
            vorticity_damped=means["vorticity_damped"],
            vorticity_deriv=deriv_means["vorticity_deriv"],
            velocity=means["velocity"],
            velocity_damped=means["velocity_damped"],
            velocity_deriv=deriv_means["velocity_deriv"],
            longitudinal=means["longitudinal"],
            longitudinal_damped=means["longitudinal_damped"],
            longitudinal_deriv=deriv_means["longitudinal_deriv"],
            sample_count=self.sample_count,
            std_errors=ses,
        )

    def structure_table(self, ell: np.ndarray) -> StructureFunctionTable:
        """Third-order table via the transfer spectra (exact circle average)."""
        ell = _check_ell(self.grid, ell)
        k = self.bins.k_values
        j = bessel_j_table(np.outer(ell, k))
        means, ses = self._column_stats(
            {
                "vorticity": (-4.0 * j[1], "vorticity_transfer"),
                "velocity": (-4.0 * j[1], "velocity_transfer"),
                "longitudinal": (-3.0 * (j[1] + j[3]), "velocity_transfer"),
            }
        )
        return StructureFunctionTable(
            ell=ell,
            vorticity=means["vorticity"],
            velocity=means["velocity"],
            longitudinal=means["longitudinal"],
            sample_count=self.sample_count,
            std_errors=ses,
        )

    def state_arrays(self) -> dict[str, np.ndarray]:
        """Serializable view (suitable for np.savez) of all closed batches."""
        blocks, counts = self._batches()
        state = {"counts": np.asarray(counts, dtype=np.int64)}
        for key in self._KEYS:
            state[key] = np.stack([block[key] for block in blocks])
        return state

    @classmethod
    def from_state(
        cls, grid: Grid, state: dict[str, np.ndarray], batch_size: int
    ) -> DiagnosticAccumulator:
        acc = cls(grid, batch_size)
        counts = state["counts"]
        for i in range(len(counts)):
            acc._closed.append({key: state[key][i].copy() for key in cls._KEYS})
            acc._closed_counts.append(int(counts[i]))
        return acc


def _shared_grid(snapshots) -> Grid:
    fields = list(snapshots)
    if not fields:
        raise ValueError("need at least one snapshot")
    grid = fields[0].grid
    if any(field.grid != grid for field in fields[1:]):
        raise ValueError("snapshots share one grid; got mixed grids")
    return grid


def spherical_correlators(snapshots, ell, gamma: float) -> CorrelatorTable:
    """Two-point correlator table averaged over the snapshot batch."""
    fields = list(snapshots)
    grid = _shared_grid(fields)
    acc = DiagnosticAccumulator(
        grid, batch_size=max(1, math.ceil(len(fields) / 32))
    )
    for field in fields:
        acc.add(field)
    return acc.correlator_table(np.asarray(ell, dtype=float), gamma)


def _pad_coeffs(grid: Grid, coeffs: np.ndarray, m: int) -> np.ndarray:
    """Zero-pad an rfft2 half-plane from an n-grid to an m-grid (m > n)."""
    n = grid.n
    out = np.zeros((m, m // 2 + 1), dtype=complex)
    half = n // 2
    out[:half, : half] = coeffs[:half, :half]
    out[m - half + 1 :, : half] = coeffs[half + 1 :, :half]
    return out


def structure_functions(
    snapshots,
    ell,
    angle_count: int = 64,
    *,
    direction_offset: float = 0.0,
) -> StructureFunctionTable:
    """Third-order structure functions via explicit direction sampling.

    For each separation and each of ``angle_count`` equispaced directions the
    increment fields come from an exact spectral shift; the cubic pointwise
    products are evaluated on a 3/2 zero-padded grid so their spatial means
    are quadrature exact.  This is the reference route; it matches the
    accumulator's Bessel route to machine precision on band-limited fields
    and stays affordable only on small grids.

    ``direction_offset`` rotates the whole direction set (radians); the
    table is invariant under offset → offset + π because the direction
    average is even under jointly flipping the direction and the shift.
    """
    if angle_count < 16:
        raise ValueError(f"angle_count must be at least 16, got {angle_count}")
    fields = list(snapshots)
    grid = _shared_grid(fields)
    ell = _check_ell(grid, ell)
    n = grid.n
    m = 3 * n // 2
    angles = direction_offset + 2.0 * np.pi * np.arange(angle_count) / angle_count
    directions = np.stack([np.cos(angles), np.sin(angles)], axis=1)

    rows = np.zeros((len(fields), len(ell), 3))
    m_scale = m**2
    for snap_idx, field in enumerate(fields):
        omega_hat = field.coeffs
        psi = omega_hat * grid.inv_k_sq
        u_hat_x = 1j * grid.ky * psi
        u_hat_y = -1j * grid.kx * psi
        for ell_idx, separation in enumerate(ell):
            for nx, ny in directions:
                phase = np.exp(
                    1j * separation * (grid.kx * nx + grid.ky * ny)
                ) - 1.0
                dw = np.fft.irfft2(
                    _pad_coeffs(grid, omega_hat * phase, m) * m_scale, s=(m, m)
                )
                dux = np.fft.irfft2(
                    _pad_coeffs(grid, u_hat_x * phase, m) * m_scale, s=(m, m)
                )
                duy = np.fft.irfft2(
                    _pad_coeffs(grid, u_hat_y * phase, m) * m_scale, s=(m, m)
                )
                du_n = dux * nx + duy * ny
                rows[snap_idx, ell_idx, 0] += np.mean(dw * dw * du_n)
                rows[snap_idx, ell_idx, 1] += np.mean((dux**2 + duy**2) * du_n)
                rows[snap_idx, ell_idx, 2] += np.mean(du_n**3)
    rows /= angle_count

    means = rows.mean(axis=0)
    ses = _batch_mean_se(rows)
    return StructureFunctionTable(
        ell=ell,
        vorticity=means[:, 0],
        velocity=means[:, 1],
        longitudinal=means[:, 2],
        sample_count=len(fields),
        std_errors={
            "vorticity": ses[:, 0],
            "velocity": ses[:, 1],
            "longitudinal": ses[:, 2],
        },
    )


@dataclass(frozen=True)
class KhmResiduals:
    """Signed residuals of the three scale-by-scale flux identities.

    Each law is arranged as lhs - rhs where lhs is the measured third-order
    structure function and rhs combines correlator derivatives, the friction
    integral, and the forcing input.  ``*_normalized`` divides by the
    injection rate times the separation (the natural flux scale).
    """

    ell: np.ndarray
    vorticity_lhs: np.ndarray
    vorticity_rhs: np.ndarray
    vorticity_residual: np.ndarray
    vorticity_normalized: np.ndarray
    velocity_lhs: np.ndarray
    velocity_rhs: np.ndarray
    velocity_residual: np.ndarray
    velocity_normalized: np.ndarray
    longitudinal_lhs: np.ndarray
    longitudinal_rhs: np.ndarray
    longitudinal_residual: np.ndarray
    longitudinal_normalized: np.ndarray


def _cumulative_radial(ell: np.ndarray, values: np.ndarray, power: int) -> np.ndarray:
    """∫₀^ℓ r^p f(r) dr for every table point by composite Simpson.

    Every radial integrand in the flux laws is odd under r → -r (the even
    correlator columns carry odd powers of r, the odd structure function an
    even one), so the integrand is continued through the origin by its
    parity; that anchors the quadrature without inventing data below the
    smallest tabulated separation.
    """
    g = ell**power * values
    x = np.concatenate([-ell[::-1], [0.0], ell])
    y = np.concatenate([-g[::-1], [0.0], g])
    cum = cumulative_simpson(y, x=x, initial=0.0)
    mid = len(ell)
    return cum[mid + 1 :] - cum[mid]


def khm_residuals(
    corr: CorrelatorTable,
    sf: StructureFunctionTable,
    forcing: ForcingSpec,
    nu: float,
    alpha: float,
) -> KhmResiduals:
    """Check the stationary scale-by-scale budgets on measured tables.

    The vorticity law balances E⨍⨍|δω|²(δu·n) against the correlator
    derivative, the friction integral, and the forcing input; the velocity
    and longitudinal laws are the second-order analogues.  Radial integrals
    use composite Simpson on the table's own grid extended to the origin.
    """
    ell = corr.ell
    if not np.array_equal(ell, sf.ell):
        raise ValueError("correlator and structure-function grids must match")
    if np.any(ell <= 0):
        raise ValueError("the flux identities need strictly positive separations")
    if np.any(np.diff(ell) <= 0):
        raise ValueError("separation grid must be strictly increasing")

    af = forcing_correlators(forcing, ell)
    eta = forcing.eta
    epsilon = forcing.epsilon

    rhs_vorticity = (
        -4.0 * nu * corr.vorticity_deriv
        + (4.0 * alpha / ell) * _cumulative_radial(ell, corr.vorticity_damped, 1)
        - (4.0 / ell) * _cumulative_radial(ell, af.vorticity_trace, 1)
    )
    rhs_velocity = (
        -4.0 * nu * corr.velocity_deriv
        + (4.0 * alpha / ell) * _cumulative_radial(ell, corr.velocity_damped, 1)
        - (4.0 / ell) * _cumulative_radial(ell, af.velocity_trace, 1)
    )
    cube = ell**3
    rhs_longitudinal = (
        -4.0 * nu * corr.longitudinal_deriv
        + (2.0 / cube) * _cumulative_radial(ell, sf.velocity, 2)
        + (4.0 * alpha / cube) * _cumulative_radial(ell, corr.longitudinal_damped, 3)
        - (4.0 / cube) * _cumulative_radial(ell, af.velocity_longitudinal, 3)
    )

    res_vorticity = sf.vorticity - rhs_vorticity
    res_velocity = sf.velocity - rhs_velocity
    res_longitudinal = sf.longitudinal - rhs_longitudinal
    with np.errstate(divide="ignore", invalid="ignore"):
        norm_vorticity = res_vorticity / (eta * ell)
        norm_velocity = res_velocity / (epsilon * ell)
        norm_longitudinal = res_longitudinal / (epsilon * ell)
    return KhmResiduals(
        ell=ell,
        vorticity_lhs=sf.vorticity,
        vorticity_rhs=rhs_vorticity,
        vorticity_residual=res_vorticity,
        vorticity_normalized=norm_vorticity,
        velocity_lhs=sf.velocity,
        velocity_rhs=rhs_velocity,
        velocity_residual=res_velocity,
        velocity_normalized=norm_velocity,
        longitudinal_lhs=sf.longitudinal,
        longitudinal_rhs=rhs_longitudinal,
        longitudinal_residual=res_longitudinal,
        longitudinal_normalized=norm_longitudinal,
    )


@dataclass(frozen=True)
class BalanceReport:
    """Stationary energy and enstrophy budgets from time-averaged norms.

    ``rearrangement_gap`` restates the energy residual as the difference
    between the friction-complement ε - αE‖(-Δ)^{-γ}u‖² and the viscous
    term νE‖∇u‖²; it equals -energy_residual by construction, making the
    rearranged form an arithmetic identity on the report.
    """

    energy_injection: float
    energy_viscous: float
    energy_friction: float
    energy_residual: float
    energy_relative: float
    enstrophy_injection: float
    enstrophy_viscous: float
    enstrophy_friction: float
    enstrophy_residual: float
    enstrophy_relative: float
    wad_viscous: float
    wad_friction: float
    rearrangement_gap: float

    @property
    def viscous_enstrophy_rate(self) -> float:
        """νE‖∇ω‖², the viscous share of the enstrophy budget."""
        return self.enstrophy_viscous

    @property
    def friction_energy_rate(self) -> float:
        """αE‖(-Δ)^{-γ}u‖², the friction share of the energy budget."""
        return self.energy_friction


def balance_report(
    means: dict[str, float], forcing: ForcingSpec, nu: float, alpha: float
) -> BalanceReport:
    """Assemble both stationary budgets from FUNCTIONAL_KEYS time averages."""
    energy_viscous = nu * means["grad_u_sq"]
    energy_friction = alpha * means["damped_u_sq"]
    enstrophy_viscous = nu * means["grad_omega_sq"]
    enstrophy_friction = alpha * means["damped_omega_sq"]
    energy_residual = energy_viscous + energy_friction - forcing.epsilon
    enstrophy_residual = enstrophy_viscous + enstrophy_friction - forcing.eta
    return BalanceReport(
        energy_injection=forcing.epsilon,
        energy_viscous=energy_viscous,
        energy_friction=energy_friction,
        energy_residual=energy_residual,
        energy_relative=energy_residual / forcing.epsilon,
        enstrophy_injection=forcing.eta,
        enstrophy_viscous=enstrophy_viscous,
        enstrophy_friction=enstrophy_friction,
        enstrophy_residual=enstrophy_residual,
        enstrophy_relative=enstrophy_residual / forcing.eta,
        wad_viscous=nu * means["omega_sq"],
        wad_friction=alpha * means["damped_omega_sq"],
        rearrangement_gap=-energy_residual,
    )


@dataclass(frozen=True)
class CompactnessReport:
    """Increment and low-pass dissipation metrics behind the compactness
    arguments: how much of each budget lives in small shifts and in low
    frequencies."""

    h_values: np.ndarray
    increment_enstrophy: np.ndarray
    increment_viscous: np.ndarray
    increment_friction: np.ndarray
    increment_negative_order: np.ndarray
    delta_values: np.ndarray
    lowpass_viscous: np.ndarray
    lowpass_friction: np.ndarray
    lowpass_enstrophy: np.ndarray


def _mean_radial_spectra(snapshots) -> tuple[Grid, RadialBins, np.ndarray, np.ndarray]:
    fields = list(snapshots)
    grid = _shared_grid(fields)
    bins = radial_bins(grid)
    size = len(bins.k_values)
    omega_sum = np.zeros(size)
    velocity_sum = np.zeros(size)
    flat = bins.index.ravel()
    for field in fields:
        omega_sq = np.abs(field.coeffs) ** 2
        velocity_sq = omega_sq * grid.inv_k_sq
        omega_sum += np.bincount(
            flat, weights=(bins.weights * omega_sq).ravel(), minlength=size
        )
        velocity_sum += np.bincount(
            flat, weights=(bins.weights * velocity_sq).ravel(), minlength=size
        )
    return grid, bins, omega_sum / len(fields), velocity_sum / len(fields)


def compactness_metrics(
    snapshots,
    nu: float,
    alpha: float,
    gamma: float,
    h_values,
    delta_values,
) -> CompactnessReport:
    """Direction-averaged increment norms and low-pass budget fractions.

    For each |h| the mean-square increment carries the spectral factor
    2 - 2J₀(|h||k|); for each cutoff δ the low-pass metrics sum the
    corresponding dissipation weights over |k| ≤ δ.
    """
    grid, _, omega_spec, velocity_spec = _mean_radial_spectra(snapshots)
    return compactness_from_radial(
        grid, omega_spec, velocity_spec, nu, alpha, gamma, h_values, delta_values
    )


def compactness_from_radial(
    grid: Grid,
    omega_spec: np.ndarray,
    velocity_spec: np.ndarray,
    nu: float,
    alpha: float,
    gamma: float,
    h_values,
    delta_values,
) -> CompactnessReport:
    """Same metrics computed from already-binned radial spectra.

    Streaming consumers (the accumulator, sweep workers) hold mean spectra
    over distinct |k| rather than snapshots; this shares the arithmetic with
    :func:`compactness_metrics` so both routes agree bit for bit.
    """
    bins = radial_bins(grid)
    h_values = np.atleast_1d(np.asarray(h_values, dtype=float))
    delta_values = np.atleast_1d(np.asarray(delta_values, dtype=float))
    if np.any(h_values < 0):
        raise ValueError("shift magnitudes must be nonnegative")
    if np.any(delta_values < 0):
        raise ValueError("cutoffs must be nonnegative")

    k = bins.k_values
    damped = np.zeros_like(k)
    damped[1:] = k[1:] ** (-4.0 * gamma)
    increment = 2.0 - 2.0 * bessel_j_table(np.outer(h_values, k))[0]

    inc_enstrophy = increment @ omega_spec
    inc_viscous = nu * (increment @ (k**2 * omega_spec))
    inc_negative = increment @ (damped * omega_spec)
    inc_friction = alpha * inc_negative

    passband = k[None, :] <= delta_values[:, None]
    low_viscous = nu * (passband @ (k**2 * velocity_spec))
    low_friction = alpha * (passband @ (damped * velocity_spec))
    low_enstrophy = passband @ omega_spec

    return CompactnessReport(
        h_values=h_values,
        increment_enstrophy=inc_enstrophy,
        increment_viscous=inc_viscous,
        increment_friction=inc_friction,
        increment_negative_order=inc_negative,
        delta_values=delta_values,
        lowpass_viscous=low_viscous,
        lowpass_friction=low_friction,
        lowpass_enstrophy=low_enstrophy,
    )


@dataclass(frozen=True)
class EnergySpectrum:
    """Unit-width shell sums of the mean velocity spectrum."""

    wavenumber: np.ndarray
    energy: np.ndarray
    mode_count: np.ndarray
    compensated_five_thirds: np.ndarray
    compensated_cubed: np.ndarray


def energy_spectrum(snapshots) -> EnergySpectrum:
    """Shell-averaged |û|² with |k|^{5/3} and |k|³ compensated columns.

    Shells are unit-width annuli centered on integer |k| (shell s collects
    s - 1/2 ≤ |k| < s + 1/2); the zero mode never contributes because the
    fields are mean-free.
    """
    grid, _, _, velocity_spec = _mean_radial_spectra(snapshots)
    return energy_spectrum_from_radial(grid, velocity_spec)


def energy_spectrum_from_radial(grid: Grid, velocity_spec: np.ndarray) -> EnergySpectrum:
    """Shell spectrum from an already-binned radial velocity spectrum."""
    bins = radial_bins(grid)
    shell = np.rint(bins.k_values).astype(np.int64)
    size = int(shell.max()) + 1 if shell.size else 1

    counts_per_bin = np.bincount(
        bins.index.ravel(), weights=bins.weights.ravel(), minlength=len(bins.k_values)
    )
    counts_per_bin[0] -= 1.0  # the zero mode carries no energy
    energy = np.bincount(shell, weights=velocity_spec, minlength=size)
    mode_count = np.bincount(shell, weights=counts_per_bin, minlength=size)
    wavenumber = np.arange(size, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        five_thirds = energy * wavenumber ** (5.0 / 3.0)
        cubed = energy * wavenumber**3
    five_thirds[0] = 0.0
    cubed[0] = 0.0
    return EnergySpectrum(
        wavenumber=wavenumber,
        energy=energy,
        mode_count=mode_count,
        compensated_five_thirds=five_thirds,
        compensated_cubed=cubed,
    )


@dataclass(frozen=True)
class TaylorFit:
    """Even-polynomial least-squares fit of an ℓ-indexed curve."""

    powers: tuple[int, ...]
    coefficients: np.ndarray
    condition_number: float
    residual_norm: float


def taylor_coefficients(
    ell, values, degree: int = 4, *, condition_limit: float = 1e8
) -> TaylorFit:
    """Fit c₀ + c₂ℓ² + ... + c_d ℓ^d to samples of an even curve.

    The design matrix is scaled to the largest separation before solving, so
    the reported condition number measures the geometry of the sample points
    rather than their units.

    Raises:
        ValueError: when degree is odd, there are fewer points than
            coefficients, or the scaled fit is ill-conditioned.
    """
    ell = np.atleast_1d(np.asarray(ell, dtype=float))
    values = np.atleast_1d(np.asarray(values, dtype=float))
    if degree % 2 != 0 or degree < 0:
        raise ValueError(f"degree must be even and nonnegative, got {degree}")
    powers = tuple(range(0, degree + 1, 2))
    if len(ell) < len(powers):
        raise ValueError(
            f"need at least {len(powers)} samples for degree {degree}, "
            f"got {len(ell)}"
        )
    scale = float(np.max(np.abs(ell)))
    if scale == 0.0:
        raise ValueError("all separations are zero")
    design = np.stack([(ell / scale) ** p for p in powers], axis=1)
    singular = np.linalg.svd(design, compute_uv=False)
    condition = float(singular[0] / singular[-1]) if singular[-1] > 0 else np.inf
    if not condition < condition_limit:
        raise ValueError(
            f"Taylor fit is ill-conditioned (condition number {condition:.3e}); "
            "cluster more points near zero separation"
        )
    coef, residual_ss, *_ = np.linalg.lstsq(design, values, rcond=None)
    coefficients = coef / np.array([scale**p for p in powers])
    residual_norm = float(np.sqrt(residual_ss[0])) if residual_ss.size else 0.0
    return TaylorFit(
        powers=powers,
        coefficients=coefficients,
        condition_number=condition,
        residual_norm=residual_norm,
    )
