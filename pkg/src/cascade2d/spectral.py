"""Fourier-space fields and linear operators on the periodic box [0, L)².

Conventions
-----------
A real field f on the box of side ``L`` is represented by coefficients on the
wavenumber lattice (2π/L)·Z², truncated at |k_i| ≤ πn/L per axis, with

    f(x) = Σ_k f_hat(k) e^{i k·x},      f_hat(k) = (1/L²) ∫ f e^{-i k·x} dx,

so Parseval reads (1/L²)∫|f|²dx = Σ_k |f_hat(k)|².  Coefficients are stored in
the half-plane ``rfft2`` layout of shape (n, n//2 + 1): axis 0 carries the full
(positive and negative) k_x range in FFT order, axis 1 carries k_y ≥ 0, and the
k_y < 0 half-plane is implied by Hermitian symmetry f_hat(-k) = conj f_hat(k).

The unpaired Nyquist line (index -n/2, which has no +n/2 partner on an even
grid) is carried as exactly zero in every field, which keeps the retained
lattice symmetric under k → -k.  All operators below preserve this.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid:
    """Square periodic grid: box side ``box_size`` and ``n`` modes per axis.

    Wavenumber arrays and masks are cached lazily; two grids compare equal
    iff (box_size, n) agree.
    """

    box_size: float
    n: int

    @property
    def spacing(self) -> float:
        """Lattice spacing 2π/L of the wavenumber lattice."""
        return 2.0 * np.pi / self.box_size

    @property
    def k_max(self) -> float:
        """Maximum retained wavenumber magnitude per axis, πn/L."""
        return np.pi * self.n / self.box_size

    @cached_property
    def kx(self) -> np.ndarray:
        """Full-range k_x values in FFT order, shape (n, 1)."""
        idx = np.fft.fftfreq(self.n, d=1.0 / self.n)
        return (self.spacing * idx)[:, None]

    @cached_property
    def ky(self) -> np.ndarray:
        """Nonnegative k_y values of the rfft layout, shape (1, n//2+1)."""
        idx = np.arange(self.n // 2 + 1)
        return (self.spacing * idx)[None, :]

    @cached_property
    def k_sq(self) -> np.ndarray:
        return self.kx**2 + self.ky**2

    @cached_property
    def k_mag(self) -> np.ndarray:
        return np.sqrt(self.k_sq)

    @cached_property
    def inv_k_sq(self) -> np.ndarray:
        """1/|k|² with the zero mode mapped to 0 (used by inversions)."""
        safe = self.k_sq.copy()
        safe[0, 0] = 1.0
        out = 1.0 / safe
        out[0, 0] = 0.0
        return out

    @cached_property
    def parseval_weights(self) -> np.ndarray:
        """Multiplicity of each stored coefficient in full-plane sums.

        Interior k_y columns stand for a conjugate pair (weight 2); the
        k_y = 0 and k_y = Nyquist columns are self-paired (weight 1).
        """
        w = np.full((self.n, self.n // 2 + 1), 2.0)
        w[:, 0] = 1.0
        w[:, -1] = 1.0
        return w

    @cached_property
    def nyquist_mask(self) -> np.ndarray:
        """True on modes kept after zeroing the unpaired Nyquist line."""
        keep = np.ones((self.n, self.n // 2 + 1), dtype=bool)
        keep[self.n // 2, :] = False
        keep[:, -1] = False
        return keep

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Square 2/3-rule mask: keep |index| ≤ (n-1)//3 per axis.

        The band bound K satisfies 3K < n strictly, so quadratic products of
        band-limited fields evaluated on this same grid are alias-free inside
        the band.  For power-of-two n this is the usual n//3; it differs only
        when n is a multiple of 3, where n//3 would leave one marginal mode.
        """
        cut = (self.n - 1) // 3
        ix = np.abs(np.fft.fftfreq(self.n, d=1.0 / self.n))[:, None]
        iy = np.arange(self.n // 2 + 1)[None, :]
        return (ix <= cut) & (iy <= cut)

    def real_coords(self) -> tuple[np.ndarray, np.ndarray]:
        """Collocation point coordinates (x, y), each shape (n, n)."""
        x1 = np.arange(self.n) * (self.box_size / self.n)
        return np.meshgrid(x1, x1, indexing="ij")


def make_grid(box_size: float, n: int) -> Grid:
    """Build the spectral grid for the box of side ``box_size`` with n² modes.

    Raises:
        ValueError: if box_size ≤ 0, n is odd, or n < 8.
    """
    if not box_size > 0:
        raise ValueError(f"box_size must be positive, got {box_size}")
    if n % 2 != 0:
        raise ValueError(f"n must be even, got {n}")
    if n < 8:
        raise ValueError(f"n must be at least 8, got {n}")
    return Grid(float(box_size), int(n))


def _enforce_layout(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
    """Zero the Nyquist line and Hermitian-symmetrize the self-paired columns."""
    c = np.array(coeffs, dtype=np.complex128)
    if c.shape != (grid.n, grid.n // 2 + 1):
        raise ValueError(
            f"coefficient array has shape {c.shape}, expected {(grid.n, grid.n // 2 + 1)}"
        )
    c[~grid.nyquist_mask] = 0.0
    # The ky=0 column stores both +kx and -kx; average out any asymmetry.
    col = c[:, 0]
    c[:, 0] = 0.5 * (col + np.conj(np.roll(col[::-1], 1)))
    return c


@dataclass(frozen=True)
class SpectralScalarField:
    """Real scalar field stored as half-plane Fourier coefficients."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs.flags.writeable = False

    @classmethod
    def from_coeffs(cls, grid: Grid, coeffs: np.ndarray) -> "SpectralScalarField":
        """Construct from raw coefficients, normalizing the stored layout."""
        return cls(grid, _enforce_layout(grid, coeffs))

    @classmethod
    def from_real(cls, grid: Grid, values: np.ndarray) -> "SpectralScalarField":
        """Transform an (n, n) real-space sample array to coefficients.

        Content on the unpaired Nyquist line is discarded (see module
        docstring); everything below it round-trips exactly.
        """
        if values.shape != (grid.n, grid.n):
            raise ValueError(f"expected shape {(grid.n, grid.n)}, got {values.shape}")
        coeffs = np.fft.rfft2(values) / grid.n**2
        return cls(grid, _enforce_layout(grid, coeffs))

    @classmethod
    def zero(cls, grid: Grid) -> "SpectralScalarField":
        return cls(grid, np.zeros((grid.n, grid.n // 2 + 1), dtype=np.complex128))

    def to_real(self) -> np.ndarray:
        """Evaluate the field on the collocation grid, shape (n, n)."""
        return np.fft.irfft2(self.coeffs * self.grid.n**2, s=(self.grid.n, self.grid.n))

    def with_coeffs(self, coeffs: np.ndarray) -> "SpectralScalarField":
        """Same grid, new coefficients (layout taken as already valid)."""
        return SpectralScalarField(self.grid, np.ascontiguousarray(coeffs, dtype=np.complex128))

    @property
    def mean_coeff(self) -> complex:
        return complex(self.coeffs[0, 0])

    def is_hermitian(self, tol: float = 0.0) -> bool:
        """Check the explicit Hermitian constraint on self-paired columns."""
        col = self.coeffs[:, 0]
        err = np.max(np.abs(col - np.conj(np.roll(col[::-1], 1))))
        nyq = np.max(np.abs(self.coeffs[~self.grid.nyquist_mask]), initial=0.0)
        return bool(err <= tol and nyq <= tol)


@dataclass(frozen=True)
class SpectralVectorField:
    """Two scalar components on a shared grid; optionally flagged solenoidal."""

    x: SpectralScalarField
    y: SpectralScalarField
    divergence_free: bool = False

    def __post_init__(self):
        if self.x.grid != self.y.grid:
            raise ValueError("vector components must share one grid")

    @property
    def grid(self) -> Grid:
        return self.x.grid

    @classmethod
    def zero(cls, grid: Grid) -> "SpectralVectorField":
        z = SpectralScalarField.zero(grid)
        return cls(z, z, divergence_free=True)

    def to_real(self) -> tuple[np.ndarray, np.ndarray]:
        return self.x.to_real(), self.y.to_real()

    def max_divergence(self) -> float:
        """max_k |k·u_hat(k)|, zero for solenoidal fields."""
        g = self.grid
        return float(np.max(np.abs(g.kx * self.x.coeffs + g.ky * self.y.coeffs)))


Field = SpectralScalarField | SpectralVectorField

#: Relative threshold below which a mean coefficient counts as zero; grid
#: quadrature of an analytically mean-free field leaves dust at this scale.
MEAN_TOL = 1e-12


def _has_significant_mean(coeffs: np.ndarray) -> bool:
    scale = np.max(np.abs(coeffs))
    if scale == 0.0:
        return False
    return bool(abs(coeffs[0, 0]) > MEAN_TOL * scale)


def _map_components(f: Field, fn) -> Field:
    if isinstance(f, SpectralVectorField):
        return SpectralVectorField(
            _map_components(f.x, fn), _map_components(f.y, fn), f.divergence_free
        )
    return f.with_coeffs(fn(f.grid, f.coeffs))


def biot_savart(omega: SpectralScalarField) -> SpectralVectorField:
    """Invert vorticity to the divergence-free velocity with curl(u) = ω.

    Mode-wise u_hat = (i k_y, -i k_x) ω_hat / |k|², i.e. u = ∇^⊥ Δ^{-1} ω
    with ∇^⊥ = (-∂_y, ∂_x).  Example: ω = cos(x₁) gives u = (0, sin(x₁)).

    Raises:
        ValueError: if ω has a nonzero mean (the inversion is undefined).
    """
    if _has_significant_mean(omega.coeffs):
        raise ValueError("biot_savart requires a mean-zero vorticity field")
    g = omega.grid
    psi = omega.coeffs * g.inv_k_sq  # -streamfunction: psi_hat = omega_hat/|k|²
    ux = omega.with_coeffs(1j * g.ky * psi)
    uy = omega.with_coeffs(-1j * g.kx * psi)
    return SpectralVectorField(ux, uy, divergence_free=True)


def curl(u: SpectralVectorField) -> SpectralScalarField:
    """Scalar curl ∂_x u_y - ∂_y u_x of a planar vector field."""
    g = u.grid
    return u.x.with_coeffs(1j * (g.kx * u.y.coeffs - g.ky * u.x.coeffs))


def gradient(f: SpectralScalarField) -> SpectralVectorField:
    """Spectral gradient (∂_x f, ∂_y f)."""
    g = f.grid
    return SpectralVectorField(
        f.with_coeffs(1j * g.kx * f.coeffs), f.with_coeffs(1j * g.ky * f.coeffs)
    )


def apply_fractional_laplacian(f: Field, s: float) -> Field:
    """Apply (-Δ)^s mode-wise: multiply coefficients by |k|^{2s}.

    The zero mode always maps to zero.  Negative s requires mean-zero input
    since the inverse power is undefined there.

    Raises:
        ValueError: if s < 0 and the field carries a nonzero mean.
    """

    def apply_one(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
        if s < 0 and _has_significant_mean(coeffs):
            raise ValueError("negative fractional power needs a mean-zero field")
        safe = grid.k_sq.copy()
        safe[0, 0] = 1.0
        out = coeffs * safe**s
        out[0, 0] = 0.0
        return out

    return _map_components(f, apply_one)


def lowpass(f: Field, delta: float) -> Field:
    """Zero every coefficient with |k| > delta (idempotent band restriction)."""
    if delta < 0:
        raise ValueError(f"cutoff must be nonnegative, got {delta}")

    def apply_one(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
        return np.where(grid.k_mag <= delta, coeffs, 0.0)

    return _map_components(f, apply_one)


def shift(f: Field, h) -> Field:
    """Translate the field: (shift f)(x) = f(x + h), exact for band-limited f.

    Coefficient-wise phase multiplication by e^{i k·h}; h is an arbitrary real
    2-vector with the periodic wrap implicit.
    """
    h = np.asarray(h, dtype=float)

    def apply_one(grid: Grid, coeffs: np.ndarray) -> np.ndarray:
        return coeffs * np.exp(1j * (grid.kx * h[0] + grid.ky * h[1]))

    return _map_components(f, apply_one)


def norm_lambda(f: Field) -> float:
    """Box-averaged L² norm, ((1/L²)∫|f|²dx)^{1/2}, via Parseval."""
    if isinstance(f, SpectralVectorField):
        return float(np.sqrt(norm_lambda(f.x) ** 2 + norm_lambda(f.y) ** 2))
    w = f.grid.parseval_weights
    return float(np.sqrt(np.sum(w * (f.coeffs.real**2 + f.coeffs.imag**2))))


def inner_lambda(f: Field, g: Field) -> float:
    """Box-averaged L² inner product (1/L²)∫ f·g dx of two real fields."""
    if isinstance(f, SpectralVectorField):
        return inner_lambda(f.x, g.x) + inner_lambda(f.y, g.y)
    if f.grid != g.grid:
        raise ValueError("inner product requires a shared grid")
    w = f.grid.parseval_weights
    return float(np.sum(w * (f.coeffs * np.conj(g.coeffs)).real))
