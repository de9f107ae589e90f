"""Spectral toolkit for stochastically forced 2d incompressible flow on a periodic box.

The package is organized as a numpy/scipy library:

- ``spectral``: grids, Fourier-space fields, and the linear operators
  (Biot-Savart inversion, fractional Laplacians, band filters, shifts).
- ``forcing``: divergence-free trigonometric shell forcing with exact
  injection-rate accounting and closed-form correlators.
- ``integrator``: exponential (ETD1) time stepping of the stochastic
  vorticity equation with exact Ornstein-Uhlenbeck noise per mode.
- ``diagnostics``: two-point correlators, third-order structure functions,
  flux-balance reports, and compactness metrics from snapshot streams.
- ``kernels``: self-contained Bessel evaluation, disc kernels, and
  isotropic circle-tensor averages, all verified against quadrature.
- ``experiment``: parameter sweeps, inertial-range scale selection, and
  compensated flux-plateau statistics.
- ``snapshots`` / ``reports`` / ``config`` / ``cli``: binary persistence,
  CSV/JSON emission, config ingestion, and the command-line surface.
"""

__version__ = "0.1.0"

from .spectral import (
    Grid,
    SpectralScalarField,
    SpectralVectorField,
    make_grid,
    biot_savart,
    curl,
    apply_fractional_laplacian,
    lowpass,
    shift,
    norm_lambda,
    inner_lambda,
)

__all__ = [
    "Grid",
    "SpectralScalarField",
    "SpectralVectorField",
    "make_grid",
    "biot_savart",
    "curl",
    "apply_fractional_laplacian",
    "lowpass",
    "shift",
    "norm_lambda",
    "inner_lambda",
    "__version__",
]
