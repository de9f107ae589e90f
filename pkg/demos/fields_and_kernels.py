"""Tour of the spectral field layer and the Bessel/disc kernel toolbox.

Builds a band of Fourier modes on the periodic box, recovers the velocity
from the vorticity, and checks the identities the analysis layer leans on:
Parseval, curl inversion, kernel decay bounds, and the circle-average
tensor moments.  Everything prints; nothing is saved.
"""

import numpy as np
from scipy.special import jv

from cascade2d.kernels import (
    bessel_j,
    disc_kernel_phi,
    isotropic_tensor_average,
    verify_identities,
)
from cascade2d.spectral import SpectralScalarField, biot_savart, curl, make_grid

rng = np.random.default_rng(0)
grid = make_grid(box_size=2.0 * np.pi, n=128)

# A random mean-zero field with an exponentially decaying spectrum.
spectrum = np.exp(-0.25 * grid.k_mag) * (grid.k_mag > 0)
coeffs = spectrum * (rng.standard_normal(spectrum.shape) + 1j * rng.standard_normal(spectrum.shape))
omega = SpectralScalarField.from_coeffs(grid, coeffs)

values = omega.to_real()
mean_sq_real = np.mean(values**2)
mean_sq_spec = np.sum(grid.parseval_weights * np.abs(omega.coeffs) ** 2)
print("Parseval: physical mean square  %.12f" % mean_sq_real)
print("          spectral weighted sum %.12f" % mean_sq_spec)

u = biot_savart(omega)
back = curl(u)
err = np.max(np.abs(back.coeffs - omega.coeffs))
print("curl(biot_savart(omega)) returns omega to %.2e" % err)

div = 1j * grid.kx * u.x.coeffs + 1j * grid.ky * u.y.coeffs
print("velocity divergence (spectral max) %.2e" % np.max(np.abs(div)))

# Bessel table vs scipy across the range the correlator tables use.
z = np.linspace(0.1, 60.0, 500)
worst = max(np.max(np.abs(bessel_j(p, z) - jv(p, z))) for p in range(4))
print("bessel_j vs scipy.special.jv, orders 0..3: max gap %.2e" % worst)

# Disc kernel: mean of a plane wave over a disc, and its decay envelope.
print("\n  ell*|xi|   disc average   envelope 2 z^-3/2")
for z0 in (0.5, 2.0, 8.0, 32.0):
    value = disc_kernel_phi(1.0, z0)
    print("  %7.1f   %12.6f   %12.6f" % (z0, value, 2.0 * z0**-1.5))

# Circle averages of direction monomials: the order-6 diagonal is 5/16.
tensor = isotropic_tensor_average(6)
print("\naverage of n_1^6 over the circle = %.10f (5/16 = %.10f)"
      % (tensor.entry(0, 0, 0, 0, 0, 0), 5.0 / 16.0))

print("\nbuilt-in identity table:")
for check in verify_identities():
    status = "ok " if check.passed else "FAIL"
    print("  [%s] %-48s %.2e <= %.0e" % (status, check.name, check.observed, check.bound))
