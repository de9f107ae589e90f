"""Bessel disc kernels and circle-tensor averages against quadrature oracles."""

import itertools
import math

import mpmath
import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy import integrate

from cascade2d.kernels import (
    PSI_NORMALIZATION,
    bessel_j,
    bessel_j_table,
    disc_kernel_phi,
    disc_kernel_psi_contraction,
    isotropic_tensor_average,
    verify_identities,
)

import oracles


def reference_j(p: int, z: float) -> float:
    with mpmath.workdps(30):
        return float(mpmath.besselj(p, mpmath.mpf(z)))


class TestBesselJ:
    def test_values_at_zero(self):
        assert bessel_j(0, 0.0) == 1.0
        assert bessel_j(1, 0.0) == 0.0
        assert bessel_j(2, 0.0) == 0.0
        assert bessel_j(3, 0.0) == 0.0

    @pytest.mark.parametrize("p", [0, 1, 2, 3])
    def test_absolute_accuracy_to_50(self, p):
        """Abs error below 1e-12 on a dense sweep, including the series seam."""
        zs = np.concatenate(
            [
                np.geomspace(1e-3, 7.5, 40),
                np.array([7.999, 8.0, 8.001]),
                np.linspace(8.5, 50.0, 40),
            ]
        )
        values = bessel_j(p, zs)
        refs = np.array([reference_j(p, z) for z in zs])
        assert np.max(np.abs(values - refs)) < 1e-12

    def test_large_argument_accuracy(self):
        """Diagnostics evaluate well past 50; spot check out to 900."""
        for z in [75.0, 200.0, 541.3, 900.0]:
            for p in range(4):
                assert bessel_j(p, z) == pytest.approx(reference_j(p, z), abs=1e-12)

    def test_recurrence(self):
        zs = np.linspace(0.5, 40.0, 500)
        j = bessel_j_table(zs)
        for p in (1, 2):
            keep = zs > p
            lhs = j[p + 1][keep]
            rhs = (2.0 * p / zs[keep]) * j[p][keep] - j[p - 1][keep]
            assert np.max(np.abs(lhs - rhs)) < 1e-10

    def test_radial_integral_identity(self):
        """∫₀^x z J₀(z) dz = x J₁(x) via adaptive quadrature at x = 2.5."""
        x = 2.5
        integral, err = integrate.quad(lambda z: z * bessel_j(0, z), 0.0, x)
        assert err < 1e-11
        assert integral == pytest.approx(x * bessel_j(1, x), abs=1e-10)

    def test_derivative_identity(self):
        """d/dz (J₁(z)/z) = -J₂(z)/z by central differences at z = 1.7."""
        z, h = 1.7, 1e-5
        fd = (bessel_j(1, z + h) / (z + h) - bessel_j(1, z - h) / (z - h)) / (2 * h)
        assert fd == pytest.approx(-bessel_j(2, z) / z, abs=1e-9)

    def test_table_matches_single_order(self):
        zs = np.array([0.3, 4.0, 9.2, 31.0])
        table = bessel_j_table(zs)
        for p in range(4):
            assert_allclose(table[p], bessel_j(p, zs))

    def test_rejects_bad_order(self):
        with pytest.raises(ValueError, match="order"):
            bessel_j(4, 1.0)

    def test_rejects_negative_argument(self):
        with pytest.raises(ValueError, match="nonnegative"):
            bessel_j(0, -0.5)


class TestDiscKernelPhi:
    def test_value_at_zero_frequency(self):
        assert disc_kernel_phi(2.0, 0.0) == 1.0

    def test_matches_disc_quadrature(self):
        """Mean of e^{iξ·y} over |y| ≤ ℓ at ℓ=2, |ξ|=3, by 2d quadrature."""
        ell, xi = 2.0, 3.0
        value, err = integrate.dblquad(
            lambda theta, r: r * math.cos(xi * r * math.cos(theta)),
            0.0,
            ell,
            0.0,
            2.0 * math.pi,
            epsabs=1e-11,
        )
        assert err < 1e-7
        disc_mean = value / (math.pi * ell**2)
        assert disc_kernel_phi(ell, xi) == pytest.approx(disc_mean, abs=1e-8)

    def test_quadrature_lattice(self):
        """Agreement with the quadrature route across a 20x20 (ℓ, |ξ|) lattice.

        Quadrature here is Gauss-Legendre in radius crossed with a uniform
        periodic angle rule; both converge far past 1e-8 on this smooth
        integrand, and 400 adaptive calls would dominate the suite's runtime.
        """
        nodes, weights = np.polynomial.legendre.leggauss(64)
        theta = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)[:, None]
        cos_theta = np.cos(theta)
        for ell in np.linspace(0.2, 5.0, 20):
            r = 0.5 * ell * (nodes[None, :] + 1.0)
            w = 0.5 * ell * weights[None, :]
            for xi in np.linspace(0.0, 6.0, 20):
                radial = np.sum(w * r * np.cos(xi * r * cos_theta), axis=1)
                disc_mean = 2.0 / ell**2 * np.mean(radial)
                assert disc_kernel_phi(ell, xi) == pytest.approx(disc_mean, abs=1e-8)

    def test_continuity_at_series_seam(self):
        below = disc_kernel_phi(1.0, 1e-6 - 1e-12)
        above = disc_kernel_phi(1.0, 1e-6 + 1e-12)
        assert below == pytest.approx(above, abs=1e-14)

    def test_decay_bound(self):
        zs = np.geomspace(0.1, 100.0, 2000)
        phi = disc_kernel_phi(1.0, zs)
        assert np.all(np.abs(phi) <= np.minimum(1.0, 2.0 * zs**-1.5) + 1e-15)

    def test_rejects_nonpositive_radius(self):
        with pytest.raises(ValueError, match="positive"):
            disc_kernel_phi(0.0, 1.0)


class TestDiscKernelPsi:
    def test_matches_disc_quadrature(self):
        """y⊗y/ℓ² weighted disc average contracted with a⊗a, a ⊥ k."""
        ell = 1.5
        k = (2.0, 1.0)
        a = (-1.0, 2.0)

        def integrand(theta, r):
            y1, y2 = r * math.cos(theta), r * math.sin(theta)
            weight = (a[0] * y1 + a[1] * y2) ** 2 / ell**2
            return r * weight * math.cos(k[0] * y1 + k[1] * y2)

        value, err = integrate.dblquad(
            integrand, 0.0, ell, 0.0, 2.0 * math.pi, epsabs=1e-11
        )
        assert err < 1e-7
        disc_mean = value / (math.pi * ell**2)
        assert disc_kernel_psi_contraction(ell, k, a) == pytest.approx(
            disc_mean, abs=1e-8
        )

    def test_small_argument_limit(self):
        """J₂(z)/z² → 1/8, so the normalized kernel tends to |a|²/4."""
        a_sq = 9.0
        value = disc_kernel_psi_contraction(1e-5, (1.0, 0.0), (0.0, 3.0))
        assert value == pytest.approx(a_sq / 8.0 * PSI_NORMALIZATION, rel=1e-8)
        assert value == pytest.approx(a_sq / 4.0, rel=1e-8)

    def test_decay_bound(self):
        zs = np.geomspace(0.1, 100.0, 2000)
        raw = np.array(
            [
                disc_kernel_psi_contraction(z, (1.0, 0.0), (0.0, 1.0))
                / PSI_NORMALIZATION
                for z in zs
            ]
        )
        assert np.all(np.abs(raw) <= np.minimum(1.0, zs**-2.5) + 1e-15)

    def test_rejects_zero_wavevector(self):
        with pytest.raises(ValueError, match="nonzero"):
            disc_kernel_psi_contraction(1.0, (0.0, 0.0), (1.0, 0.0))

    def test_rejects_non_orthogonal_amplitude(self):
        with pytest.raises(ValueError, match="orthogonal"):
            disc_kernel_psi_contraction(1.0, (1.0, 0.0), (0.5, 1.0))


class TestIsotropicTensors:
    def test_order_two_diagonal(self):
        t = isotropic_tensor_average(2)
        assert t.entry(0, 0) == 0.5
        assert t.entry(1, 1) == 0.5
        assert t.entry(0, 1) == 0.0

    def test_odd_orders_vanish(self):
        assert np.all(isotropic_tensor_average(3).values == 0.0)
        assert np.all(isotropic_tensor_average(5).values == 0.0)

    def test_order_six_known_entries(self):
        t = isotropic_tensor_average(6)
        assert t.entry(0, 0, 0, 0, 0, 0) == pytest.approx(15.0 / 48.0)
        assert t.entry(0, 0, 0, 0, 0, 0) == pytest.approx(5.0 / 16.0)
        assert t.entry(0, 0, 0, 0, 1, 1) == pytest.approx(1.0 / 16.0)

    @pytest.mark.parametrize("order", [2, 4, 6])
    def test_matches_circle_quadrature(self, order):
        t = isotropic_tensor_average(order)
        for idx in itertools.product((0, 1), repeat=order):
            expected = oracles.circle_average(
                lambda nx, ny, idx=idx: np.prod(
                    np.stack([nx, ny])[list(idx)], axis=0
                )
            )
            assert t.entry(*idx) == pytest.approx(expected, abs=1e-12)

    @pytest.mark.parametrize("order", [2, 4, 6])
    def test_matches_double_factorial_formula(self, order):
        """⨍ n₁^a n₂^b dn = (a-1)!!(b-1)!!/(a+b)!! for even a, b."""

        def double_factorial(n):
            return math.prod(range(n, 0, -2)) if n > 0 else 1

        t = isotropic_tensor_average(order)
        for a in range(0, order + 1, 2):
            b = order - a
            idx = (0,) * a + (1,) * b
            expected = (
                double_factorial(a - 1)
                * double_factorial(b - 1)
                / double_factorial(a + b)
            )
            assert t.entry(*idx) == pytest.approx(expected, abs=1e-15)

    def test_permutation_symmetry(self):
        t = isotropic_tensor_average(4)
        for idx in itertools.product((0, 1), repeat=4):
            for perm in itertools.permutations(idx):
                assert t.entry(*perm) == t.entry(*idx)

    def test_trace_of_order_four(self):
        """Contracting one index pair uses |n|² = 1, landing on order 2."""
        four = isotropic_tensor_average(4).values
        two = isotropic_tensor_average(2).values
        assert_allclose(np.einsum("ijkk->ij", four), two, atol=1e-15)

    @pytest.mark.parametrize("order", [1, 7, 0])
    def test_rejects_out_of_range_order(self, order):
        with pytest.raises(ValueError, match="2..6"):
            isotropic_tensor_average(order)

    def test_values_frozen(self):
        t = isotropic_tensor_average(2)
        with pytest.raises(ValueError):
            t.values[0, 0] = 1.0


def test_verify_identities_all_pass():
    checks = verify_identities()
    assert len(checks) >= 8
    failures = [c.name for c in checks if not c.passed]
    assert failures == []
