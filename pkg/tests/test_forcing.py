"""Forcing construction, injection accounting, sampling, and correlators."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from cascade2d.forcing import (
    ForcingMode,
    ForcingSpec,
    build_shell_forcing,
    forcing_correlators,
    injection_rates,
    realize_mode_fields,
    sample_increment,
    validate_regularity,
)
from cascade2d.spectral import gradient, make_grid, norm_lambda

import oracles


def synthesize_mode_pair(grid, mode):
    """Real-space (g_cos, g_sin) straight from the mode data, package-free."""
    x, y = oracles.collocation_points(grid.box_size, grid.n)
    kx, ky = grid.spacing * mode.index[0], grid.spacing * mode.index[1]
    mag = np.hypot(kx, ky)
    perp = np.array([-ky, kx]) / mag
    phase = kx * x + ky * y
    g_cos = (mode.amplitude * perp[0] * np.cos(phase), mode.amplitude * perp[1] * np.cos(phase))
    g_sin = (mode.amplitude * perp[0] * np.sin(phase), mode.amplitude * perp[1] * np.sin(phase))
    return g_cos, g_sin


def quadrature_rates(spec):
    """(epsilon, eta) by sampling every field and integrating on the grid."""
    eps = 0.0
    eta = 0.0
    for mode in spec.modes:
        kx, ky = spec.grid.spacing * np.asarray(mode.index, dtype=float)
        mag_sq = kx**2 + ky**2
        for g in synthesize_mode_pair(spec.grid, mode):
            energy = 0.5 * np.mean(g[0] ** 2 + g[1] ** 2)
            eps += energy
            eta += mag_sq * energy
    return eps, eta


class TestBuildShellForcing:
    def test_unit_shell_rates(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 1.0, 1.0, 1.0)
        assert spec.epsilon == pytest.approx(1.0, abs=1e-14)
        assert spec.eta == pytest.approx(1.0, abs=1e-14)

    def test_k0_two_shell(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 2.0, 2.0, 1.0)
        assert spec.eta == pytest.approx(4.0, abs=1e-13)

    def test_wide_shell_exact_normalization(self):
        """Recomputing epsilon by real-space quadrature lands on the target."""
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 4.0, 6.0, 0.5)
        eps, eta = quadrature_rates(spec)
        assert eps == pytest.approx(0.5, abs=1e-12)
        assert eta == pytest.approx(spec.eta, rel=1e-12)

    def test_epsilon_independent_of_box(self):
        """Absolute-wavenumber shells inject the same energy on any box."""
        small = build_shell_forcing(make_grid(2 * np.pi, 64), 4.0, 6.0, 0.7)
        big = build_shell_forcing(make_grid(4 * np.pi, 128), 4.0, 6.0, 0.7)
        assert big.epsilon == pytest.approx(small.epsilon, rel=1e-14)
        for spec in (small, big):
            assert 16.0 * spec.epsilon <= spec.eta <= 36.0 * spec.epsilon

    def test_rejects_empty_shell(self):
        with pytest.raises(ValueError, match="no lattice points"):
            build_shell_forcing(make_grid(2 * np.pi, 64), 1.3, 1.4, 1.0)

    def test_rejects_bad_band(self):
        g = make_grid(2 * np.pi, 64)
        with pytest.raises(ValueError, match="k_min"):
            build_shell_forcing(g, 0.0, 2.0, 1.0)
        with pytest.raises(ValueError, match="k_min"):
            build_shell_forcing(g, 3.0, 2.0, 1.0)
        with pytest.raises(ValueError, match="lattice maximum"):
            build_shell_forcing(g, 1.0, 40.0, 1.0)

    def test_rejects_nonpositive_target(self):
        with pytest.raises(ValueError, match="epsilon_target"):
            build_shell_forcing(make_grid(2 * np.pi, 64), 1.0, 2.0, 0.0)

    def test_mode_order_deterministic(self):
        g = make_grid(2 * np.pi, 64)
        a = build_shell_forcing(g, 2.0, 4.0, 1.0)
        b = build_shell_forcing(g, 2.0, 4.0, 1.0)
        assert a.indices.tolist() == b.indices.tolist()

    def test_realized_fields_match_synthesis(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 32), 2.0, 3.0, 1.0)
        g_cos, g_sin = realize_mode_fields(spec, 1)
        ref_cos, ref_sin = synthesize_mode_pair(spec.grid, spec.modes[1])
        assert_allclose(g_cos.to_real()[0], ref_cos[0], atol=1e-13)
        assert_allclose(g_cos.to_real()[1], ref_cos[1], atol=1e-13)
        assert_allclose(g_sin.to_real()[1], ref_sin[1], atol=1e-13)
        assert g_cos.max_divergence() < 1e-13


class TestInjectionRates:
    def test_empty_family(self):
        spec = ForcingSpec.from_modes(make_grid(2 * np.pi, 16), ())
        assert injection_rates(spec) == (0.0, 0.0)

    def test_single_unit_mode(self):
        """One |k|=1 representative at pair energy 1 gives ε = η = 1."""
        spec = ForcingSpec.from_modes(
            make_grid(2 * np.pi, 32), [ForcingMode((1, 0), np.sqrt(2.0))]
        )
        eps, eta = injection_rates(spec)
        assert eps == pytest.approx(1.0, abs=1e-14)
        assert eta == pytest.approx(1.0, abs=1e-14)
        quad_eps, quad_eta = quadrature_rates(spec)
        assert quad_eps == pytest.approx(1.0, abs=1e-13)
        assert quad_eta == pytest.approx(1.0, abs=1e-13)

    def test_rates_add_over_disjoint_modes(self):
        g = make_grid(2 * np.pi, 32)
        one = ForcingSpec.from_modes(g, [ForcingMode((1, 0), 1.0)])
        other = ForcingSpec.from_modes(g, [ForcingMode((0, 3), 2.0)])
        both = ForcingSpec.from_modes(
            g, [ForcingMode((1, 0), 1.0), ForcingMode((0, 3), 2.0)]
        )
        assert both.epsilon == pytest.approx(one.epsilon + other.epsilon)
        assert both.eta == pytest.approx(one.eta + other.eta)

    def test_stored_rates_match_recomputation(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 3.0, 5.0, 2.3)
        eps, eta = injection_rates(spec)
        assert eps == pytest.approx(spec.epsilon, rel=1e-12)
        assert eta == pytest.approx(spec.eta, rel=1e-12)

    def test_rejects_zero_wavevector(self):
        with pytest.raises(ValueError, match="nonzero"):
            ForcingSpec.from_modes(make_grid(2 * np.pi, 16), [ForcingMode((0, 0), 1.0)])

    def test_rejects_nonpositive_amplitude(self):
        with pytest.raises(ValueError, match="positive"):
            ForcingSpec.from_modes(make_grid(2 * np.pi, 16), [ForcingMode((1, 0), 0.0)])


class TestSampleIncrement:
    def test_fixed_seed_replays_bitwise(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 32), 1.0, 2.0, 1.0)
        a = sample_increment(spec, 0.01, np.random.default_rng(7))
        b = sample_increment(spec, 0.01, np.random.default_rng(7))
        assert np.array_equal(a.velocity.x.coeffs, b.velocity.x.coeffs)
        assert np.array_equal(a.velocity.y.coeffs, b.velocity.y.coeffs)

    def test_divergence_free_and_mean_zero(self, rng):
        spec = build_shell_forcing(make_grid(2 * np.pi, 32), 1.0, 2.0, 1.0)
        inc = sample_increment(spec, 0.05, rng)
        assert inc.velocity.max_divergence() == 0.0
        assert inc.velocity.x.mean_coeff == 0.0
        assert inc.velocity.x.is_hermitian(tol=0.0)

    def test_ito_isometry(self):
        """Mean of ‖Σ g_j ΔW_j‖²/dt over many draws approaches 2ε.

        The fields are mutually orthogonal, so the sample variance of the
        squared norm is 4ε²/N_modes and four standard errors bound the
        fixed-seed sample used here.
        """
        spec = build_shell_forcing(make_grid(2 * np.pi, 32), 1.0, 2.0, 1.5)
        rng = np.random.default_rng(99)
        dt, draws = 0.02, 4000
        total = 0.0
        for _ in range(draws):
            inc = sample_increment(spec, dt, rng)
            total += norm_lambda(inc.velocity) ** 2 / dt
        mean = total / draws
        expected = 2.0 * spec.epsilon
        stderr = expected / np.sqrt(len(spec.modes) * draws)
        assert abs(mean - expected) < 4.0 * stderr

    def test_rejects_nonpositive_dt(self, rng):
        spec = build_shell_forcing(make_grid(2 * np.pi, 32), 1.0, 1.0, 1.0)
        with pytest.raises(ValueError, match="dt"):
            sample_increment(spec, 0.0, rng)


class TestForcingCorrelators:
    def test_values_at_zero_separation(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 2.0, 4.0, 1.3)
        table = forcing_correlators(spec, [0.0])
        assert table.velocity_trace[0] == pytest.approx(spec.epsilon, abs=1e-15)
        assert table.vorticity_trace[0] == pytest.approx(spec.eta, abs=1e-14)
        assert table.velocity_longitudinal[0] == pytest.approx(
            spec.epsilon / 2.0, abs=1e-15
        )

    def test_single_unit_mode_is_j0(self):
        """Pair energy 1 at |k| = 1 gives velocity trace J₀(ℓ) exactly."""
        spec = ForcingSpec.from_modes(
            make_grid(2 * np.pi, 32), [ForcingMode((1, 0), np.sqrt(2.0))]
        )
        ell = np.linspace(0.0, 3.0, 13)
        table = forcing_correlators(spec, ell)
        from cascade2d.kernels import bessel_j

        assert_allclose(table.velocity_trace, bessel_j(0, ell), atol=1e-14)

    def test_matches_angular_quadrature(self):
        """Bessel closed forms vs direct circle averages of the mode sums."""
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 3.0, 5.0, 0.8)
        ell = np.array([0.05, 0.3, 1.1, 2.6])
        table = forcing_correlators(spec, ell)

        m = 512
        theta = (np.arange(m) + 0.5) * (2.0 * np.pi / m)
        n_hat = np.stack([np.cos(theta), np.sin(theta)])
        k = spec.wavevectors
        perp = spec.unit_perp
        energies = spec.pair_energies
        for row, ell_val in enumerate(ell):
            phases = np.cos(ell_val * (k @ n_hat))
            trace = np.mean(phases.T @ energies)
            weight = (perp @ n_hat) ** 2
            longitudinal = np.mean((phases * weight).T @ energies)
            assert table.velocity_trace[row] == pytest.approx(trace, abs=1e-12)
            assert table.velocity_longitudinal[row] == pytest.approx(
                longitudinal, abs=1e-12
            )

    def test_quadratic_taylor_coefficient(self):
        """Fitting the trace correlator at small r recovers -η/4 within 1%."""
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 4.0, 6.0, 1.0)
        r = np.linspace(1e-4, 0.2 / 6.0, 60)
        table = forcing_correlators(spec, r)
        design = np.stack([np.ones_like(r), r**2, r**4], axis=1)
        coef, *_ = np.linalg.lstsq(design, table.velocity_trace, rcond=None)
        assert coef[1] == pytest.approx(-spec.eta / 4.0, rel=0.01)

    def test_longitudinal_small_separation_limit(self):
        """(4/ℓ⁶)∫₀^ℓ r³ā_∥ dr - ε/(2ℓ²) approaches -η/24."""
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 4.0, 6.0, 1.0)
        ell = 0.1 / 6.0
        nodes, weights = np.polynomial.legendre.leggauss(64)
        r = 0.5 * ell * (nodes + 1.0)
        w = 0.5 * ell * weights
        table = forcing_correlators(spec, r)
        integral = float(np.sum(w * r**3 * table.velocity_longitudinal))
        value = 4.0 / ell**6 * integral - spec.epsilon / (2.0 * ell**2)
        assert value == pytest.approx(-spec.eta / 24.0, rel=0.02)

    def test_rejects_negative_separation(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 32), 1.0, 1.0, 1.0)
        with pytest.raises(ValueError, match="nonnegative"):
            forcing_correlators(spec, [-0.1])


class TestValidateRegularity:
    def test_band_limited_above_cutoff(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 4.0, 6.0, 1.0)
        report = validate_regularity(spec, deltas=[1.0])
        assert report.low_frequency_content[0] == 0.0
        assert not report.violation

    def test_everything_below_cutoff(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 1.0, 1.0, 1.0)
        report = validate_regularity(spec, deltas=[2.0])
        assert report.low_frequency_content[0] == pytest.approx(2.0 * spec.epsilon)

    def test_third_derivative_sum_closed_form(self):
        spec = ForcingSpec.from_modes(
            make_grid(2 * np.pi, 32), [ForcingMode((2, 0), 1.3)]
        )
        report = validate_regularity(spec)
        assert report.third_derivative_sum == pytest.approx(
            2.0**6 * 2.0 * spec.epsilon, rel=1e-13
        )

    def test_third_derivative_sum_vs_spectral_differentiation(self):
        """Closed form against summing ‖∂_a∂_b∂_c g‖² over all index triples."""
        spec = build_shell_forcing(make_grid(2 * np.pi, 32), 2.0, 3.0, 0.9)
        total = 0.0
        for which in range(len(spec.modes)):
            for field in realize_mode_fields(spec, which):
                for component in (field.x, field.y):
                    first = gradient(component)
                    for da in (first.x, first.y):
                        second = gradient(da)
                        for db in (second.x, second.y):
                            third = gradient(db)
                            total += norm_lambda(third) ** 2
        assert total == pytest.approx(
            validate_regularity(spec).third_derivative_sum, rel=1e-12
        )

    def test_violation_flag(self):
        spec = build_shell_forcing(make_grid(2 * np.pi, 64), 1.0, 1.0, 1.0)
        assert validate_regularity(spec, delta_min=2.0).violation
        assert not validate_regularity(spec, delta_min=0.5).violation
