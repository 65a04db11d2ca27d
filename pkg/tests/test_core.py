import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastreact.core import (
    FOUR_PI2,
    ComplexOmegaViolation,
    HyperbolicityViolation,
    LatticeError,
    LatticeSizeError,
    SignViolation,
    SpectralField,
    SystemParams,
    build_lattice,
    derive_constants,
    h0_map,
    h2_norm,
    sample_gaussian,
    validate_params,
)
from strategies import complex_coeffs, valid_params

# Reference values from 30-digit evaluation of the closed forms (mpmath)
# and adaptive quadrature of the Fourier integrals (scipy.integrate.quad).
OMEGA_P1 = 9.43398113205660381
SIGMA_SLOW_P1 = 1.64339811320566038
LAMBDA_SLOW0_P1 = -1.78300943397169809
LAMBDA_FAST0_P1 = -11.2169905660283019
GAUSS_K0 = 1.0
GAUSS_K1 = 0.04321391826377234


def _matrix(p, q):
    return np.array([
        [p.alpha / p.eps - p.mu - FOUR_PI2 * q, p.beta / p.eps],
        [p.gamma, p.delta - p.nu - FOUR_PI2 * q],
    ])


class TestValidation:
    def test_reference_family_accepted(self, p1):
        assert validate_params(p1) is p1

    def test_positive_alpha_is_sign_violation(self, p1):
        with pytest.raises(SignViolation, match="alpha < 0"):
            validate_params(SystemParams(**{**p1.as_dict(), "alpha": 1.0}))

    def test_complex_omega(self):
        # discriminant (0 - 0 + 1)^2 - 4 = -3
        p = SystemParams(alpha=-1, beta=1, gamma=-1, delta=0, mu=0, nu=0, eps=1)
        with pytest.raises(ComplexOmegaViolation, match="discriminant=-3"):
            validate_params(p)

    def test_hyperbolicity(self, p1):
        with pytest.raises(HyperbolicityViolation, match="alpha/eps - mu < 0"):
            validate_params(SystemParams(**{**p1.as_dict(), "mu": -20.0}))

    @pytest.mark.parametrize("name", ["beta", "gamma", "delta"])
    def test_zero_coupling(self, p1, name):
        with pytest.raises(SignViolation, match=name):
            validate_params(SystemParams(**{**p1.as_dict(), name: 0.0}))

    @pytest.mark.parametrize("eps", [0.0, -0.1, float("nan")])
    def test_bad_eps(self, p1, eps):
        with pytest.raises(SignViolation):
            validate_params(p1.with_eps(eps))


class TestDerivedConstants:
    def test_reference_values(self, p1):
        dc = derive_constants(p1)
        assert dc.kappa == pytest.approx(-2.0, abs=1e-15)
        assert dc.omega_eps == pytest.approx(OMEGA_P1, rel=1e-14)
        assert dc.sigma_slow == pytest.approx(SIGMA_SLOW_P1, rel=1e-14)
        assert dc.lambda_slow_at(0.0) == pytest.approx(LAMBDA_SLOW0_P1, rel=1e-14)
        assert dc.lambda_fast_at(0.0) == pytest.approx(LAMBDA_FAST0_P1, rel=1e-14)

    def test_roots_match_dense_eigensolver(self, p1):
        dc = derive_constants(p1)
        for q in (0.0, 1.0, 3.7):
            ev = np.sort(np.linalg.eigvals(_matrix(p1, q)).real)
            assert ev[0] == pytest.approx(dc.lambda_fast_at(q), rel=1e-12)
            assert ev[1] == pytest.approx(dc.lambda_slow_at(q), rel=1e-12)

    @given(valid_params(), st.floats(0.0, 50.0))
    def test_trace_and_product(self, p, q):
        dc = derive_constants(p)
        ls, lf = dc.lambda_slow_at(q), dc.lambda_fast_at(q)
        tr = p.alpha / p.eps - p.mu + p.delta - p.nu - 2 * FOUR_PI2 * q
        assert ls + lf == pytest.approx(tr, rel=1e-12, abs=1e-12 * abs(p.alpha / p.eps))
        assert ls * lf == pytest.approx(dc.det_at(q), rel=1e-11)

    @given(valid_params(), st.floats(0.0, 50.0))
    def test_characteristic_polynomial(self, p, q):
        dc = derive_constants(p)
        tr, det = dc.trace_at(q), dc.det_at(q)
        for lam in (dc.lambda_slow_at(q), dc.lambda_fast_at(q)):
            scale = lam**2 + abs(tr * lam) + abs(det)
            assert abs(lam**2 - tr * lam + det) <= 1e-12 * scale

    @given(valid_params())
    def test_sigma_product(self, p):
        dc = derive_constants(p)
        assert dc.sigma_slow * dc.sigma_fast == pytest.approx(-4 * p.eps * p.beta * p.gamma, rel=1e-12)

    def test_slow_root_tends_to_kappa_linearly(self, p1):
        gaps = [abs(derive_constants(p1.with_eps(e)).lambda_slow_at(0.0) + 2.0) for e in (1e-1, 1e-2, 1e-3)]
        ratios = [gaps[0] / gaps[1], gaps[1] / gaps[2]]
        assert ratios == pytest.approx([10.0, 10.0], rel=0.15)

    @given(valid_params(eps=st.floats(1e-4, 1e-3)))
    def test_slow_branch_is_the_bounded_one(self, p):
        dc = derive_constants(p)
        assert abs(dc.lambda_slow_at(0.0) - dc.kappa) < abs(dc.lambda_fast_at(0.0) - dc.kappa)


class TestLattice:
    def test_one_dimensional(self):
        lat = build_lattice(1, 1.0, 0.5)
        np.testing.assert_allclose(lat.k[:, 0], [-1.0, -0.5, 0.0, 0.5, 1.0])
        assert lat.weight == 0.5
        np.testing.assert_array_equal(lat.weights, 0.5)

    def test_two_dimensional(self):
        lat = build_lattice(2, 0.5, 0.5)
        assert lat.size == 9
        assert lat.weight == 0.25

    def test_spacing_larger_than_cutoff(self):
        with pytest.raises(LatticeError):
            build_lattice(1, 1.0, 3.0)

    def test_budget(self):
        with pytest.raises(LatticeSizeError):
            build_lattice(2, 8.0, 0.01, max_modes=10_000)

    def test_default_size(self, lattice):
        assert lattice.size == 1601

    @pytest.mark.parametrize("n,K,dk", [(1, 2.0, 0.25), (2, 1.0, 0.25), (3, 0.5, 0.25)])
    def test_reflection_maps_k_to_minus_k(self, n, K, dk):
        lat = build_lattice(n, K, dk)
        np.testing.assert_array_equal(lat.k[lat.reflect_index()], -lat.k)


class TestGaussian:
    def test_values_match_quadrature(self):
        lat = build_lattice(1, 1.0, 1.0)
        g = sample_gaussian(lat, math.pi, 1.0)
        k = lat.k[:, 0]
        assert g.coeffs[k == 0][0].real == pytest.approx(GAUSS_K0, rel=1e-12)
        assert g.coeffs[k == 1][0].real == pytest.approx(GAUSS_K1, rel=1e-12)

    def test_zero_amplitude(self, small_lattice):
        assert not np.any(sample_gaussian(small_lattice, 1.0, 0.0).coeffs)

    @pytest.mark.parametrize("a", [0.0, -1.0])
    def test_rate_must_be_positive(self, small_lattice, a):
        with pytest.raises(ValueError):
            sample_gaussian(small_lattice, a)

    def test_hermitian(self, small_lattice):
        assert sample_gaussian(small_lattice, 2.0, 1.3).is_hermitian()


class TestH2Norm:
    def test_zero(self, small_lattice):
        assert h2_norm(SpectralField.zeros(small_lattice)) == 0.0

    def test_single_coefficient(self, small_lattice):
        c = np.zeros(small_lattice.size, dtype=complex)
        i = 3
        c[i] = 2 - 1j
        k2 = small_lattice.k2[i]
        expect = math.sqrt(small_lattice.weight) * (1 + k2) * abs(2 - 1j)
        assert h2_norm(SpectralField(small_lattice, c)) == pytest.approx(expect, rel=1e-15)

    def test_gaussian_lattice_refinement(self, lattice):
        coarse = h2_norm(sample_gaussian(lattice, math.pi))
        fine = h2_norm(sample_gaussian(build_lattice(1, 8.0, 0.001), math.pi))
        assert coarse == pytest.approx(fine, rel=1e-6)

    @given(complex_coeffs(17), complex_coeffs(17), st.floats(-5, 5).filter(lambda s: s == 0 or abs(s) > 1e-100))
    def test_homogeneity_and_triangle(self, a, b, s):
        lat = build_lattice(1, 2.0, 0.25)
        fa, fb = SpectralField(lat, a), SpectralField(lat, b)
        assert h2_norm(fa * s) == pytest.approx(abs(s) * h2_norm(fa), rel=1e-12, abs=1e-300)
        assert h2_norm(fa + fb) <= h2_norm(fa) + h2_norm(fb) * (1 + 1e-12)

    @given(complex_coeffs(17))
    def test_conjugate_reflection(self, a):
        lat = build_lattice(1, 2.0, 0.25)
        f = SpectralField(lat, a)
        assert h2_norm(f.conj_reflect()) == pytest.approx(h2_norm(f), rel=1e-14)


class TestCriticalMap:
    def test_unit_slope(self, small_lattice, p1):
        v = sample_gaussian(small_lattice, 1.0)
        np.testing.assert_allclose(h0_map(v, p1).coeffs, v.coeffs)

    def test_slope_two(self, small_lattice, p1):
        p = SystemParams(**{**p1.as_dict(), "alpha": -2.0, "beta": 4.0})
        v = sample_gaussian(small_lattice, 1.0)
        np.testing.assert_allclose(h0_map(v, p).coeffs, 2 * v.coeffs)

    def test_zero(self, small_lattice, p1):
        assert not np.any(h0_map(SpectralField.zeros(small_lattice), p1).coeffs)

    @given(valid_params(), complex_coeffs(17))
    def test_lies_on_critical_set(self, p, c):
        lat = build_lattice(1, 2.0, 0.25)
        v = SpectralField(lat, c)
        r = p.alpha * h0_map(v, p).coeffs + p.beta * v.coeffs
        assert np.max(np.abs(r)) <= 1e-14 * abs(p.beta) * np.max(np.abs(c))
