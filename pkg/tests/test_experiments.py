import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fastreact import experiments as ex
from fastreact.analytic import solve_aux_eps0, solve_aux_tilde
from fastreact.core import FOUR_PI2, ParameterError, SpectralField, derive_constants, h2_norm, validate_params


@pytest.fixture(scope="module")
def base_cfg():
    return ex.ExperimentConfig(base=ex.P1)


@pytest.fixture(scope="module")
def on_critical(base_cfg):
    return ex.convergence_ladder(base_cfg)


class TestFitRate:
    def test_exact_line(self):
        fit = ex.fit_rate([(e, 2 * e) for e in (1e-1, 1e-2, 1e-3, 1e-4)])
        assert fit.slope == pytest.approx(1.0, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.predict(0.5) == pytest.approx(1.0, rel=1e-12)

    def test_quadratic(self):
        fit = ex.fit_rate([(e, 3 * e * e) for e in (1e-1, 3e-2, 1e-2, 1e-3)])
        assert fit.slope == pytest.approx(2.0, abs=1e-12)
        assert math.exp(fit.intercept) == pytest.approx(3.0, rel=1e-10)

    def test_single_point(self):
        with pytest.raises(ex.FitError):
            ex.fit_rate([(0.1, 1.0)])

    def test_zero_value_is_exact(self):
        with pytest.raises(ex.ExactZeroError):
            ex.fit_rate([(e, 0.0) for e in (1e-1, 1e-2, 1e-3, 1e-4)])

    def test_negative_value(self):
        with pytest.raises(ex.FitError):
            ex.fit_rate([(1e-1, 1.0), (1e-2, -1.0), (1e-3, 1.0), (1e-4, 1.0)])

    @given(st.floats(0.5, 3.0), st.floats(1e-3, 1e3))
    def test_recovers_power_law(self, p, c):
        fit = ex.fit_rate([(e, c * e**p) for e in (1e-1, 3e-2, 1e-2, 3e-3)])
        assert fit.slope == pytest.approx(p, rel=1e-9)
        assert 0.0 <= fit.r_squared <= 1.0


class TestConfig:
    def test_short_ladder(self, base_cfg):
        with pytest.raises(ValueError, match="at least 4"):
            replace(base_cfg, eps_ladder=(0.1, 0.01, 0.001)).validate()

    def test_ladder_must_decrease(self, base_cfg):
        with pytest.raises(ValueError, match="decreasing"):
            replace(base_cfg, eps_ladder=(0.1, 0.01, 0.03, 0.001)).validate()

    def test_invalid_params_name_condition(self, base_cfg):
        with pytest.raises(ParameterError, match="alpha < 0"):
            replace(base_cfg, base={**ex.P1, "alpha": 1.0}).validate()

    def test_off_critical_needs_u0(self, base_cfg):
        with pytest.raises(ValueError, match="u0"):
            replace(base_cfg, on_critical=False, u0=None).validate()

    def test_time_grid(self, base_cfg):
        t = base_cfg.times()
        assert t.size == 64 and t[-1] == 2.0 and t[0] > 0
        assert np.all(np.diff(t) > 0)

    def test_doubling_samples_gives_superset(self, base_cfg):
        t = base_cfg.times()
        t2 = replace(base_cfg, samples=128).times()
        np.testing.assert_allclose(t, t2[1::2], rtol=1e-15)

    def test_family_overrides(self, base_cfg):
        fam = base_cfg.family("nu_negative", {"delta": -4.0, "nu": -0.5})
        assert fam.name == "nu_negative"
        p = fam.params_at(0.1)
        assert p.nu < 0
        assert derive_constants(p).kappa == pytest.approx(-2.5)


class TestConvergence:
    def test_errors_decrease_along_ladder(self, on_critical):
        assert np.all(np.diff(on_critical.sup_error) < 0)

    def test_zero_data_is_exact(self, base_cfg):
        zero = ex.GaussianMixture((1.0,), (0.0,))
        res = ex.convergence_ladder(replace(base_cfg, v0=zero))
        assert not np.any(res.error)
        assert res.fit is None

    def test_layer_correction_restores_rate(self, base_cfg):
        res = ex.convergence_ladder(replace(base_cfg, on_critical=False))
        assert res.d0 > 0
        # the initial layer dominates at the earliest sample
        assert res.layer[-1, 0] > 0.5 * res.error[-1, 0]
        assert 0.9 <= res.layer_fit.slope <= 1.1

    def test_lattice_refinement(self, base_cfg, on_critical):
        fine = ex.convergence_ladder(replace(base_cfg, dk=base_cfg.dk / 2))
        np.testing.assert_allclose(fine.sup_error, on_critical.sup_error, rtol=1e-4)

    def test_time_refinement_never_decreases_sup(self, base_cfg, on_critical):
        fine = ex.convergence_ladder(replace(base_cfg, samples=2 * base_cfg.samples))
        assert np.all(fine.sup_error >= on_critical.sup_error)

    def test_rows(self, on_critical):
        rows = on_critical.rows()
        assert len(rows) == 5
        assert rows[0][0] == 0.1 and rows[0][3] == on_critical.fit.slope

    def test_layer_bound_structure(self, base_cfg):
        res = ex.convergence_ladder(replace(base_cfg, on_critical=False))
        for coef in ("unit", "fitted"):
            chk = ex.layer_bound_check(res, coef)
            assert chk.ratios.shape == (5,)
            assert chk.C >= 0
            # calibrated on the coarsest eps, so the first ratio is at most 1
            assert chk.ratios[0] <= 1 + 1e-12
        with pytest.raises(ValueError):
            ex.layer_bound_check(res, "other")


class TestBounds:
    def test_bound_iii_vanishes_on_critical_data(self, base_cfg):
        rep = ex.proposition_bounds(base_cfg)
        assert not np.any(rep.lhs["iii"])
        assert rep.entries["iii"].exact and rep.entries["iii"].passed

    def test_bound_ii_matches_exact_difference(self, base_cfg, lattice):
        p = base_cfg.params_at(0.1)
        state0 = replace(base_cfg, on_critical=False).initial_data(lattice, p)
        times = np.array([0.05, 0.5, 1.5])
        lhs, _ = ex.bound_sides(p, state0, times)
        kappa = derive_constants(p).kappa
        coef = p.eps * abs(p.beta * (p.mu + kappa) / p.alpha) / abs(-p.alpha + p.eps * p.mu + p.eps * kappa)
        for j, t in enumerate(times):
            per_mode = (coef * abs(math.exp(kappa * t) - math.exp((-p.mu + p.alpha / p.eps) * t))
                        * np.exp(-FOUR_PI2 * lattice.k2 * t) * np.abs(state0.v_hat.coeffs))
            expect = h2_norm(SpectralField(lattice, per_mode))
            assert lhs["ii"][j] == pytest.approx(expect, rel=1e-10)
            direct = solve_aux_eps0(p, state0.u_hat, state0.v_hat, t) - solve_aux_tilde(p, state0.u_hat, state0.v_hat, t)
            assert h2_norm(direct) == pytest.approx(expect, rel=1e-10)

    def test_report_rows(self, base_cfg):
        cfg = replace(base_cfg, samples=4)
        rep = ex.proposition_bounds(cfg)
        assert len(rep.rows()) == 3 * 5 * 4
        assert set(rep.entries) == set(ex.BOUNDS)


class TestManifoldConvergence:
    def test_table(self, base_cfg):
        res = ex.manifold_convergence(base_cfg)
        assert len(res.rows()) == 5
        assert res.distance[0] == pytest.approx(0.178300943397169809, rel=1e-13)
        assert np.all(res.residual <= 1e-10)
        assert res.eigvec_ratios[0] == pytest.approx(1.0)


class TestCrossChecks:
    def test_random_params_are_valid(self):
        for p in ex.random_params(np.random.default_rng(3), 30):
            assert validate_params(p) is p
            assert 0.01 <= p.eps <= 0.1
            assert (1 / p.eps) == pytest.approx(round(1 / p.eps), abs=1e-9)

    def test_random_params_reproducible(self):
        a = ex.random_params(np.random.default_rng(7), 5)
        b = ex.random_params(np.random.default_rng(7), 5)
        assert a == b

    def test_oracle_errors_small(self, base_cfg, small_lattice):
        p = base_cfg.params_at(0.1)
        errs = ex.oracle_errors(p, base_cfg.initial_data(small_lattice, p), times=(0.1, 0.2))
        assert [t for t, _ in errs] == [0.1, 0.2]
        assert max(e for _, e in errs) <= 1e-8

    @given(st.integers(0, 10_000))
    def test_eigen_residuals(self, seed):
        rng = np.random.default_rng(seed)
        p = ex.random_params(rng, 1)[0]
        poly, pair = ex.eigen_residuals(p, rng.uniform(0, 64, size=50))
        assert poly.max() <= 1e-12 and pair.max() <= 1e-12
