import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpshrink.estimators import Observation, PhiSpec, ShrinkageConfig, shrink_batch
from lpshrink.exceptions import DomainError, ValidationError
from lpshrink.norms import INFINITY, lp_norm
from lpshrink.risk import (
    MeanConfig,
    RiskEstimate,
    correction_energy_bound,
    identity_check,
    mc_correction_energy,
    mc_losses,
    mc_risk,
    mc_sure,
    paired_difference,
    psi_phi,
    psi_upper,
    sure,
    sure_batch,
    unknown_risk_margin,
)


def fd_sure(z, config):
    """Generic unbiased risk estimate ``d + ||xi||^2 + 2 div xi`` at unit scale, divergence by central differences."""
    z = np.asarray(z, dtype=float)
    xi = lambda x: shrink_batch(x[None, :], 1.0, config)[0] - x  # noqa: E731
    div = 0.0
    for i in range(z.size):
        h = (1 + abs(z[i])) * 1e-5
        e = np.zeros_like(z)
        e[i] = h
        div += (xi(z + e)[i] - xi(z - e)[i]) / (2 * h)
    return config.d + float(np.sum(xi(z) ** 2)) + 2 * div


def brute_psi(z, config):
    """Unnormalized three-term expression with explicit powers of v."""
    p, a = config.p, config.alpha
    v = lp_norm(z, p)
    az = np.abs(np.asarray(z, dtype=float))
    phi = config.phi_fn(v)
    el = v * config.phi_fn.deriv(v) / phi if phi > 0 else 0.0
    s_pa = np.sum(az ** (p - a))
    return (
        phi * v ** (p + a - 2) * np.sum(az ** (2 - 2 * a)) / s_pa
        - 2 * (1 - a) * v**p * np.sum(az ** (-a)) / s_pa
        - 2 * (a - 2 + el)
    )


class TestPsi:
    def test_james_stein_reduction(self):
        cfg = ShrinkageConfig(5, 2, 0, PhiSpec.constant(3))
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert psi_phi(rng.standard_normal(5), cfg) == pytest.approx(-3.0, rel=1e-13)

    def test_zero_phi(self):
        cfg = ShrinkageConfig(4, 3.0, 0.4, PhiSpec.constant(0))
        z = np.array([0.5, -1.0, 2.0, 0.3])
        s_pa = np.sum(np.abs(z) ** 2.6)
        v = lp_norm(z, 3.0)
        want = -2 * 0.6 * v**3 * np.sum(np.abs(z) ** -0.4) / s_pa - 2 * (0.4 - 2)
        assert psi_phi(z, cfg) == pytest.approx(want, rel=1e-12)

    @pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 3.0, 7.0])
    def test_against_unnormalized_formula(self, p):
        rng = np.random.default_rng(int(p * 10))
        for _ in range(100):
            d = int(rng.integers(3, 9))
            alpha = float(rng.uniform(0, 0.9 * (d - 2) / (d - 1)))
            cfg = ShrinkageConfig(d, p, alpha, PhiSpec.ds(float(rng.uniform(0.2, 3))))
            z = rng.standard_normal(d)
            assert psi_phi(z, cfg) == pytest.approx(brute_psi(z, cfg), rel=1e-9, abs=1e-9)

    def test_sup_norm_is_limit_of_large_p(self):
        cfg_inf = ShrinkageConfig(5, INFINITY, 0.2, PhiSpec.constant(1))
        cfg_big = ShrinkageConfig(5, 400.0, 0.2, PhiSpec.constant(1))
        z = np.array([0.3, -2.0, 1.1, 0.7, -0.2])
        assert psi_phi(z, cfg_big) == pytest.approx(psi_phi(z, cfg_inf), rel=1e-6)

    def test_bound_can_fail_above_the_band(self):
        # the simplex-ratio factor max(1, d^((p+alpha-2)/p)) undershoots for b = 1 - alpha/p < 1;
        # with phi far above the band the first term dominates and psi exceeds Psi
        z = np.array([-0.0908471, 0.03757459, -0.06075097, 0.05318774, 0.06152446,
                      0.1210674, 0.21185393, -0.05374381, -0.09714496])
        cfg = ShrinkageConfig(9, 4.592548482365995, 0.8253057250194886, PhiSpec.constant(11.60093064801479))
        assert cfg.phi_fn.c > ShrinkageConfig(9, cfg.p, cfg.alpha, "auto").phi_fn.c
        assert psi_phi(z, cfg) > psi_upper(lp_norm(z, cfg.p), cfg) + 1.0

    def test_domain_errors(self):
        cfg = ShrinkageConfig(3, 2, 0.3, PhiSpec.constant(1))
        with pytest.raises(DomainError):
            psi_phi([0.0, 0.0, 0.0], cfg)
        with pytest.raises(DomainError):
            psi_phi([1.0, 0.0, 2.0], cfg)
        # alpha = 0 tolerates zero coordinates
        assert math.isfinite(psi_phi([1.0, 0.0, 2.0], ShrinkageConfig(3, 2, 0, PhiSpec.constant(1))))

    def test_psi_below_psi_upper_random(self):
        rng = np.random.default_rng(3)
        for _ in range(3000):
            d = int(rng.integers(3, 12))
            alpha = float(rng.uniform(0, 0.95 * (d - 2) / (d - 1)))
            p = INFINITY if rng.random() < 0.15 else float(10 ** rng.uniform(-0.5, 1))
            band = ShrinkageConfig(d, p, alpha, "auto").phi_fn.c
            spec = PhiSpec.ds(float(10 ** rng.uniform(-2, 2))) if rng.random() < 0.5 else PhiSpec.constant(
                float(rng.uniform(0, band))
            )
            cfg = ShrinkageConfig(d, p, alpha, spec)
            z = rng.standard_normal(d) * 10 ** rng.uniform(-1, 1)
            rhs = psi_upper(lp_norm(z, p), cfg)
            assert psi_phi(z, cfg) <= rhs + 1e-9 * max(1, abs(rhs))


class TestPsiUpper:
    def test_band_boundary(self):
        assert psi_upper(1.7, ShrinkageConfig(5, 2, 0, PhiSpec.constant(6))) == 0.0

    def test_hand_value(self):
        assert psi_upper(0.3, ShrinkageConfig(5, 2, 0, PhiSpec.constant(3))) == -3.0

    def test_sup_norm_factor_is_d(self):
        cfg = ShrinkageConfig(5, INFINITY, 0.1, PhiSpec.constant(1))
        k = 5 - 2 - 0.1 * 4
        assert psi_upper(2.0, cfg) == pytest.approx(5 * 1 - 2 * k, rel=1e-14)

    def test_ds_is_identically_zero(self):
        rng = np.random.default_rng(5)
        v = np.geomspace(1e-3, 1e3, 1000)
        for _ in range(10):
            d = int(rng.integers(3, 15))
            alpha = float(rng.uniform(0, 0.95 * (d - 2) / (d - 1)))
            p = INFINITY if rng.random() < 0.2 else float(10 ** rng.uniform(-0.5, 1))
            cfg = ShrinkageConfig(d, p, alpha, PhiSpec.ds(float(10 ** rng.uniform(-2, 2))))
            assert np.max(np.abs(psi_upper(v, cfg))) <= 1e-12

    def test_rejects_nonpositive(self):
        with pytest.raises(ValidationError):
            psi_upper(0.0, ShrinkageConfig(5, 2, 0, PhiSpec.constant(1)))


class TestUnknownMargin:
    def test_constant_equals_psi_upper(self):
        cfg = ShrinkageConfig(5, 1.5, 0.2, PhiSpec.constant(2))
        u = np.geomspace(0.01, 100, 30)
        np.testing.assert_array_equal(unknown_risk_margin(u, cfg, 6), psi_upper(u, cfg))

    def test_boundary_constant(self):
        assert unknown_risk_margin(2.5, ShrinkageConfig(5, 2, 0, PhiSpec.constant(6)), 6) == 0.0

    def test_ds_unknown_nonpositive(self):
        cfg = ShrinkageConfig(5, 2, 0, PhiSpec.ds_unknown(1, 6), scale_mode="unknown")
        assert np.all(unknown_risk_margin(np.geomspace(1e-3, 1e3, 2000), cfg, 6) <= 1e-12)

    def test_bad_n(self):
        with pytest.raises(ValidationError):
            unknown_risk_margin(1.0, ShrinkageConfig(5, 2, 0, PhiSpec.constant(1)), 0)


class TestSure:
    def test_james_stein_value(self):
        cfg = ShrinkageConfig(5, 2, 0, PhiSpec.constant(3))
        rep = sure(Observation.known([2.0, 2.0, 1.0, 0.0, 0.0], 1.0), cfg)
        assert rep.value == pytest.approx(4.0, rel=1e-14)
        assert rep.psi == pytest.approx(-3.0, rel=1e-14)
        assert rep.psi_upper == -3.0

    def test_no_shrinkage(self):
        rep = sure(Observation.known([0.3, 1.0, -2.0], 1.0), ShrinkageConfig(3, 1.0, 0.2, PhiSpec.constant(0)))
        assert rep.value == 3.0

    def test_weights_sum(self):
        rng = np.random.default_rng(1)
        cfg = ShrinkageConfig(6, 3.0, 0.25, PhiSpec.constant(1))
        z = rng.standard_normal(6)
        rep = sure(Observation.known(z, 1.0), cfg)
        s = np.abs(z) ** 3 / np.sum(np.abs(z) ** 3)
        assert sum(rep.per_coordinate_weights) == pytest.approx(np.sum(s ** (2.75 / 3)), rel=1e-12)

    @pytest.mark.parametrize("p", [0.7, 1.0, 2.0, 4.0, INFINITY])
    def test_against_finite_difference_oracle(self, p):
        rng = np.random.default_rng(7)
        for _ in range(60):
            d = int(rng.integers(3, 8))
            alpha = float(rng.uniform(0, 0.9 * (d - 2) / (d - 1)))
            spec = PhiSpec.ds(float(rng.uniform(0.3, 3))) if rng.random() < 0.5 else PhiSpec.constant(
                float(rng.uniform(0, 3))
            )
            cfg = ShrinkageConfig(d, p, alpha, spec)
            z = rng.standard_normal(d) * 2
            if p is INFINITY:
                # keep the maximizing coordinate unique and well separated
                z[np.argmax(np.abs(z))] *= 1.5
            assert sure(Observation.known(z, 1.0), cfg).value == pytest.approx(fd_sure(z, cfg), rel=1e-5, abs=1e-5)

    def test_sigma_scaling(self):
        cfg = ShrinkageConfig(4, 1.5, 0.3, PhiSpec.ds(1))
        z = np.array([0.5, -1.0, 2.0, 0.3])
        assert sure(Observation.known(3 * z, 9.0), cfg).value == pytest.approx(
            sure(Observation.known(z, 1.0), cfg).value, rel=1e-12
        )

    def test_batch_matches_single(self):
        rng = np.random.default_rng(2)
        cfg = ShrinkageConfig(5, 2.5, 0.1, PhiSpec.ds(0.5))
        z = rng.standard_normal((40, 5))
        batch = sure_batch(z, 2.0, cfg)
        for row, val in zip(z, batch):
            assert sure(Observation.known(row, 2.0), cfg).value == pytest.approx(val, rel=1e-14)

    def test_restrictions(self):
        with pytest.raises(ValidationError):
            sure(Observation.known([1.0, 2.0, 3.0], 1.0), ShrinkageConfig(3, 2, 0, "constant:1", positive_part=True))
        with pytest.raises(ValidationError):
            sure(Observation.unknown([1.0, 2.0, 3.0], 1.0, 5),
                 ShrinkageConfig(3, 2, 0, "constant:1", scale_mode="unknown"))
        with pytest.raises(DomainError):
            sure(Observation.known([1.0, 0.0, 3.0], 1.0), ShrinkageConfig(3, 2, 0.2, "constant:1"))

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(0.05, 20), min_size=3, max_size=8),
        st.floats(0.3, 6.0),
        st.floats(0.0, 0.4),
        st.floats(0.0, 1.0),
    )
    def test_sure_below_psi_upper_bound(self, z, p, alpha, frac):
        # SURE never exceeds d + (sum weights) phi Psi / v^2, because psi <= Psi and phi >= 0
        z = np.asarray(z)
        d = z.size
        band = ShrinkageConfig(d, p, alpha, "auto").phi_fn.c
        cfg = ShrinkageConfig(d, p, alpha, PhiSpec.constant(frac * band))
        rep = sure(Observation.known(z, 1.0), cfg)
        v = lp_norm(z, p)
        bound = d + sum(rep.per_coordinate_weights) * cfg.phi_fn(v) * rep.psi_upper / v**2
        assert rep.value <= bound + 1e-9 * max(1.0, abs(bound))


class TestMonteCarlo:
    def test_identity_estimator(self):
        cfg = ShrinkageConfig(5, 2, 0, PhiSpec.constant(0))
        mean = MeanConfig.radial(5, 3.0)
        losses = mc_losses(cfg, mean, 10_000, seed=3)
        est = mc_risk(cfg, mean, 10_000, seed=3)
        assert est.mean == pytest.approx(float(np.mean(losses)), rel=1e-15)
        assert abs(est.mean - 5) <= 3 * est.stderr
        assert est.stderr == pytest.approx(np.std(losses, ddof=1) / 100, rel=1e-12)

    def test_origin_risk(self):
        est = mc_risk(ShrinkageConfig(5, 2, 0, PhiSpec.constant(3)), MeanConfig(np.zeros(5)), 10**5, seed=0)
        assert abs(est.mean - 2.0) <= 3 * est.stderr

    def test_far_mean(self):
        est = mc_risk(ShrinkageConfig(5, 2, 0, "auto"), MeanConfig.radial(5, 100.0), 20_000, seed=1)
        assert abs(est.mean - 5) <= 3 * est.stderr

    def test_unknown_scale_runs(self):
        cfg = ShrinkageConfig(5, 2, 0, "auto", scale_mode="unknown")
        est = mc_risk(cfg, MeanConfig(np.zeros(5), scale_mode="unknown", n=10), 20_000, seed=2)
        assert est.mean < 5

    def test_mismatches(self):
        cfg = ShrinkageConfig(5, 2, 0, "auto")
        with pytest.raises(ValidationError):
            mc_risk(cfg, MeanConfig(np.zeros(4)), 100)
        with pytest.raises(ValidationError):
            mc_risk(cfg, MeanConfig(np.zeros(5), scale_mode="unknown", n=4), 100)
        with pytest.raises(ValidationError):
            mc_risk(cfg, MeanConfig(np.zeros(5)), 1)
        with pytest.raises(ValidationError):
            MeanConfig(np.zeros(5), scale_mode="unknown")
        with pytest.raises(ValidationError):
            MeanConfig.radial(5, -1.0)

    def test_radial_direction(self):
        m = MeanConfig.radial(3, 2.0, direction=[1.0, 1.0, 0.0])
        np.testing.assert_allclose(m.theta, [math.sqrt(2), math.sqrt(2), 0.0])

    def test_from_samples(self):
        r = RiskEstimate.from_samples(np.array([1.0, 3.0]), seed=4)
        assert (r.mean, r.reps, r.seed) == (2.0, 2, 4)
        assert r.stderr == pytest.approx(1.0)

    def test_paired_sure_difference(self):
        # on the same draws, SURE minus the realized loss has mean zero
        from lpshrink.risk import simulate

        cfg = ShrinkageConfig(5, 1.0, 0.3, PhiSpec.constant(1.0))
        mean = MeanConfig.radial(5, 1.5)

        def gap(z, _s):
            loss = ((shrink_batch(z, 1.0, cfg) - mean.theta) ** 2).sum(axis=1)
            return sure_batch(z, 1.0, cfg) - loss

        est = RiskEstimate.from_samples(simulate(gap, mean, 50_000, seed=11), 11)
        assert abs(est.mean) <= 3 * est.stderr
        assert mc_sure(cfg, mean, 50_000, seed=11).reps == 50_000


class TestCorrectionEnergy:
    @pytest.mark.parametrize("p,alpha", [(2, 0), (1, 0.3), (4, 0.2), (INFINITY, 0), (0.5, 0.1)])
    def test_bound_holds(self, p, alpha):
        cfg = ShrinkageConfig(5, p, alpha, "auto")
        bound = correction_energy_bound(cfg)
        for norm in (0.0, 1.0, 3.0):
            est = mc_correction_energy(cfg, MeanConfig.radial(5, norm, direction=np.ones(5)), 20_000, seed=5)
            assert est.mean <= bound + 3 * est.stderr

    def test_tight_for_james_stein(self):
        # E[c^2 / ||z||^2] at theta = 0 is c^2 / (d - 2), which is the bound
        cfg = ShrinkageConfig(5, 2, 0, PhiSpec.constant(3))
        est = mc_correction_energy(cfg, MeanConfig(np.zeros(5)), 10**5, seed=6)
        assert abs(est.mean - correction_energy_bound(cfg)) <= 3 * est.stderr

    def test_shorter_exponent_fails_for_sup_norm(self):
        d, alpha = 5, 0.0
        cfg = ShrinkageConfig(d, INFINITY, alpha, "auto")
        r = 2 * (1 - alpha)
        literal = cfg.phi_fn.sup**2 * max(1.0, d ** (1 / r)) / (d - 2)
        est = mc_correction_energy(cfg, MeanConfig(np.zeros(d)), 50_000, seed=8)
        assert est.mean > literal + 10 * est.stderr
        assert est.mean <= correction_energy_bound(cfg) + 3 * est.stderr


class TestDominanceAndExactness:
    def test_positive_part_dominates(self):
        plain = ShrinkageConfig(5, 1.7, 0.3, PhiSpec.constant(1.0))
        pos = ShrinkageConfig(5, 1.7, 0.3, PhiSpec.constant(1.0), positive_part=True)
        for norm in (0.0, 1.0, 3.0):
            diff = paired_difference(plain, pos, MeanConfig.radial(5, norm), 20_000, seed=9)
            assert diff.mean >= -3 * diff.stderr

    def test_ds_risk_is_d(self):
        cfg = ShrinkageConfig(5, 2, 0, PhiSpec.ds(1.0))
        for norm in (0.0, 4.0):
            est = mc_risk(cfg, MeanConfig.radial(5, norm), 20_000, seed=10)
            assert abs(est.mean - 5) <= 3 * est.stderr


class TestIdentityChecks:
    def test_stein_linear(self):
        chk = identity_check("stein", "linear", 20_000, seed=1, theta=[0.0])
        assert chk.rhs == 1.0
        assert chk.expected == 1.0
        assert abs(chk.lhs - 1) < 0.05

    def test_chi_square_first_and_second_moment(self):
        one = identity_check("chi-square", "one", 50_000, seed=2, n=6)
        assert one.expected == 6.0 and abs(one.zscore) <= 4
        lin = identity_check("chi-square", "linear", 50_000, seed=3, n=6)
        assert lin.expected == 48.0 and abs(lin.zscore) <= 4
        assert lin.lhs == pytest.approx(48, rel=0.03)

    @pytest.mark.parametrize("fn", ["quadratic", "inverse"])
    def test_other_chi_square_functions(self, fn):
        chk = identity_check("chi-square", fn, 50_000, seed=4, n=8, sigma2=1.5)
        assert abs(chk.zscore) <= 4

    def test_stein_cubic_scaled(self):
        chk = identity_check("stein", "cubic", 50_000, seed=5, theta=[0.5, -1.0], sigma2=2.0)
        assert abs(chk.zscore) <= 4

    @pytest.mark.parametrize("derivative", ["analytic", "numeric"])
    def test_estimator_correction(self, derivative):
        cfg = ShrinkageConfig(5, 2, 0.3, PhiSpec.constant(1))
        chk = identity_check("stein", "estimator", 50_000, seed=6, config=cfg,
                             theta=[1.0, -0.5, 0.0, 2.0, 0.25], derivative=derivative)
        assert abs(chk.zscore) <= 4

    def test_analytic_divergence_matches_numeric(self):
        from lpshrink.risk import _estimator_divergence, _numeric_divergence

        rng = np.random.default_rng(12)
        for p in (0.8, 2.0, 3.5, INFINITY):
            cfg = ShrinkageConfig(6, p, 0.2, PhiSpec.ds(0.7))
            z = rng.standard_normal((30, 6)) * 2
            xi = lambda x: shrink_batch(x, 1.3, cfg) - x  # noqa: E731
            np.testing.assert_allclose(
                _estimator_divergence(z, 1.3, cfg, None), _numeric_divergence(xi, z, None), rtol=1e-5, atol=1e-6
            )
            np.testing.assert_allclose(
                _estimator_divergence(z, 1.3, cfg, 2), _numeric_divergence(xi, z, 2), rtol=1e-5, atol=1e-6
            )

    def test_detects_wrong_derivative(self):
        # a deliberately broken oracle must produce a large z-score
        from lpshrink import risk

        cfg = ShrinkageConfig(5, 2, 0.0, PhiSpec.constant(3))
        orig = risk._estimator_divergence
        try:
            risk._estimator_divergence = lambda *a: 0.5 * orig(*a)
            chk = identity_check("stein", "estimator", 50_000, seed=7, config=cfg, theta=[0.0] * 5)
        finally:
            risk._estimator_divergence = orig
        assert abs(chk.zscore) > 10

    def test_validation(self):
        with pytest.raises(ValidationError):
            identity_check("stein", "nope", 100)
        with pytest.raises(ValidationError):
            identity_check("chi-square", "one", 100)
        with pytest.raises(ValidationError):
            identity_check("other", "one", 100, n=3)
        with pytest.raises(ValidationError):
            identity_check("stein", "estimator", 100)

    def test_workers_do_not_change_result(self):
        a = identity_check("chi-square", "linear", 30_000, seed=8, n=5)
        b = identity_check("chi-square", "linear", 30_000, seed=8, n=5, workers=3)
        assert a == b
