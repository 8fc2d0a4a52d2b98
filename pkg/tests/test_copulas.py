import math

import numpy as np
import pytest
from scipy import integrate

from levyfilter.copulas import (
    ClaytonCopula,
    CompleteDependenceCopula,
    ConditionalJumpLaw,
    IndependenceCopula,
    conditional_law,
    conditional_quantile_bulk,
    eval_H,
    joint_tail,
    mixed_density_h,
    sample_conditional,
    sample_joint_finite,
    scaling_check,
    survival_copula_finite,
)
from levyfilter.errors import (
    DegenerateLawError,
    DomainError,
    RangeError,
    UnsupportedDensityError,
)
from levyfilter.measures import ExponentialMeasure, TemperedStableMeasure


def second_difference(cop, u1, u2, rel_step=1e-4):
    """Central second-difference oracle for the mixed density."""
    h1 = rel_step * u1
    h2 = rel_step * u2
    return (
        eval_H(cop, u1 + h1, u2 + h2)
        - eval_H(cop, u1 + h1, u2 - h2)
        - eval_H(cop, u1 - h1, u2 + h2)
        + eval_H(cop, u1 - h1, u2 - h2)
    ) / (4 * h1 * h2)


class TestEvalH:
    def test_half_weight_diagonal(self):
        cop = ClaytonCopula(1.0, half_weights=True)
        for u in (1e-3, 1.0, 7.3, 1e4):
            assert eval_H(cop, u, u) == pytest.approx(u, rel=1e-14)

    def test_standard_margin_limit(self):
        cop = ClaytonCopula(1.7, half_weights=False)
        assert eval_H(cop, 3.0, math.inf) == pytest.approx(3.0)
        assert eval_H(cop, 3.0, 1e12) == pytest.approx(3.0, rel=1e-6)

    def test_independence_sentinels(self):
        cop = IndependenceCopula()
        assert eval_H(cop, 5.0, math.inf) == 5.0
        assert eval_H(cop, math.inf, 2.0) == 2.0
        assert eval_H(cop, 5.0, 2.0) == 0.0

    def test_complete_dependence_min(self):
        assert eval_H(CompleteDependenceCopula(), 3.0, 2.0) == 2.0

    def test_negative_rejected(self):
        with pytest.raises(DomainError):
            eval_H(ClaytonCopula(1.0), -1.0, 2.0)

    def test_zero_coordinate(self):
        assert eval_H(ClaytonCopula(1.0), 0.0, 2.0) == 0.0

    @pytest.mark.parametrize("cop", [
        ClaytonCopula(0.7, half_weights=True),
        ClaytonCopula(2.5, half_weights=False),
        CompleteDependenceCopula(),
    ])
    def test_two_increasing_on_random_rectangles(self, cop, rng):
        for _ in range(200):
            a1, a2 = np.exp(rng.uniform(-3, 3, 2))
            b1 = a1 * np.exp(rng.uniform(0.01, 2))
            b2 = a2 * np.exp(rng.uniform(0.01, 2))
            vol = (
                eval_H(cop, b1, b2)
                - eval_H(cop, a1, b2)
                - eval_H(cop, b1, a2)
                + eval_H(cop, a1, a2)
            )
            assert vol >= -1e-12


class TestMixedDensity:
    def test_diagonal_closed_form(self):
        # quarter (1+theta) u^-1 on the half-weight diagonal
        cop = ClaytonCopula(1.0, half_weights=True)
        assert mixed_density_h(cop, 1.0, 1.0) == pytest.approx(0.5, rel=1e-12)
        assert mixed_density_h(cop, 2.0, 2.0) == pytest.approx(0.25, rel=1e-12)

    @pytest.mark.parametrize("theta", [0.5, 1.0, 2.0, 5.0])
    @pytest.mark.parametrize("half", [True, False])
    def test_matches_second_difference(self, theta, half):
        cop = ClaytonCopula(theta, half_weights=half)
        # span keeps the second difference above the double-precision
        # cancellation floor (H decays like (u1/u2)^(theta+1) off-diagonal)
        grid = np.geomspace(0.5, 2.0, 10)
        for u1 in grid:
            for u2 in grid:
                fd = second_difference(cop, u1, u2)
                assert mixed_density_h(cop, u1, u2) == pytest.approx(fd, rel=1e-6)

    def test_specific_point_against_fd(self):
        cop = ClaytonCopula(2.0, half_weights=True)
        fd = second_difference(cop, 1.0, 4.0)
        assert mixed_density_h(cop, 1.0, 4.0) == pytest.approx(fd, rel=1e-6)

    def test_nonnegative_on_random_grid(self, rng):
        cop = ClaytonCopula(3.0)
        u = np.exp(rng.uniform(-4, 4, 100))
        v = np.exp(rng.uniform(-4, 4, 100))
        assert np.all(np.asarray(mixed_density_h(cop, u, v)) >= 0)

    def test_singular_families_rejected(self):
        with pytest.raises(UnsupportedDensityError):
            mixed_density_h(IndependenceCopula(), 1.0, 1.0)
        with pytest.raises(UnsupportedDensityError):
            mixed_density_h(CompleteDependenceCopula(), 1.0, 1.0)


class TestConditionalLaw:
    def test_mass_against_quadrature(self):
        # independent oracle: adaptive quadrature of h(U1(z1), U2(z2)) f1(z1)
        m1 = ExponentialMeasure(rate=1.0)
        m2 = ExponentialMeasure(rate=1.0)
        cop = ClaytonCopula(1.0, half_weights=True)
        for z2 in (0.3, 1.0, 2.5):
            law = conditional_law(cop, m1, m2, z2)
            u2 = float(m2.tail_exact(z2))
            oracle, _ = integrate.quad(
                lambda z1: float(
                    mixed_density_h(cop, float(m1.tail_exact(z1)), u2)
                    * m1.density(z1)
                ),
                1e-9,
                40.0,
                epsabs=1e-12,
                epsrel=1e-10,
                limit=300,
            )
            assert law.mass == pytest.approx(oracle, rel=1e-8)

    def test_sigma_finite_standard_clayton_has_unit_mass(self):
        m1 = TemperedStableMeasure(0.5)
        m2 = TemperedStableMeasure(0.5)
        law = conditional_law(ClaytonCopula(1.0, half_weights=False), m1, m2, 0.7)
        assert law.mass == pytest.approx(1.0, abs=1e-14)

    def test_sigma_finite_half_weight_mass(self):
        m1 = TemperedStableMeasure(0.5)
        m2 = TemperedStableMeasure(0.5)
        for theta in (1.0, 2.0):
            law = conditional_law(ClaytonCopula(theta, half_weights=True), m1, m2, 0.7)
            assert law.mass == pytest.approx(2.0 ** (1.0 / theta), rel=1e-14)

    def test_strong_dependence_concentrates_at_matched_tail(self, rng):
        # theta = 20 Clayton behaves like complete dependence
        m1 = ExponentialMeasure(rate=1.0)
        m2 = ExponentialMeasure(rate=1.0)
        law = conditional_law(ClaytonCopula(20.0, half_weights=True), m1, m2, 1.3)
        target = float(m1.inverse_tail_exact(m2.tail_exact(1.3)))
        draws = sample_conditional(law, rng, size=4001)
        assert abs(np.median(draws) - target) / target < 0.05

    def test_theta_to_zero_limit_law(self):
        # the normalized conditional law of a COMMON jump tends, as theta
        # -> 0+, to the geometric-mean coupling limit with survival
        # sqrt(U1(z)/lam1) (for matched unit-exponential margins the
        # half-rate exponential), not to the margin shape; L1 by quadrature
        m1 = ExponentialMeasure(rate=1.0)
        m2 = ExponentialMeasure(rate=1.0)
        law = conditional_law(ClaytonCopula(0.05, half_weights=True), m1, m2, 1.0)

        def gap(z1):
            z1 = float(z1)
            return abs(float(law.density(z1)) / law.mass - 0.5 * math.exp(-z1 / 2))

        l1, _ = integrate.quad(gap, 1e-9, 60.0, epsabs=1e-10, epsrel=1e-8, limit=400)
        assert l1 < 0.05

    def test_complete_dependence_point_law(self):
        m1 = ExponentialMeasure(rate=2.0)
        m2 = ExponentialMeasure(rate=2.0)
        law = conditional_law(CompleteDependenceCopula(), m1, m2, 0.9)
        assert law.kind == "point"
        assert law.mass == 1.0
        assert law.atom == pytest.approx(0.9, rel=1e-9)  # matched margins

    def test_independence_rejected(self):
        m = ExponentialMeasure()
        with pytest.raises(UnsupportedDensityError):
            conditional_law(IndependenceCopula(), m, m, 1.0)

    def test_mark_outside_table_range(self):
        m = ExponentialMeasure()
        with pytest.raises(RangeError):
            conditional_law(ClaytonCopula(1.0), m, m, 1e9)
        with pytest.raises(DomainError):
            conditional_law(ClaytonCopula(1.0), m, m, -1.0)

    def test_cdf_table_monotone_unit(self):
        m = ExponentialMeasure(rate=1.0)
        law = conditional_law(ClaytonCopula(1.0), m, m, 1.0)
        assert np.all(np.diff(law.cdf_table) >= -1e-12)
        assert law.cdf_table[0] == pytest.approx(0.0, abs=1e-6)
        assert law.cdf_table[-1] == pytest.approx(1.0, abs=1e-6)


class TestSampling:
    def test_ks_against_closed_form_cdf(self, rng):
        m1 = ExponentialMeasure(rate=1.0)
        m2 = ExponentialMeasure(rate=1.0)
        law = conditional_law(ClaytonCopula(1.0, half_weights=True), m1, m2, 1.0)
        z = np.sort(sample_conditional(law, rng, size=100_000))
        grid = z[:: len(z) // 300]
        cdf = 1.0 - np.asarray(law.survival(grid)) / law.mass
        ecdf = np.searchsorted(z, grid, side="right") / len(z)
        assert np.max(np.abs(ecdf - cdf)) < 0.01

    def test_deterministic_and_in_support(self):
        m = ExponentialMeasure()
        law = conditional_law(ClaytonCopula(2.0), m, m, 0.5)
        a = sample_conditional(law, np.random.default_rng(3), size=64)
        b = sample_conditional(law, np.random.default_rng(3), size=64)
        assert np.array_equal(a, b)
        assert np.all(a > 0)

    def test_degenerate_mass_raises(self):
        m = ExponentialMeasure()
        law = ConditionalJumpLaw(
            z2=1.0, u2=0.3, mass=1e-14, kind="density",
            copula=ClaytonCopula(1.0), measure=m,
        )
        with pytest.raises(DegenerateLawError):
            law.sample(np.random.default_rng(0))

    def test_bulk_quantile_matches_per_law(self):
        m1 = ExponentialMeasure(rate=2.0)
        m2 = ExponentialMeasure(rate=2.0)
        cop = ClaytonCopula(2.0, half_weights=True)
        z2 = np.array([0.2, 0.9, 1.7])
        v = np.array([0.1, 0.5, 0.9])
        bulk = conditional_quantile_bulk(cop, m1, m2, z2, v)
        per = [
            conditional_law(cop, m1, m2, float(a)).quantile(float(b))
            for a, b in zip(z2, v)
        ]
        assert np.allclose(bulk, per, rtol=1e-12)


class TestJointTail:
    def test_independence_no_common_jumps(self):
        m = ExponentialMeasure()
        assert joint_tail(IndependenceCopula(), m, m, 1.0, 2.0) == 0.0

    def test_complete_dependence_matched(self):
        m = ExponentialMeasure(rate=1.0)
        val = joint_tail(CompleteDependenceCopula(), m, m, 0.8, 0.8)
        assert val == pytest.approx(float(m.tail_exact(0.8)), rel=1e-12)

    def test_clayton_harmonic_mean_value(self):
        # (1/2 e + 1/2 e)^-1 = 1/e at z1 = z2 = 1 for unit exponential margins
        m = ExponentialMeasure(rate=1.0)
        val = joint_tail(ClaytonCopula(1.0, half_weights=True), m, m, 1.0, 1.0)
        assert val == pytest.approx(math.exp(-1.0), rel=1e-12)

    def test_clayton_against_joint_sampler(self, rng):
        # Monte Carlo of the constructed coupled jumps, 3 sigma
        m = ExponentialMeasure(rate=1.0)
        cop = ClaytonCopula(1.0, half_weights=True)
        n = 100_000
        z1, z2 = sample_joint_finite(cop, m, m, n, rng)
        lam_h = survival_copula_finite(cop, 1.0, 1.0).rate
        target = joint_tail(cop, m, m, 1.0, 1.0)
        p = target / lam_h
        phat = np.mean((z1 >= 1.0) & (z2 >= 1.0))
        assert abs(phat - p) < 3 * math.sqrt(p * (1 - p) / n)


class TestSurvivalCopula:
    def test_normalization(self):
        st = survival_copula_finite(ClaytonCopula(1.0, half_weights=True), 2.0, 2.0)
        assert st.rate == pytest.approx(2.0)
        assert st.cbar(1.0, 1.0) == pytest.approx(1.0)

    def test_half_weight_off_diagonal_value(self):
        st = survival_copula_finite(ClaytonCopula(1.0, half_weights=True), 1.0, 1.0)
        assert st.cbar(0.5, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-12)

    def test_independence_zero_rate(self):
        st = survival_copula_finite(IndependenceCopula(), 1.0, 2.0)
        assert st.rate == 0.0
        assert st.cbar is None

    def test_complete_dependence_rate(self):
        st = survival_copula_finite(CompleteDependenceCopula(), 1.5, 2.5)
        assert st.rate == pytest.approx(1.5)


class TestScaling:
    @pytest.mark.parametrize("cop", [
        ClaytonCopula(1.0, half_weights=True),
        ClaytonCopula(2.0, half_weights=False),
        CompleteDependenceCopula(),
    ])
    def test_homogeneous_families(self, cop):
        assert scaling_check(cop, [0.01, 0.1, 10.0, 1e4]) < 1e-12

    def test_perturbed_copula_detected(self):
        class Shifted(ClaytonCopula):
            def H(self, u1, u2):
                return super().H(u1, u2) + 0.25

        assert scaling_check(Shifted(1.0), [10.0]) > 0.01


class TestJointSamplerConsistency:
    def test_empirical_joint_tail_on_nine_rectangles(self, rng):
        m = ExponentialMeasure(rate=1.0)
        cop = ClaytonCopula(1.0, half_weights=True)
        n = 100_000
        z1, z2 = sample_joint_finite(cop, m, m, n, rng)
        lam_h = survival_copula_finite(cop, 1.0, 1.0).rate
        corners = [0.3, 0.8, 1.6]
        for a in corners:
            for b in corners:
                p = joint_tail(cop, m, m, a, b) / lam_h
                phat = np.mean((z1 >= a) & (z2 >= b))
                se = math.sqrt(p * (1 - p) / n)
                assert abs(phat - p) <= 3 * se, (a, b, phat, p)

    def test_marginal_recovery_complete_dependence(self, rng):
        # all jumps common with matched margins: the signal-jump marginal
        # is exactly the truncated margin law
        m = ExponentialMeasure(rate=1.0)
        z1, _ = sample_joint_finite(CompleteDependenceCopula(), m, m, 100_000, rng)
        z1 = np.sort(z1)
        grid = z1[:: len(z1) // 300]
        cdf = 1.0 - np.asarray(m.tail_exact(grid)) / 1.0
        ecdf = np.searchsorted(z1, grid, side="right") / len(z1)
        assert np.max(np.abs(ecdf - cdf)) < 0.01

    def test_marginal_recovery_clayton_true_margin(self, rng):
        # Clayton sampler marginal vs its own closed-form margin
        # H(U1(z), lam2) / lam_H (the nu1 shape is recovered only in the
        # complete-dependence limit; see the decisions ledger)
        m = ExponentialMeasure(rate=1.0)
        cop = ClaytonCopula(1.0, half_weights=True)
        z1, _ = sample_joint_finite(cop, m, m, 100_000, rng)
        z1 = np.sort(z1)
        lam_h = survival_copula_finite(cop, 1.0, 1.0).rate
        grid = z1[:: len(z1) // 300]
        surv = np.asarray(eval_H(cop, np.asarray(m.tail_exact(grid)), 1.0)) / lam_h
        ecdf = np.searchsorted(z1, grid, side="right") / len(z1)
        assert np.max(np.abs(ecdf - (1.0 - surv))) < 0.01


class TestCharFunction:
    def test_unit_at_zero_and_bounded(self):
        m = ExponentialMeasure(rate=1.0)
        law = conditional_law(ClaytonCopula(1.0), m, m, 1.0)
        xi = np.array([0.0, 1.0, 5.0, 40.0])
        c = law.char(xi)
        assert c[0] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.abs(c) <= 1.0 + 1e-9)

    def test_matches_direct_density_quadrature(self):
        m = ExponentialMeasure(rate=1.0)
        law = conditional_law(ClaytonCopula(1.0, half_weights=True), m, m, 1.0)
        for x in (2.0, 17.0):
            re, _ = integrate.quad(
                lambda z: float(law.density(z)) * math.cos(x * z), 1e-9, 40.0,
                epsrel=1e-10, limit=300,
            )
            im, _ = integrate.quad(
                lambda z: float(law.density(z)) * math.sin(x * z), 1e-9, 40.0,
                epsrel=1e-10, limit=300,
            )
            val = complex(re, im) / law.mass
            assert law.char(np.array([x]))[0] == pytest.approx(val, rel=2e-5)
