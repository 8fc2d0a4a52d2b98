import math

import numpy as np
import pytest
from scipy import integrate

from levyfilter.errors import DomainError, RangeError
from levyfilter.measures import (
    ExponentialMeasure,
    TabulatedMeasure,
    TemperedStableMeasure,
    check_small_jump_integrability,
    inverse_tail,
    sample_jump_size,
    tail_integral,
    truncated_mass,
)


def quad_tail(m, z):
    """Independent adaptive-quadrature oracle for U(z), split at 1."""
    f = lambda x: float(m.density(x))
    if z < 1.0:
        a, _ = integrate.quad(f, z, 1.0, epsabs=1e-12, epsrel=1e-10, limit=200)
    else:
        a = 0.0
    b, _ = integrate.quad(f, max(z, 1.0), np.inf, epsabs=1e-12, epsrel=1e-10)
    return a + b


class TestTailIntegral:
    def test_exponential_closed_form(self):
        m = ExponentialMeasure(rate=1.0)
        assert tail_integral(m, 1.0) == pytest.approx(0.36787944117144233, rel=1e-12)

    def test_tail_at_infinity_is_zero(self):
        for m in (ExponentialMeasure(), TemperedStableMeasure(0.5)):
            assert tail_integral(m, math.inf) == 0.0

    def test_tail_at_zero(self):
        assert tail_integral(ExponentialMeasure(rate=3.0), 0.0) == pytest.approx(3.0)
        assert tail_integral(TemperedStableMeasure(0.5), 0.0) == math.inf

    def test_tempered_against_quadrature_oracle(self):
        m = TemperedStableMeasure(0.5)
        # oracle: adaptive quadrature of x^-1.5 e^-x with splitting at 1
        oracle = quad_tail(m, 0.5)
        assert oracle == pytest.approx(0.5906913067325993, rel=1e-10)
        assert tail_integral(m, 0.5) == pytest.approx(oracle, rel=1e-10)

    def test_negative_size_on_positive_support(self):
        with pytest.raises(DomainError):
            tail_integral(ExponentialMeasure(), -0.5)

    def test_signed_tail_on_symmetric_support(self):
        m = TemperedStableMeasure(1.5, support="symmetric")
        assert tail_integral(m, -2.0) == pytest.approx(-tail_integral(m, 2.0))

    def test_derivative_matches_density(self):
        # d/dz U(z) = -density(z), central differences with relative step
        for m in (ExponentialMeasure(rate=2.0), TemperedStableMeasure(0.5)):
            for z in (1e-3, 0.03, 0.7, 3.0):
                h = 1e-4 * z
                grad = (m.tail_exact(z + h) - m.tail_exact(z - h)) / (2 * h)
                assert grad == pytest.approx(-float(m.density(z)), rel=1e-6)


class TestInverseTail:
    def test_exponential_closed_form(self):
        m = ExponentialMeasure(rate=1.0)
        assert inverse_tail(m, math.exp(-2.0)) == pytest.approx(2.0, rel=1e-12)

    def test_total_mass_maps_to_table_edge(self):
        m = ExponentialMeasure(rate=1.0)
        z = inverse_tail(m, 1.0)
        assert z == pytest.approx(m.table.z_min, abs=1e-9)

    def test_round_trip_tempered(self):
        m = TemperedStableMeasure(0.5)
        for z in (1e-5, 1e-3, 0.5, 2.0, 10.0):
            u = tail_integral(m, z)
            assert inverse_tail(m, u) == pytest.approx(z, rel=1e-8)

    def test_out_of_range_names_interval(self):
        m = TemperedStableMeasure(0.5)
        with pytest.raises(RangeError):
            inverse_tail(m, 2.0 * float(m.table.u[0]))
        with pytest.raises(RangeError):
            inverse_tail(m, -1.0)


class TestTruncatedMass:
    def test_finite_limit_recovers_total(self):
        m = ExponentialMeasure(rate=1.0)
        assert truncated_mass(m, 0.0) == pytest.approx(1.0)
        assert truncated_mass(m, 1e-9) == pytest.approx(1.0, rel=1e-8)

    def test_tempered_equals_tail(self):
        m = TemperedStableMeasure(0.5)
        assert truncated_mass(m, 0.1) == pytest.approx(quad_tail(m, 0.1), rel=1e-9)

    def test_monotone_in_cutoff(self):
        m = TemperedStableMeasure(0.5)
        eps = np.array([0.01, 0.05, 0.2, 1.0, 3.0])
        vals = [truncated_mass(m, e) for e in eps]
        assert all(a >= b for a, b in zip(vals, vals[1:]))

    def test_symmetric_counts_both_sides(self):
        m = TemperedStableMeasure(1.5, support="symmetric")
        assert truncated_mass(m, 0.5) == pytest.approx(2 * quad_tail(m, 0.5), rel=1e-9)

    def test_additivity_finite(self):
        m = ExponentialMeasure(rate=2.0, scale=0.7)
        eps = 0.3
        inner, _ = integrate.quad(lambda z: float(m.density(z)), 0, eps, epsrel=1e-12)
        assert truncated_mass(m, eps) + inner == pytest.approx(2.0, rel=1e-8)

    def test_zero_cutoff_sigma_finite_rejected(self):
        with pytest.raises(DomainError):
            truncated_mass(TemperedStableMeasure(0.5), 0.0)


class TestSampling:
    def test_ks_against_quadratured_cdf(self, rng):
        m = TemperedStableMeasure(0.5)
        eps = 0.1
        lam = truncated_mass(m, eps)
        z = np.sort(sample_jump_size(m, eps, rng, size=100_000))
        # CDF oracle: 1 - U(z)/lambda_eps with U evaluated by quadrature
        grid = np.unique(np.concatenate([z[:: len(z) // 400], [z[-1]]]))
        cdf = np.array([1.0 - quad_tail(m, g) / lam for g in grid])
        ecdf = np.searchsorted(z, grid, side="right") / len(z)
        assert np.max(np.abs(ecdf - cdf)) < 0.01

    def test_all_above_cutoff(self, rng):
        m = TemperedStableMeasure(0.5)
        z = sample_jump_size(m, 0.25, rng, size=20_000)
        assert np.all(z > 0.25 - 1e-12)

    def test_exponential_mean(self):
        rng = np.random.default_rng(7)
        n = 50_000
        z = sample_jump_size(ExponentialMeasure(rate=1.0), 0.0, rng, size=n)
        assert abs(z.mean() - 1.0) < 3.0 / math.sqrt(n)

    def test_reproducible(self):
        m = ExponentialMeasure()
        a = sample_jump_size(m, 0.1, np.random.default_rng(11), size=100)
        b = sample_jump_size(m, 0.1, np.random.default_rng(11), size=100)
        assert np.array_equal(a, b)

    def test_symmetric_signed(self, rng):
        m = TemperedStableMeasure(1.5, support="symmetric")
        z = sample_jump_size(m, 0.5, rng, size=5000)
        assert np.any(z > 0) and np.any(z < 0)
        assert np.all(np.abs(z) > 0.5 - 1e-12)


class TestSmallJumpIntegrability:
    def test_tempered_half_converges(self):
        rep = check_small_jump_integrability(TemperedStableMeasure(0.5))
        oracle, _ = integrate.quad(
            lambda z: z**-0.5 * math.exp(-z), 0, 1, epsabs=1e-12, epsrel=1e-12
        )
        assert rep.converged
        assert rep.value == pytest.approx(oracle, rel=1e-6)

    def test_index_above_one_diverges(self):
        rep = check_small_jump_integrability(TemperedStableMeasure(1.5))
        assert not rep.converged

    def test_finite_activity_always_finite(self):
        rep = check_small_jump_integrability(ExponentialMeasure(rate=2.0))
        assert rep.converged


class TestTabulated:
    def test_round_trip_and_mass(self):
        grid = np.geomspace(1e-4, 12.0, 400)
        dens = 2.0 * np.exp(-grid)
        m = TabulatedMeasure(grid, dens)
        assert m.total_mass() == pytest.approx(2.0, rel=1e-3)
        u = tail_integral(m, 1.0)
        assert inverse_tail(m, u) == pytest.approx(1.0, rel=1e-6)

    def test_validation(self):
        with pytest.raises(DomainError):
            TabulatedMeasure([1.0, 0.5], [1.0, 1.0])
        with pytest.raises(DomainError):
            TabulatedMeasure([0.5, 1.0], [1.0, -1.0])
