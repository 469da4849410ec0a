import numpy as np
import pytest
from scipy import stats

from brwlab import (
    CovMatrix,
    GeometricSumSpec,
    InvalidMu,
    NotPSD,
    clt_bound,
    coin_summand_spec,
    default_c_mvn,
    default_c_r,
    empirical_summand_spec,
    mvn_compare_bound,
    renyi_bound,
    sample_exp,
    sample_geometric_sum,
    sample_mvn,
    sample_sl,
    sl_cf,
    sqrt_factor,
    two_point_summand_spec,
)
from brwlab.streams import substream


class TestFactorization:
    def test_reconstructs(self):
        rng = substream(100, 0)
        a = rng.normal(size=(4, 4))
        cov = a @ a.T
        fac = sqrt_factor(cov)
        assert fac.r == 4
        assert np.allclose(fac.factor @ fac.factor.T, cov, atol=1e-10)

    def test_rank_deficient(self):
        fac = sqrt_factor(np.array([[1.0, 2.0], [2.0, 4.0]]))
        assert fac.rank == 1
        assert fac.factor.shape == (2, 1)
        assert np.allclose(fac.factor @ fac.factor.T, [[1, 2], [2, 4]], atol=1e-10)

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSD):
            sqrt_factor(np.array([[1.0, 0.0], [0.0, -1e-3]]))

    def test_rejects_asymmetric(self):
        with pytest.raises(ValueError):
            sqrt_factor(np.array([[1.0, 0.5], [0.0, 1.0]]))

    def test_tiny_negative_eigenvalue_clipped(self):
        # exact-arithmetic PSD matrices may carry -1e-12 eigenvalues
        v = np.array([1.0, 1.0, 1.0]) / np.sqrt(3.0)
        cov = np.outer(v, v)
        fac = sqrt_factor(cov)
        assert fac.rank == 1


class TestSamplers:
    def test_exp_mean(self):
        draws = sample_exp(2.0, substream(101, 0), 100_000)
        se = draws.std(ddof=1) / np.sqrt(len(draws))
        assert abs(draws.mean() - 0.5) < 4 * se
        with pytest.raises(ValueError):
            sample_exp(0.0, substream(101, 1))

    def test_mvn_covariance(self):
        cov = np.array([[2.0, 0.7], [0.7, 1.0]])
        x = sample_mvn(sqrt_factor(cov), substream(101, 2), 200_000)
        emp = np.cov(x.T)
        assert np.allclose(emp, cov, atol=0.03)

    def test_mvn_singular_support(self):
        fac = sqrt_factor(np.array([[1.0, 2.0], [2.0, 4.0]]))
        x = sample_mvn(fac, substream(101, 3), 5_000)
        assert np.abs(x[:, 1] - 2.0 * x[:, 0]).max() < 1e-9

    def test_sl_matches_double_exponential(self):
        # sqrt(E) N(0, 2) has the standard two-sided exponential law
        x = sample_sl(sqrt_factor(np.array([[2.0]])), substream(101, 4), 300_000)[:, 0]
        assert stats.kstest(x, stats.laplace.cdf).pvalue > 1e-6

    def test_exp_difference_is_sl(self):
        rng = substream(101, 5)
        diff = sample_exp(1.0, rng, 300_000) - sample_exp(1.0, rng, 300_000)
        assert stats.kstest(diff, stats.laplace.cdf).pvalue > 1e-6

    def test_sl_covariance(self):
        cov = np.array([[1.5, -0.4], [-0.4, 0.8]])
        x = sample_sl(sqrt_factor(cov), substream(101, 6), 400_000)
        assert np.allclose(np.cov(x.T), cov, atol=0.05)

    def test_sl_characteristic_function(self):
        cov = np.array([[1.0, 0.3], [0.3, 2.0]])
        fac = sqrt_factor(cov)
        n = 400_000
        x = sample_sl(fac, substream(101, 7), n)
        grid = np.array([[0.5, 0.0], [0.0, 0.7], [0.4, -0.3]])
        want = sl_cf(fac, grid)
        got = np.exp(1j * x @ grid.T).mean(axis=0)
        assert np.abs(got - want).max() < 5.0 / np.sqrt(n)

    def test_sl_cf_values(self):
        fac = sqrt_factor(np.array([[2.0]]))
        assert sl_cf(fac, np.array([1.0])) == pytest.approx(0.5, abs=1e-12)
        assert sl_cf(fac, np.array([0.0])) == pytest.approx(1.0, abs=1e-12)


class TestRandomSums:
    def test_spec_mu(self):
        assert coin_summand_spec(0.125).mu == 8.0
        spec = GeometricSumSpec(
            name="det", r=1, sampler=lambda rng, size: np.zeros((size, 1)),
            cov=np.array([[0.0]]), abs_third_l1=0.0, stopping=("deterministic", 6),
        )
        assert spec.mu == 6.0

    def test_counts_at_least_one(self):
        spec = coin_summand_spec(0.25)
        counts = spec.sample_counts(substream(102, 0), 10_000)
        assert counts.min() >= 1
        se = counts.std(ddof=1) / np.sqrt(len(counts))
        assert abs(counts.mean() - 4.0) < 4 * se

    def test_reduceat_exact(self):
        spec = GeometricSumSpec(
            name="ramp", r=1,
            sampler=lambda rng, size: np.arange(size, dtype=np.float64)[:, None],
            cov=np.array([[1.0]]), abs_third_l1=1.0, stopping=("deterministic", 2),
        )
        out = sample_geometric_sum(spec, substream(102, 1), 3)
        want = np.array([[0 + 1], [2 + 3], [4 + 5]]) / np.sqrt(2.0)
        assert np.allclose(out, want, atol=1e-12)

    def test_wald_variance(self):
        spec = two_point_summand_spec(0.1, v=(1.0, 2.0))
        x = sample_geometric_sum(spec, substream(102, 2), 150_000)
        emp = np.cov(x.T)
        assert np.allclose(emp, spec.cov, atol=0.08)

    def test_coin_validate(self):
        coin_summand_spec(0.5).validate(substream(102, 3))

    def test_validate_catches_bias(self):
        spec = GeometricSumSpec(
            name="biased", r=1,
            sampler=lambda rng, size: rng.normal(0.2, 1.0, (size, 1)),
            cov=np.array([[1.0]]), abs_third_l1=1.0, stopping=("geometric", 0.5),
        )
        with pytest.raises(ValueError):
            spec.validate(substream(102, 4))

    def test_validate_catches_bad_shape(self):
        spec = GeometricSumSpec(
            name="flat", r=2,
            sampler=lambda rng, size: rng.normal(size=(size, 1)),
            cov=np.eye(2), abs_third_l1=1.0, stopping=("geometric", 0.5),
        )
        with pytest.raises(ValueError):
            spec.validate(substream(102, 5))

    def test_empirical_spec_centering(self):
        pool = substream(102, 6).normal(3.0, 1.0, size=(500, 2))
        spec = empirical_summand_spec("pool", pool, ("geometric", 0.25))
        spec.validate(substream(102, 7))
        draws = spec.sampler(substream(102, 8), 4_000)
        assert set(map(tuple, draws)) <= set(map(tuple, pool - pool.mean(axis=0)))
        centered = pool - pool.mean(axis=0)
        assert np.allclose(spec.cov, centered.T @ centered / len(pool), atol=1e-12)
        third = np.mean(np.abs(centered).sum(axis=1) ** 3)
        assert spec.abs_third_l1 == pytest.approx(third, rel=1e-12)

    def test_two_point_constants(self):
        spec = two_point_summand_spec(0.5, v=(1.0, 2.0))
        assert spec.abs_third_l1 == 27.0
        assert np.array_equal(spec.cov, [[1.0, 2.0], [2.0, 4.0]])


class TestBounds:
    def test_clt_bound_closed_form(self):
        assert clt_bound(1, 4, 1.0) == pytest.approx(2.0, abs=1e-12)

    def test_clt_bound_scaling(self):
        assert clt_bound(2, 100, 5.0) / clt_bound(2, 6_400, 5.0) == pytest.approx(2.0, rel=1e-12)

    def test_clt_bound_validation(self):
        with pytest.raises(ValueError):
            clt_bound(0, 4, 1.0)
        with pytest.raises(ValueError):
            clt_bound(1, 4, 0.0)

    def test_renyi_invalid_mu(self):
        with pytest.raises(InvalidMu):
            renyi_bound(1.0, 1.0, [1.0])

    def test_renyi_formula(self):
        mu = 64.0
        got = renyi_bound(mu, 1.0, [1.0], dw_stopping=0.0, c_r=2.0)
        want = (2.0 * mu ** (1 / 3) + 3.5) / np.sqrt(mu)
        assert got == pytest.approx(want, rel=1e-12)

    def test_renyi_stopping_term(self):
        base = renyi_bound(25.0, 1.0, [4.0, 9.0], dw_stopping=0.0)
        shifted = renyi_bound(25.0, 1.0, [4.0, 9.0], dw_stopping=0.1)
        assert shifted - base == pytest.approx((2.0 + 3.0) * 0.1 / 5.0, rel=1e-10)

    def test_default_constants(self):
        assert default_c_r(1) == pytest.approx(2.0 * 2.0 ** (1 / 3), rel=1e-12)
        assert default_c_mvn(1) == pytest.approx(2.0 * (2.0 / np.pi) ** 0.25, rel=1e-12)
        with pytest.raises(ValueError):
            default_c_r(0)
        with pytest.raises(ValueError):
            default_c_mvn(0)

    def test_mvn_compare(self):
        a = np.eye(2)
        assert mvn_compare_bound(a, a) == 0.0
        b = a + np.full((2, 2), 1.0)
        assert mvn_compare_bound(a, b, c=3.0) == pytest.approx(6.0, rel=1e-12)
        with pytest.raises(ValueError):
            mvn_compare_bound(np.eye(2), np.eye(3))

    def test_cov_matrix_fields(self):
        fac = sqrt_factor(np.eye(3))
        assert isinstance(fac, CovMatrix)
        assert fac.r == 3 and fac.rank == 3
