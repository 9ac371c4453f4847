"""Distributional correctness of the constrained samplers against quadrature oracles."""

import math

import mpmath
import numpy as np
import pytest
from scipy import integrate, stats

from monoreg import (
    TruncatedNormalSpec,
    sample_gamma,
    sample_truncated_mvn,
    sample_truncated_normal,
    truncated_normal_moments,
)


def tn_moments_by_quadrature(mean, sd, lower, upper):
    """Independent truncated-normal moments via adaptive quadrature."""
    lo = max(lower, mean - 12 * sd)
    hi = min(upper, mean + 12 * sd)
    if hi <= lo:
        lo, hi = lower, lower + 14 * sd
    z, _ = integrate.quad(lambda t: stats.norm.pdf(t, mean, sd), lo, hi, limit=200)
    m1, _ = integrate.quad(lambda t: t * stats.norm.pdf(t, mean, sd), lo, hi, limit=200)
    m2, _ = integrate.quad(lambda t: t * t * stats.norm.pdf(t, mean, sd), lo, hi, limit=200)
    mu = m1 / z
    return mu, m2 / z - mu * mu, z


def draw_many(spec, rng, n):
    return np.array([sample_truncated_normal(spec, rng) for _ in range(n)])


class TestSampleTruncatedNormal:
    def test_untruncated_reduces_to_normal(self, rng):
        spec = TruncatedNormalSpec(mean=0.0, sd=1.0)
        draws = draw_many(spec, rng, 1_000_000)
        assert abs(draws.mean()) < 4e-3
        assert abs(draws.std() - 1.0) < 4e-3

    def test_half_normal_mean(self, rng):
        spec = TruncatedNormalSpec(mean=0.0, sd=1.0, lower=0.0)
        draws = draw_many(spec, rng, 1_000_000)
        assert abs(draws.mean() - math.sqrt(2.0 / math.pi)) < 4e-3

    def test_extreme_truncation_mean_matches_quadrature(self, rng):
        # bound sits 8 sd above the mean; oracle via high-precision quadrature
        spec = TruncatedNormalSpec(mean=-8.0, sd=1.0, lower=0.0)
        with mpmath.workdps(40):
            z = mpmath.ncdf(-8)
            m1 = mpmath.quad(lambda t: t * mpmath.npdf(t, -8, 1), [0, 4]) / z
        draws = draw_many(spec, rng, 200_000)
        # sd of this distribution is ~0.12; 5 standard errors
        assert abs(draws.mean() - float(m1)) < 5 * 0.125 / math.sqrt(200_000)

    def test_bounds_always_strict(self, rng):
        specs = [
            TruncatedNormalSpec(0.0, 1.0, lower=0.0),
            TruncatedNormalSpec(-8.0, 1.0, lower=0.0),
            TruncatedNormalSpec(3.0, 0.5, lower=2.9, upper=3.0),
            TruncatedNormalSpec(0.0, 1.0, lower=5.0, upper=5.5),
            TruncatedNormalSpec(0.0, 1.0, lower=-6.0, upper=-5.8),
            TruncatedNormalSpec(0.0, 1.0, upper=0.0),
        ]
        for spec in specs:
            for _ in range(2000):
                x = sample_truncated_normal(spec, rng)
                assert spec.lower < x < spec.upper

    @pytest.mark.parametrize(
        "spec",
        [
            TruncatedNormalSpec(0.0, 1.0, lower=0.0),
            TruncatedNormalSpec(1.3, 2.0, lower=-1.0, upper=4.0),
            TruncatedNormalSpec(-8.0, 1.0, lower=0.0),
            TruncatedNormalSpec(0.0, 1.0, lower=4.5, upper=6.0),
            TruncatedNormalSpec(2.0, 0.7, upper=1.0),
        ],
    )
    def test_ks_against_quadrature_cdf(self, spec, rng):
        # quadrature CDF on a fine standardized grid, independent of the sampler
        a = (spec.lower - spec.mean) / spec.sd
        b = (spec.upper - spec.mean) / spec.sd
        lo = max(a, -14.0)
        hi = min(b, max(lo + 14.0, 14.0))
        grid = np.linspace(lo, hi, 200_001)
        dens = np.exp(-0.5 * grid * grid)
        cdf = integrate.cumulative_trapezoid(dens, grid, initial=0.0)
        cdf /= cdf[-1]

        def cdf_callable(x):
            z = (np.asarray(x) - spec.mean) / spec.sd
            return np.interp(z, grid, cdf)

        draws = draw_many(spec, rng, 30_000)
        result = stats.kstest(draws, cdf_callable)
        assert result.pvalue > 1e-3

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            TruncatedNormalSpec(0.0, 0.0)
        with pytest.raises(ValueError):
            TruncatedNormalSpec(0.0, 1.0, lower=2.0, upper=1.0)


class TestTruncatedNormalMoments:
    def test_half_interval_log_normalizer(self):
        _, _, log_z = truncated_normal_moments(TruncatedNormalSpec(0.0, 1.0, lower=0.0))
        assert log_z == pytest.approx(math.log(0.5), abs=1e-14)

    def test_base_measure_normalizer(self):
        _, _, log_z = truncated_normal_moments(
            TruncatedNormalSpec(0.5, 0.25, lower=0.0)
        )
        with mpmath.workdps(30):
            oracle = float(mpmath.log(mpmath.ncdf(2)))
        assert log_z == pytest.approx(oracle, abs=1e-12)

    def test_far_tail_log_normalizer_vs_mpmath(self):
        _, _, log_z = truncated_normal_moments(
            TruncatedNormalSpec(-30.0, 1.0, lower=0.0)
        )
        with mpmath.workdps(60):
            oracle = float(mpmath.log(mpmath.ncdf(-30)))
        assert log_z == pytest.approx(oracle, rel=1e-8)

    def test_finite_out_to_forty_sd(self):
        mean, var, log_z = truncated_normal_moments(
            TruncatedNormalSpec(-40.0, 1.0, lower=0.0)
        )
        assert math.isfinite(log_z) and math.isfinite(mean) and math.isfinite(var)
        assert var > 0

    @pytest.mark.parametrize(
        "spec",
        [
            TruncatedNormalSpec(0.0, 1.0, lower=0.0),
            TruncatedNormalSpec(0.5, 0.25, lower=0.0),
            TruncatedNormalSpec(1.0, 2.0, lower=-1.0, upper=3.0),
            TruncatedNormalSpec(-2.0, 0.5, lower=0.0, upper=1.0),
            TruncatedNormalSpec(4.0, 1.5, upper=0.0),
        ],
    )
    def test_moments_match_quadrature(self, spec):
        mean, var, log_z = truncated_normal_moments(spec)
        q_mean, q_var, q_z = tn_moments_by_quadrature(
            spec.mean, spec.sd, spec.lower, spec.upper
        )
        assert mean == pytest.approx(q_mean, rel=1e-8, abs=1e-10)
        assert var == pytest.approx(q_var, rel=1e-6, abs=1e-10)
        assert log_z == pytest.approx(math.log(q_z), rel=1e-8, abs=1e-10)


class TestSampleTruncatedMvn:
    def test_one_dimensional_matches_univariate_distribution(self, rng):
        # 1-d with no bound is a plain normal conditional
        draws = np.array(
            [
                sample_truncated_mvn([1.0], [[4.0]], [-math.inf], rng)[0]
                for _ in range(50_000)
            ]
        )
        result = stats.kstest(draws, lambda x: stats.norm.cdf(x, 1.0, 0.5))
        assert result.pvalue > 1e-3

    def test_diagonal_precision_matches_quadrature_moments(self, rng):
        prec = np.diag([1.0, 4.0])
        mean = np.array([0.3, -0.2])
        draws = np.empty((60_000, 2))
        current = np.array([0.5, 0.5])
        for i in range(draws.shape[0]):
            current = sample_truncated_mvn(mean, prec, [0.0, 0.0], rng, start=current)
            draws[i] = current
        for j, sd in enumerate([1.0, 0.5]):
            q_mean, _, _ = tn_moments_by_quadrature(mean[j], sd, 0.0, math.inf)
            assert abs(draws[:, j].mean() - q_mean) < 5e-3

    def test_correlated_case_matches_tensor_quadrature(self, rng):
        # 2-d, correlation 0.5, both coordinates bounded below at zero
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        prec = np.linalg.inv(cov)
        mean = np.array([0.4, 0.1])
        grid = np.linspace(0.0, 6.0, 401)
        xx, yy = np.meshgrid(grid, grid, indexing="ij")
        dx = np.stack([xx - mean[0], yy - mean[1]])
        quad_form = (
            prec[0, 0] * dx[0] ** 2 + 2 * prec[0, 1] * dx[0] * dx[1] + prec[1, 1] * dx[1] ** 2
        )
        dens = np.exp(-0.5 * quad_form)
        z = np.trapezoid(np.trapezoid(dens, grid, axis=1), grid)
        ex = np.trapezoid(np.trapezoid(dens * xx, grid, axis=1), grid) / z
        ey = np.trapezoid(np.trapezoid(dens * yy, grid, axis=1), grid) / z

        n_draws = 600_000
        draws = np.empty((n_draws, 2))
        current = np.array([0.5, 0.5])
        for i in range(n_draws):
            current = sample_truncated_mvn(mean, prec, [0.0, 0.0], rng, start=current)
            draws[i] = current
        assert abs(draws[:, 0].mean() - ex) < 5e-3
        assert abs(draws[:, 1].mean() - ey) < 5e-3
        assert draws.min() > 0.0

    def test_rejects_non_positive_definite(self, rng):
        with pytest.raises(ValueError, match="positive definite"):
            sample_truncated_mvn([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]], [0.0, 0.0], rng)

    def test_intercept_coordinate_unbounded(self, rng):
        prec = np.diag([1.0, 1.0])
        seen_negative = False
        current = np.array([0.0, 1.0])
        for _ in range(2000):
            current = sample_truncated_mvn(
                [0.0, 0.5], prec, [-math.inf, 0.0], rng, start=current
            )
            seen_negative |= current[0] < 0
            assert current[1] > 0
        assert seen_negative


class TestSampleGamma:
    @pytest.mark.parametrize("shape,rate", [(1.0, 1.0), (2.0, 4.0), (0.1, 0.1)])
    def test_empirical_mean(self, shape, rate, rng):
        draws = np.array([sample_gamma(shape, rate, rng) for _ in range(200_000)])
        se = math.sqrt(shape / rate**2 / draws.size)
        assert abs(draws.mean() - shape / rate) < 5 * se

    def test_rejects_nonpositive(self, rng):
        with pytest.raises(ValueError):
            sample_gamma(0.0, 1.0, rng)
        with pytest.raises(ValueError):
            sample_gamma(1.0, -1.0, rng)
