import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn
from scipy.special import kolmogorov, ndtr, ndtri

from mixlab import (
    DomainError,
    OUProcess,
    RadialProfile,
    SphericalMeasure,
    StructuralError,
    chisq_cdf,
    empirical_tv_1d,
    gaussian_projection_mass,
    ks_statistic,
    ks_sweep,
    projected_tv_vs_gaussian,
)


class TestChiSquareCDF:
    def test_two_dof_closed_form(self):
        assert chisq_cdf(2, 2.0) == pytest.approx(1 - math.exp(-1.0), abs=1e-12)
        for x in (0.1, 1.0, 5.0):
            assert chisq_cdf(2, x) == pytest.approx(1 - math.exp(-x / 2), abs=1e-12)

    def test_zero(self):
        assert chisq_cdf(5, 0.0) == 0.0

    def test_quadrature_oracle(self):
        # density x^(k/2-1) e^(-x/2) / (2^(k/2) Gamma(k/2)) integrated to 3.5
        k = 3
        pdf = lambda x: x ** (k / 2 - 1) * math.exp(-x / 2) / (2 ** (k / 2) * gamma_fn(k / 2))
        oracle = quad(pdf, 0, 3.5, epsabs=1e-14, epsrel=1e-13)[0]
        assert chisq_cdf(k, 3.5) == pytest.approx(oracle, abs=1e-10)

    def test_is_a_cdf(self):
        xs = np.linspace(0, 80, 400)
        vals = chisq_cdf(7, xs)
        assert np.all(np.diff(vals) >= -1e-15)
        assert vals[0] == 0.0 and vals[-1] > 1 - 1e-12

    def test_domain(self):
        with pytest.raises(DomainError):
            chisq_cdf(3, -0.5)
        with pytest.raises(StructuralError):
            chisq_cdf(0, 1.0)


class TestGaussianProjectionMass:
    def test_limits(self):
        assert gaussian_projection_mass(3, 1.0 + 1e-12, 1.0) < 1e-9
        assert gaussian_projection_mass(3, 100.0, 1.0) > 1 - 1e-12
        with pytest.raises(DomainError):
            gaussian_projection_mass(3, 1.0, 1.0)

    def test_median_by_bisection(self):
        # chi2(3) median from the CDF oracle by bisection
        lo, hi = 0.0, 20.0
        for _ in range(80):
            mid = (lo + hi) / 2
            if chisq_cdf(3, mid) < 0.5:
                lo = mid
            else:
                hi = mid
        q = (lo + hi) / 2
        assert gaussian_projection_mass(3, math.sqrt(1 + q), 1.0) == pytest.approx(0.5, abs=1e-6)

    def test_monotonicity(self):
        rs = np.linspace(1.01, 6.0, 40)
        vals = [gaussian_projection_mass(3, r, 1.0) for r in rs]
        assert np.all(np.diff(vals) > 0)
        mus = np.linspace(0.2, 5.0, 40)
        vals = [gaussian_projection_mass(3, 2.0, mu) for mu in mus]
        assert np.all(np.diff(vals) > 0)

    def test_monte_carlo_cross_check(self):
        rng_cases = [(3, 2.0, 1.0), (3, 1.5, 2.0), (4, 2.5, 0.5), (5, 2.0, 1.0),
                     (3, 3.0, 0.7), (6, 1.8, 1.5), (3, 2.2, 3.0), (4, 1.7, 1.0),
                     (5, 2.8, 0.4), (3, 1.3, 5.0)]
        n = 200_000
        for i, (k, r, mu) in enumerate(rng_cases):
            pi = SphericalMeasure(k + 3, RadialProfile.quadratic(mu / 2.0))
            x = pi.sample(n, 100 + i)
            ind = 1.0 + np.sum(x[:, :k] ** 2, axis=1) <= r * r
            p_hat = ind.mean()
            se = math.sqrt(max(p_hat * (1 - p_hat), 1.0 / n) / n)
            assert abs(p_hat - gaussian_projection_mass(k, r, mu)) <= 3 * se


class TestKSStatistic:
    def test_exact_quantile_construction(self):
        n = 1000
        samples = ndtri((np.arange(1, n + 1) - 0.5) / n)
        res = ks_statistic(samples, ndtr)
        assert res.statistic == pytest.approx(1.0 / (2 * n), abs=1e-12)

    def test_point_mass_at_median(self):
        n = 10_000
        res = ks_statistic(np.zeros(n), ndtr)
        assert res.statistic == pytest.approx(0.5, abs=1e-12)
        assert res.p_value < 1e-10

    def test_p_value_against_series_oracle(self):
        # scipy's kolmogorov SF is the converged version of the 100-term series
        rng = np.random.default_rng(0)
        for n in (100, 10_000):
            x = rng.standard_normal(n)
            res = ks_statistic(x, ndtr)
            lam = math.sqrt(n) * res.statistic
            assert res.p_value == pytest.approx(float(kolmogorov(lam)), abs=1e-8)

    def test_null_calibration(self):
        # under the null the p-value is roughly uniform: p > 0.001 nearly always
        n, reps = 100_000, 200
        good = 0
        for seed in range(reps):
            rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
            res = ks_statistic(rng.standard_normal(n), ndtr)
            good += res.p_value > 0.001
        assert good >= 198

    def test_monotone_transform_invariance(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(5000)
        base = ks_statistic(x, ndtr)
        transformed = ks_statistic(np.exp(x), lambda y: ndtr(np.log(y)))
        assert transformed.statistic == pytest.approx(base.statistic, abs=1e-14)

    def test_errors(self):
        with pytest.raises(DomainError):
            ks_statistic([], ndtr)
        with pytest.raises(DomainError):
            ks_statistic([np.nan, 0.0], ndtr)


class TestEmpiricalTV:
    def test_identical_sequences(self):
        x = np.linspace(-3, 3, 1000)
        assert empirical_tv_1d(x, x.copy()).value == 0.0

    def test_null_bias_threshold(self):
        # calibrated once by simulation: default-bin bias at n=1e6 is ~0.009
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(42)))
        x = rng.standard_normal(1_000_000)
        assert empirical_tv_1d(x, ndtr).value <= 0.01

    def test_disjoint_supports(self):
        rng = np.random.default_rng(2)
        x = rng.standard_normal(20_000)
        res = empirical_tv_1d(x, lambda t: ndtr(t - 10.0), bin_range=(-5.0, 15.0))
        assert res.value >= 0.999

    def test_symmetry(self):
        rng = np.random.default_rng(3)
        a = rng.standard_normal(4000)
        b = rng.standard_normal(6000) + 0.3
        assert empirical_tv_1d(a, b).value == empirical_tv_1d(b, a).value

    def test_shift_invariance(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal(4000)
        b = rng.standard_normal(4000) + 0.2
        base = empirical_tv_1d(a, b, bins=50, bin_range=(-4.0, 4.5))
        shifted = empirical_tv_1d(a + 0.5, b + 0.5, bins=50, bin_range=(-3.5, 5.0))
        assert shifted.value == pytest.approx(base.value, abs=1e-9)

    def test_default_bins(self):
        a = np.linspace(0, 1, 400)
        b = np.linspace(0, 1, 900)
        assert empirical_tv_1d(a, b).bins == 20  # ceil(sqrt(min(400, 900)))

    def test_errors(self):
        with pytest.raises(DomainError):
            empirical_tv_1d([], ndtr)
        with pytest.raises(StructuralError):
            empirical_tv_1d([1.0, 2.0], [1.0], bins=1)
        with pytest.raises(StructuralError):
            empirical_tv_1d([1.0], [1.0], bin_range=(2.0, 1.0))


class TestProjectedTV:
    def test_stationary_samples_are_small(self):
        mu, d, n = 2.0, 4, 1_000_000
        pi = SphericalMeasure(d, RadialProfile.quadratic(mu / 2.0))
        x = pi.sample(n, 5)
        direction = np.zeros(d)
        direction[1] = 1.0
        assert projected_tv_vs_gaussian(x, direction, mu).value <= 0.01

    def test_far_point_mass(self):
        # point mass at distance 10 along the direction: essentially disjoint
        d, R = 3, 10.0
        direction = np.array([1.0, 0.0, 0.0])
        x = np.tile(direction * R, (20_000, 1))
        assert projected_tv_vs_gaussian(x, direction, 1.0).value >= 0.99

    def test_direction_invariance_for_spherical_samples(self):
        pi = SphericalMeasure(6, RadialProfile.quadratic(0.5))
        x = pi.sample(100_000, 6)
        e0 = np.eye(6)[0]
        other = np.ones(6) / math.sqrt(6)
        v1 = projected_tv_vs_gaussian(x, e0, 1.0).value
        v2 = projected_tv_vs_gaussian(x, other, 1.0).value
        assert abs(v1 - v2) <= 0.01

    def test_unit_direction_required(self):
        with pytest.raises(StructuralError):
            projected_tv_vs_gaussian(np.zeros((10, 2)), np.array([1.0, 1.0]), 1.0)


class TestKSSweep:
    def test_far_start_and_mixed_end(self):
        d, R, mu = 256, 100.0, 1.0
        ou = OUProcess(mu, d)
        x0 = R * np.ones(d) / math.sqrt(d)
        out = ks_sweep(ou, x0, mu, [0.0, 12.0], 3)
        assert out[0][1].statistic >= 0.3
        assert out[1][1].statistic <= 0.08

    def test_monotone_trend_small(self):
        d, R, mu = 256, 100.0, 1.0
        ou = OUProcess(mu, d)
        x0 = R * np.ones(d) / math.sqrt(d)
        times = [0.0, 2.0, 4.0, 9.0]
        firsts, lasts = [], []
        for seed in range(5):
            res = ks_sweep(ou, x0, mu, times, seed)
            firsts.append(res[0][1].statistic)
            lasts.append(res[-1][1].statistic)
        assert np.median(firsts) >= np.median(lasts)

    def test_standardize_flag(self):
        d = 128
        ou = OUProcess(1.0, d)
        x0 = 50.0 * np.ones(d) / math.sqrt(d)
        raw = ks_sweep(ou, x0, 1.0, [0.5], 4)[0][1]
        std = ks_sweep(ou, x0, 1.0, [0.5], 4, standardize=True)[0][1]
        # centring removes the residual mean shift, so the statistic drops
        assert std.statistic < raw.statistic

    def test_draw_from_mixture_start(self):
        from mixlab import ModeSpec, MultiModalData

        d = 128
        center = np.zeros(d)
        center[0] = 51.0
        spec = MultiModalData(d, 50.0, 0.02, 0.05, modes=(ModeSpec(center, 1.0, 1.0),))
        ou = OUProcess(1.0, d)
        out = ks_sweep(ou, spec, 1.0, [0.0, 10.0], 5)
        assert out[0][1].statistic > out[1][1].statistic
        # deterministic in the seed
        again = ks_sweep(ou, spec, 1.0, [0.0, 10.0], 5)
        assert again[0][1].statistic == out[0][1].statistic
