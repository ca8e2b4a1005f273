import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.special import ndtr

from mixlab import (
    ConcaveRate,
    DomainError,
    IntegratorConfig,
    LinearRate,
    ModeSpec,
    MultiModalData,
    OUProcess,
    RadialProfile,
    SphericalMeasure,
    StructuralError,
    SubspaceProjector,
    TemperedLangevin,
    apply_generator,
    check_compatibility,
    check_generator_bound,
    check_growth_envelope,
    gaussian_kl,
    mixing_horizons,
    ou_tv_upper_bound,
    tv_lower_bound,
)


def fd_generator(process, proj, x, h_rel=1e-4):
    """Centered-difference oracle for <b, grad H> + 0.5 Tr(a Hess H)."""
    x = np.asarray(x, dtype=float)
    d = x.size
    h = h_rel * (1.0 + np.linalg.norm(x))
    b = np.atleast_2d(process.drift(x[None, :]))[0]
    adiag = np.asarray(process.dispersion_diag(x[None, :]))[0]
    hx = float(proj.lyapunov(x[None, :])[0])
    val = 0.0
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        hp = float(proj.lyapunov((x + e)[None, :])[0])
        hm = float(proj.lyapunov((x - e)[None, :])[0])
        val += b[i] * (hp - hm) / (2 * h)
        val += 0.5 * adiag[i] * (hp - 2 * hx + hm) / (h * h)
    return val


def single_mode_spec(d=16, R=50.0, delta=0.02, eps=0.05, b_rho=0.5, **kw):
    center = np.zeros(d)
    center[0] = R * (1 + delta)
    return MultiModalData(d, R, delta, eps, modes=(ModeSpec(center, delta * R, b_rho),), **kw)


class TestLinearRate:
    def test_growth_time(self):
        rate = LinearRate(1.0)
        assert rate.growth_time(1.0, math.e) == pytest.approx(1.0, abs=1e-15)
        assert rate.growth_time(0.3, 0.3) == 0.0
        with pytest.raises(DomainError):
            rate.growth_time(0.0, 1.0)
        with pytest.raises(DomainError):
            rate.growth_time(2.0, 1.0)

    def test_grow(self):
        rate = LinearRate(1.0)
        assert rate.grow(0.5, math.log(2.0)) == pytest.approx(1.0, abs=1e-15)
        assert rate.grow(0.37, 0.0) == 0.37
        with pytest.raises(DomainError):
            rate.grow(-1.0, 1.0)

    def test_threshold(self):
        rate = LinearRate(1.0)
        assert rate.threshold_level(2.0, math.log(2.0)) == pytest.approx(0.25, abs=1e-15)
        assert rate.threshold_level(1.0, 0.0) == 1.0
        # at the lower-bound horizon the level is exactly 2/R
        mu, R, r_k = 0.7, 120.0, 4.2
        t_low = math.log(R / (2 * r_k)) / mu
        assert LinearRate(mu).threshold_level(r_k, t_low) == pytest.approx(2.0 / R, rel=1e-12)
        with pytest.raises(DomainError):
            rate.threshold_level(0.5, 1.0)

    def test_round_trip(self):
        rate = LinearRate(1.7)
        rng = np.random.default_rng(0)
        for _ in range(1000):
            u = float(rng.uniform(1e-4, 1.0))
            y = float(rng.uniform(0.0, 5.0))
            assert abs(rate.growth_time(u, rate.grow(u, y)) - y) <= 1e-12

    def test_inverse_pair(self):
        rate = LinearRate(0.9)
        rng = np.random.default_rng(1)
        for _ in range(200):
            r = float(rng.uniform(1.0, 50.0))
            t = float(rng.uniform(0.0, 6.0))
            c = rate.threshold_level(r, t)
            assert rate.grow(c, t) * r == pytest.approx(1.0, rel=1e-10)

    def test_monotonicity(self):
        rate = LinearRate(1.0)
        us = np.linspace(0.01, 1.0, 30)
        assert np.all(np.diff(rate.grow(us, 1.0)) > 0)
        ys = np.linspace(0.0, 4.0, 30)
        vals = [rate.grow(0.5, y) for y in ys]
        assert np.all(np.diff(vals) > 0)


class TestConcaveRate:
    def setup_method(self):
        self.rate = ConcaveRate(math.sqrt)

    def test_against_closed_form(self):
        # integral of 1/sqrt(s) has antiderivative 2 sqrt(s)
        assert self.rate.growth_time(1.0, 4.0) == pytest.approx(2.0, abs=1e-8)
        assert self.rate.grow(1.0, 2.0) == pytest.approx(4.0, rel=1e-8)
        assert self.rate.grow(0.7, 0.0) == 0.7

    def test_round_trip(self):
        rng = np.random.default_rng(2)
        for _ in range(300):
            u = float(rng.uniform(1e-3, 1.0))
            y = float(rng.uniform(0.0, 4.0))
            v = self.rate.grow(u, y)
            oracle = 2.0 * (math.sqrt(v) - math.sqrt(u))
            assert abs(oracle - y) <= 1e-8

    def test_threshold_closed_form(self):
        # growth_time(C, 1/r) = t gives C = (sqrt(1/r) - t/2)^2
        r, t = 2.0, 0.5
        expected = (math.sqrt(1.0 / r) - t / 2.0) ** 2
        assert self.rate.threshold_level(r, t) == pytest.approx(expected, rel=1e-8)
        assert self.rate.threshold_level(2.0, 0.0) == 0.5

    def test_threshold_floor_domain_error(self):
        # the envelope floor (t/2)^2 exceeds 1/r: no starting level works
        with pytest.raises(DomainError):
            self.rate.threshold_level(2.0, 2.0)

    def test_inverse_pair(self):
        for r, t in [(1.5, 0.2), (3.0, 0.6), (8.0, 0.1)]:
            c = self.rate.threshold_level(r, t)
            assert self.rate.grow(c, t) * r == pytest.approx(1.0, rel=1e-8)

    def test_validation_rejects_bad_rates(self):
        with pytest.raises(StructuralError):
            ConcaveRate(lambda s: s * s)  # convex
        with pytest.raises(StructuralError):
            ConcaveRate(lambda s: -1.0)  # negative
        with pytest.raises(StructuralError):
            ConcaveRate(lambda s: 1.0 / s)  # decreasing

    def test_finite_tail_domain_error_names_sup(self):
        # concave on the diagnostic grid but superlinear beyond it, so the
        # tail integral converges and large times leave the domain
        def sneaky(s):
            return math.sqrt(s) if s <= 1e4 else s * s / 1e6

        rate = ConcaveRate(sneaky, grid_range=(1e-6, 1e3))
        sup = 2.0 * (100.0 - 1.0) + 100.0  # int_1^1e4 + int_1e4^inf
        with pytest.raises(DomainError, match="domain"):
            rate.grow(1.0, sup + 10.0)

    def test_vector_grow(self):
        us = np.array([0.25, 1.0, 2.25])
        out = self.rate.grow(us, 1.0)
        expected = (np.sqrt(us) + 0.5) ** 2
        np.testing.assert_allclose(out, expected, rtol=1e-8)


class TestSubspaceProjector:
    def test_orthonormality_enforced(self):
        with pytest.raises(StructuralError):
            SubspaceProjector(np.eye(4)[:3] * 1.001)
        with pytest.raises(StructuralError):
            SubspaceProjector(np.eye(4)[:2])  # k < 3
        with pytest.raises(StructuralError):
            SubspaceProjector(np.ones((4, 3)))  # k > d

    def test_lyapunov_values(self):
        proj = SubspaceProjector(np.eye(5)[:3])
        assert proj.lyapunov(np.zeros((1, 5)))[0] == 1.0
        x = np.zeros((1, 5))
        x[0, 0] = 2.0
        assert proj.lyapunov(x)[0] == pytest.approx(1.0 / math.sqrt(5.0), rel=1e-14)
        x[0, 4] = 100.0  # orthogonal to the span: no effect
        assert proj.lyapunov(x)[0] == pytest.approx(1.0 / math.sqrt(5.0), rel=1e-14)

    def test_containing_direction(self):
        rng = np.random.default_rng(3)
        for d, k in [(5, 3), (16, 3), (8, 5)]:
            y1 = rng.standard_normal(d)
            proj = SubspaceProjector.containing_direction(y1, k)
            assert proj.basis.shape == (k, d)
            np.testing.assert_allclose(proj.basis[0], y1 / np.linalg.norm(y1), atol=1e-12)
            np.testing.assert_allclose(proj.basis @ proj.basis.T, np.eye(k), atol=1e-12)
        # standard basis direction works too
        proj = SubspaceProjector.containing_direction(np.eye(6)[2], 3)
        np.testing.assert_allclose(proj.basis[0], np.eye(6)[2], atol=1e-14)

    def test_deterministic(self):
        y1 = np.arange(1.0, 8.0)
        a = SubspaceProjector.containing_direction(y1, 4)
        b = SubspaceProjector.containing_direction(y1, 4)
        assert np.array_equal(a.basis, b.basis)


class TestGenerator:
    def test_orthogonal_point_value(self):
        # G = 0 there, so only the Hessian trace survives: -(1/2) sum <a y_j, y_j>
        ou = OUProcess(1.0, 5)
        proj = SubspaceProjector(np.eye(5)[:3])
        x = np.zeros(5)
        x[4] = 9.0
        assert apply_generator(ou, proj, x) == pytest.approx(-3.0, rel=1e-12)
        assert apply_generator(ou, proj, np.zeros(5)) == pytest.approx(-3.0, rel=1e-12)

    def test_ou_closed_form(self):
        # for OU: mu H^3 |G|^2 + H^3 (3 H^2 |G|^2 - k)
        mu, d, k = 1.3, 7, 3
        ou = OUProcess(mu, d)
        proj = SubspaceProjector.containing_direction(np.ones(d), k)
        rng = np.random.default_rng(4)
        x = 5.0 * rng.standard_normal((50, d))
        gsq = proj.proj_norm_sq(x)
        h = 1.0 / np.sqrt(1.0 + gsq)
        expected = mu * h**3 * gsq + h**3 * (3 * h * h * gsq - k)
        np.testing.assert_allclose(apply_generator(ou, proj, x), expected, rtol=1e-12)

    def test_finite_difference_match(self):
        d = 8
        proj = SubspaceProjector.containing_direction(np.ones(d), 3)
        processes = [
            OUProcess(1.0, d),
            TemperedLangevin(RadialProfile.power_tail(0.6, 1.0), 0.4, d),
        ]
        rng = np.random.default_rng(5)
        for proc in processes:
            for _ in range(20):
                x = 20.0 * rng.standard_normal(d)
                a = apply_generator(proc, proj, x)
                f = fd_generator(proc, proj, x)
                assert abs(a - f) <= 1e-4 * max(abs(a), 1e-12)

    def test_generator_bound_pass_and_fail(self):
        d = 16
        proj = SubspaceProjector.containing_direction(np.eye(d)[0], 3)
        ou = OUProcess(1.0, d)
        assert check_generator_bound(ou, proj, 1.0, 5000, 0, envelope_scale=50.0).passed
        tl = TemperedLangevin(RadialProfile.power_tail(0.6, 1.0), 0.4, d)
        assert check_generator_bound(tl, proj, 1.0, 5000, 1, envelope_scale=50.0).passed

        class DoubledOU:
            def __init__(self, mu, d):
                self.mu, self.d = mu, d

            def drift(self, x):
                return -2.0 * self.mu * np.asarray(x, dtype=float)

            def dispersion_diag(self, x):
                return np.full(np.atleast_2d(x).shape, 2.0)

        rep = check_generator_bound(DoubledOU(1.0, d), proj, 1.0, 5000, 2, envelope_scale=50.0)
        assert not rep.passed
        assert rep.max_excess > 0


class TestTVLowerBound:
    def setup_method(self):
        self.spec = single_mode_spec()
        self.mu = 1.0
        self.pi = OUProcess(self.mu, self.spec.d).invariant_measure()
        self.proj = SubspaceProjector.containing_direction(self.spec.mode_direction, 3)
        self.rate = LinearRate(self.mu)
        self.r_k = 3.217

    def test_identity_exact(self):
        rep = tv_lower_bound(self.pi, self.spec, self.proj, self.rate, self.r_k, 1.5, 20_000, 0)
        assert rep.total == rep.pi_term - rep.rho_tail_term - rep.integral_term
        assert 0.0 <= rep.pi_term <= 1.0
        assert 0.0 <= rep.rho_tail_term <= 1.0
        assert rep.integral_term >= 0.0

    def test_large_horizon_degenerates(self):
        rep = tv_lower_bound(self.pi, self.spec, self.proj, self.rate, self.r_k, 50.0, 20_000, 1)
        assert rep.rho_tail_term == 1.0
        assert rep.total <= 0.0

    def test_far_mode_configuration(self):
        t_low = math.log(self.spec.R / (2 * self.r_k)) / self.mu
        rep = tv_lower_bound(self.pi, self.spec, self.proj, self.rate, self.r_k, t_low, 50_000, 2)
        floor = (0.5 - 0.05) / 2.0
        assert rep.total >= floor - 3 * rep.total_se

    def test_stationary_start_is_null(self):
        rep = tv_lower_bound(self.pi, self.pi, self.proj, self.rate, self.r_k, 1.0, 50_000, 3)
        assert rep.total <= 3 * rep.total_se

    def test_monte_carlo_pi_term(self):
        # non-Gaussian noise goes through the sampled pi-term path
        tl_pi = SphericalMeasure(self.spec.d, RadialProfile.power_tail(1.0, 1.0))
        rep = tv_lower_bound(tl_pi, self.spec, self.proj, self.rate, 10.0, 0.5, 20_000, 4)
        assert rep.pi_se > 0
        assert rep.total == rep.pi_term - rep.rho_tail_term - rep.integral_term

    def test_dimension_mismatch(self):
        with pytest.raises(StructuralError):
            tv_lower_bound(SphericalMeasure(4, RadialProfile.quadratic(0.5)), self.spec,
                           self.proj, self.rate, 2.0, 1.0, 1000, 0)


class TestGrowthEnvelope:
    def test_zero_time_equality(self):
        d = 8
        ou = OUProcess(1.0, d)
        proj = SubspaceProjector.containing_direction(np.ones(d), 3)
        x = np.full(d, 3.0)
        rep = check_growth_envelope(ou, proj, LinearRate(1.0), x, 0.0, 1000, 0)
        assert rep.estimate == pytest.approx(rep.start_value, rel=1e-14)
        assert rep.bound == rep.start_value
        assert rep.passed

    def test_ou_far_start(self):
        d, R = 8, 100.0
        ou = OUProcess(1.0, d)
        proj = SubspaceProjector.containing_direction(np.eye(d)[0], 3)
        x = np.zeros(d)
        x[0] = R
        rep = check_growth_envelope(ou, proj, LinearRate(1.0), x, 1.0, 100_000, 1)
        assert rep.bound == pytest.approx(math.e * rep.start_value, rel=1e-12)
        assert rep.passed

    def test_tempered_with_integrator(self):
        d = 6
        tl = TemperedLangevin(RadialProfile.power_tail(0.6, 1.0), 0.4, d)
        proj = SubspaceProjector.containing_direction(np.eye(d)[0], 3)
        x = np.zeros(d)
        x[0] = 40.0
        rep = check_growth_envelope(tl, proj, LinearRate(1.0), x, 0.5, 50_000, 2,
                                    cfg=IntegratorConfig(0.005))
        assert rep.passed

    def test_callable_endpoint_hook(self):
        d = 5
        proj = SubspaceProjector.containing_direction(np.ones(d), 3)

        def sampler(x0, t, n, seed):
            return np.tile(x0, (n, 1))  # frozen process

        x = np.full(d, 2.0)
        rep = check_growth_envelope(sampler, proj, LinearRate(1.0), x, 0.7, 100, 0)
        assert rep.estimate == pytest.approx(rep.start_value, rel=1e-14)
        assert rep.passed


class TestGaussianKL:
    def test_identical_is_zero(self):
        m = np.array([1.0, -2.0])
        S = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert abs(gaussian_kl(m, S, m, S)) <= 1e-12

    def test_identity_covariance_reduction(self):
        m1 = np.array([0.7, -1.2, 0.4])
        val = gaussian_kl(m1, np.eye(3), np.zeros(3), np.eye(3))
        assert val == pytest.approx(0.5 * float(m1 @ m1), abs=1e-12)

    def test_nonnegative(self):
        rng = np.random.default_rng(6)
        for _ in range(50):
            a = rng.standard_normal((2, 2))
            b = rng.standard_normal((2, 2))
            s1 = a @ a.T + 0.2 * np.eye(2)
            s2 = b @ b.T + 0.2 * np.eye(2)
            assert gaussian_kl(rng.standard_normal(2), s1, rng.standard_normal(2), s2) >= 0.0

    def test_monte_carlo_cross_check(self):
        from scipy.stats import multivariate_normal

        rng = np.random.default_rng(7)
        for _ in range(3):
            a = rng.standard_normal((2, 2))
            b = rng.standard_normal((2, 2))
            s1 = a @ a.T + 0.3 * np.eye(2)
            s2 = b @ b.T + 0.3 * np.eye(2)
            m1 = rng.standard_normal(2) + 1.0
            m2 = rng.standard_normal(2)
            kl = gaussian_kl(m1, s1, m2, s2)
            x = multivariate_normal(m1, s1).rvs(size=200_000, random_state=123)
            ratio = multivariate_normal(m1, s1).logpdf(x) - multivariate_normal(m2, s2).logpdf(x)
            assert kl == pytest.approx(float(ratio.mean()), rel=0.05)

    def test_not_positive_definite(self):
        with pytest.raises(DomainError):
            gaussian_kl(np.zeros(2), -np.eye(2), np.zeros(2), np.eye(2))

    def test_shape_mismatch(self):
        with pytest.raises(StructuralError):
            gaussian_kl(np.zeros(2), np.eye(3), np.zeros(2), np.eye(2))


class TestOUUpperBound:
    def test_precondition(self):
        spec = single_mode_spec()
        with pytest.raises(DomainError):
            ou_tv_upper_bound(1.0, spec, 0.3)

    def test_long_horizon_limit(self):
        # compact mixture: the bound collapses to the (zero) outside mass
        spec = single_mode_spec(b_rho=1.0, bulk_scale=0.0)
        assert ou_tv_upper_bound(1.0, spec, 50.0) <= 1e-8

    def test_below_eps_at_mixing_horizon(self):
        spec = single_mode_spec()
        hz = mixing_horizons(1.0, spec.R, spec.delta, spec.eps, spec.d)
        assert ou_tv_upper_bound(1.0, spec, hz.t_mix) < spec.eps

    def test_dominates_exact_tv_in_1d(self):
        # 1D mixture: mode is the interval [10.0, 10.2]; the exact marginal
        # density has a closed form through the Gaussian CDF, and the exact
        # TV against N(0,1) comes from quadrature
        R, delta = 10.0, 0.01
        spec = MultiModalData(
            1, R, delta, 0.05,
            modes=(ModeSpec(np.array([R * (1 + delta)]), delta * R, 1.0),),
            bulk_scale=0.0,
        )
        lo, hi = R * delta * R and 10.0, 10.2  # interval endpoints

        def exact_tv(t):
            decay = math.exp(-t)
            sigma = math.sqrt(1.0 - math.exp(-2.0 * t))
            width = (hi - lo) * decay

            def f(x):
                return (ndtr((x - lo * decay) / sigma) - ndtr((x - hi * decay) / sigma)) / width

            phi = lambda x: math.exp(-x * x / 2.0) / math.sqrt(2.0 * math.pi)
            val, _ = quad(lambda x: abs(f(x) - phi(x)), -12.0, 16.0, limit=400)
            return 0.5 * val

        for t in (0.5, 1.0, 1.5, 2.5, 4.0):
            assert ou_tv_upper_bound(1.0, spec, t) >= exact_tv(t) - 1e-9


class TestHorizons:
    def test_t_lower_formula(self):
        hz = mixing_horizons(1.0, 100.0, 0.01, 0.05, 16, r_k=5.0)
        assert hz.t_lower == pytest.approx(math.log(10.0), rel=1e-12)

    def test_onset_clamp(self):
        # sqrt(2 log(1/0.7)) < 1, so the max clamps to 1
        hz = mixing_horizons(1.0, math.e**2, 0.01, 0.7, 4)
        assert hz.t_onset == pytest.approx(2.0, rel=1e-12)

    def test_mix_simple_arithmetic(self):
        hz = mixing_horizons(1.0, 100.0, 0.01, 0.05, 4)
        expected = math.log(100.0) + math.log(1.02) + math.log(20.0)
        assert hz.t_mix_simple == pytest.approx(expected, rel=1e-12)

    def test_general_mix_formula(self):
        mu, R, delta, eps, d = 2.0, 50.0, 0.02, 0.1, 256
        hz = mixing_horizons(mu, R, delta, eps, d)
        expected = max(
            math.log(2 * d**0.25 / math.sqrt(eps)),
            math.log(2 * R * (1 + 2 * delta) * math.sqrt(mu) / eps),
        ) / mu
        assert hz.t_mix == pytest.approx(expected, rel=1e-12)

    def test_envelopes(self):
        hz = mixing_horizons(2.0, 100.0, 0.01, 0.05, 16, beta=0.3)
        assert hz.envelope_lower == pytest.approx(0.35 * math.log(100.0), rel=1e-12)
        assert hz.envelope_upper == pytest.approx(0.65 * math.log(100.0), rel=1e-12)

    def test_t_lower_unavailable(self):
        hz = mixing_horizons(1.0, 10.0, 0.01, 0.05, 4, r_k=6.0)
        assert hz.t_lower is None
        assert "R > 2 r_k" in hz.t_lower_note
        assert mixing_horizons(1.0, 10.0, 0.01, 0.05, 4).t_lower is None


class TestCompatibility:
    def test_failing_middle_check(self):
        rep = check_compatibility(1.0, 32.0, 0.01, 0.1, 10_000, 0.5, 2.0)
        by_name = {c.name: c for c in rep}
        assert by_name["mode-distance-vs-dimension"].passed
        assert not by_name["tolerance-vs-distance"].passed  # 32^0.5 < 20.4
        assert by_name["quantile-vs-distance"].passed

    def test_all_pass(self):
        rep = check_compatibility(1.0, 1e6, 0.01, 0.1, 100, 0.3, 3.0)
        assert rep.passed

    def test_boundary_quantile(self):
        R, beta = 100.0, 0.4
        r_k = R**beta / 2.0
        rep = check_compatibility(1.0, R, 0.01, 0.1, 100, beta, r_k)
        by_name = {c.name: c for c in rep}
        assert by_name["quantile-vs-distance"].passed
