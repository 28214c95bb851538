"""Logarithmic potential, convex split, regularization branches."""

import math
import warnings

import numpy as np
import pytest

import anisochill as ac
from anisochill.errors import ConfigError
from anisochill.potential import (
    coercivity_constant,
    f0_lambda,
    f0_prime,
    f0_second,
    f_lambda,
    f_value,
    g_lambda,
    g_lambda_prime,
    lipschitz_bound,
)

SPEC = ac.PotentialSpec(theta=1.0, theta_c=2.0, lam=1e-2)


class TestDoubleWell:
    def test_zero_at_origin(self):
        assert f_value(SPEC, 0.0) == 0.0

    def test_endpoint_limit(self):
        # 0 log 0 = 0: f(1) = theta log 2 - theta_c / 2
        want = SPEC.theta * math.log(2.0) - SPEC.theta_c / 2.0
        assert f_value(SPEC, 1.0) == pytest.approx(want, rel=1e-14)
        assert f_value(SPEC, -1.0) == pytest.approx(want, rel=1e-14)

    def test_even(self):
        rng = np.random.default_rng(0)
        s = rng.uniform(-1, 1, 64)
        assert np.allclose(f_value(SPEC, s), f_value(SPEC, -s), rtol=0, atol=1e-15)

    def test_domain_error(self):
        with pytest.raises(ConfigError):
            f_value(SPEC, 1.5)

    def test_reversed_temperatures_warn(self):
        with warnings.catch_warnings(record=True) as log:
            warnings.simplefilter("always")
            ac.PotentialSpec(theta=3.0, theta_c=2.0, lam=1e-2)
        assert any("convex" in str(w.message) for w in log)

    def test_lambda_range_validated(self):
        with pytest.raises(ConfigError):
            ac.PotentialSpec(theta=1.0, theta_c=2.0, lam=1.5)


class TestConvexPartDerivative:
    def test_odd_and_zero_at_origin(self):
        assert f0_prime(SPEC, 0.0) == 0.0
        rng = np.random.default_rng(1)
        s = rng.uniform(-0.99, 0.99, 64)
        assert np.allclose(f0_prime(SPEC, s), -np.asarray(f0_prime(SPEC, -s)),
                           rtol=1e-14, atol=1e-14)

    @pytest.mark.parametrize("s0", [0.5, -0.5])
    def test_matches_central_difference_of_split(self, s0):
        # oracle: d/ds [f + theta_c s^2/2] by central differences
        d = 1e-6
        fd = ((f_value(SPEC, s0 + d) + SPEC.theta_c * (s0 + d) ** 2 / 2)
              - (f_value(SPEC, s0 - d) + SPEC.theta_c * (s0 - d) ** 2 / 2)) / (2 * d)
        assert f0_prime(SPEC, s0) == pytest.approx(fd, abs=2e-6)

    def test_log_divergence_monotone(self):
        ss = [0.9, 0.99, 0.999]
        vals = [f0_prime(SPEC, s) for s in ss]
        assert vals[0] > 0
        assert all(b > a for a, b in zip(vals[:-1], vals[1:]))

    def test_domain(self):
        with pytest.raises(ConfigError):
            f0_prime(SPEC, 1.0)

    def test_inf_fpp_convention(self):
        alt = ac.PotentialSpec(theta=1.0, theta_c=2.0, lam=1e-2,
                               kappa_convention="inf_fpp")
        assert alt.kappa == pytest.approx(1.0)
        # convex part still has nonnegative curvature
        s = np.linspace(-0.95, 0.95, 41)
        assert np.all(np.asarray(f0_second(alt, s)) >= -1e-13)


class TestRegularizedDerivative:
    def test_middle_branch_is_exact(self):
        s = np.linspace(-0.9, 0.9, 13)
        assert np.array_equal(g_lambda(SPEC, s), np.asarray(f0_prime(SPEC, s)))

    def test_continuity_at_branch_points(self):
        a = 1.0 - SPEC.lam
        for s0 in (a, -a):
            below = g_lambda(SPEC, s0 - 1e-13)
            above = g_lambda(SPEC, s0 + 1e-13)
            assert above == pytest.approx(below, abs=1e-9)

    def test_odd(self):
        rng = np.random.default_rng(2)
        s = rng.uniform(-3, 3, 256)
        assert np.allclose(g_lambda(SPEC, s), -g_lambda(SPEC, -s),
                           rtol=1e-14, atol=1e-14)

    def test_monotone_and_lipschitz_sampled(self):
        rng = np.random.default_rng(3)
        s = np.sort(rng.uniform(-3, 3, 10_000))
        g = g_lambda(SPEC, s)
        assert np.all(np.diff(g) >= -1e-12)
        bound = lipschitz_bound(SPEC)
        quot = np.abs(np.diff(g)) / np.maximum(np.diff(s), 1e-300)
        assert np.all(quot <= bound * (1 + 1e-9))

    def test_pointwise_limit_to_f0_prime(self):
        s0 = 0.95
        errs = []
        for lam in (1e-1, 1e-2, 1e-3):
            spec = ac.PotentialSpec(theta=1.0, theta_c=2.0, lam=lam)
            errs.append(abs(g_lambda(spec, s0) - f0_prime(spec, s0)))
        assert all(b <= a for a, b in zip(errs[:-1], errs[1:]))
        assert errs[-1] == 0.0


class TestRegularizedPotential:
    def test_zero_at_origin(self):
        assert f0_lambda(SPEC, 0.0) == 0.0

    def test_equals_convex_part_inside(self):
        s = np.linspace(-(1 - SPEC.lam), 1 - SPEC.lam, 21)
        f0_vals = np.asarray(f_value(SPEC, s)) + SPEC.theta_c * s**2 / 2
        assert np.allclose(f0_lambda(SPEC, s), f0_vals, rtol=0, atol=1e-15)

    def test_midpoint_convexity_sampled(self):
        rng = np.random.default_rng(4)
        a = rng.uniform(-3, 3, 4096)
        b = rng.uniform(-3, 3, 4096)
        mid = f0_lambda(SPEC, (a + b) / 2)
        avg = (np.asarray(f0_lambda(SPEC, a)) + np.asarray(f0_lambda(SPEC, b))) / 2
        assert np.all(mid <= avg + 1e-12)

    def test_coercivity_on_range(self):
        c_lam = coercivity_constant(SPEC, bound=3.0)
        s = np.linspace(-3, 3, 2001)
        lhs = np.asarray(f0_lambda(SPEC, s))
        rhs = s**2 / (2 * SPEC.lam) - c_lam
        assert np.all(lhs >= rhs - 1e-10)

    def test_constant_field_energy_matches_density(self, line64):
        s0 = 0.5
        c = ac.ScalarField.constant(line64, s0)
        want = f_value(SPEC, s0) * line64.volume
        assert ac.f_lambda_energy(SPEC, c) == pytest.approx(want, rel=1e-14)

    def test_sharper_lambda_penalizes_overshoot_cells(self):
        rng = np.random.default_rng(5)
        s = rng.uniform(1.05, 2.5, 256)          # overshoot region only
        tight = ac.PotentialSpec(theta=1.0, theta_c=2.0, lam=5e-3)
        assert np.all(np.asarray(f_lambda(tight, s))
                      >= np.asarray(f_lambda(SPEC, s)) - 1e-12)

    def test_slope_matches_g_lambda(self):
        # antiderivative check by central differences across all branches
        for s0 in (-2.0, -0.5, 0.3, 0.992, 1.7):
            d = 1e-7
            fd = (f0_lambda(SPEC, s0 + d) - f0_lambda(SPEC, s0 - d)) / (2 * d)
            assert fd == pytest.approx(g_lambda(SPEC, s0), rel=1e-6, abs=1e-6)

    def test_prime_of_regularized_is_positive_slope(self):
        s = np.linspace(-2, 2, 101)
        assert np.all(np.asarray(g_lambda_prime(SPEC, s)) > 0)
