"""Truncation toolkit: exact piecewise values, knot continuity, the
single-vs-nested quadrature agreement, and small-scale versions of the
lattice inequalities (the full lattice runs in the acceptance suite)."""

import numpy as np
import pytest

from memflow import regularization as reg
from memflow import statistics as stats
from memflow.fixtures import load_truncation_constants


class TestTruncations:
    def test_clamp(self):
        assert reg.trunc_T(3.0, -1.0) == 0.0
        assert reg.trunc_T(3.0, 2.0) == 2.0
        assert reg.trunc_T(3.0, 10.0) == 3.0

    def test_clamp_vector(self):
        out = reg.trunc_T(1.0, np.array([-2.0, 0.5, 7.0]))
        assert out == pytest.approx([0.0, 0.5, 1.0])

    def test_clamp_domain(self):
        with pytest.raises(ValueError):
            reg.trunc_T(0.0, 1.0)

    def test_s_k1_nonpositive_branch(self):
        assert reg.s_k1(4, -1.0) == 1.0
        assert reg.s_k1(4, 0.0) == 1.0

    def test_s_k1_continuity_at_zero(self):
        # z g'(z) -> 1 as z -> 0+, matching the constant branch
        assert reg.s_k1(4, 1e-9) == pytest.approx(1.0, rel=1e-6)

    def test_s_k1_continuity_at_k(self):
        k = 3
        below = reg.s_k1(k, k - 1e-10)
        above = reg.s_k1(k, k + 1e-10)
        assert below == pytest.approx(above, rel=1e-6)

    def test_s_k2_values(self):
        assert reg.s_k2(4, 0.5) == pytest.approx(2.0, rel=1e-14)
        assert reg.s_k2(2, 0.999) == pytest.approx(3.0, abs=1e-14)
        assert reg.s_k2(5, -0.3) == 1.0

    def test_positive_and_bounded(self):
        z = np.linspace(-5.0, 50.0, 300)
        for k in (1, 3, 10):
            v1 = reg.s_k1(k, z)
            v2 = reg.s_k2(k, z)
            assert np.all(v1 > 0.0) and np.all(np.isfinite(v1))
            assert np.all(v2 > 0.0) and np.all(v2 <= 1.0 + k)


class TestCappedLog:
    def test_at_zero(self):
        assert reg.L_k(4, 0.0) == 0.0

    def test_knot_continuity(self):
        # both branches give log 5 at s = 4/5 for k = 4
        assert reg.L_k(4, 0.8) == pytest.approx(np.log(5.0), rel=1e-14)
        eps = 1e-12
        assert reg.L_k(4, 0.8 + eps) == pytest.approx(np.log(5.0), abs=1e-10)

    def test_linear_branch(self):
        assert reg.L_k(4, 0.9) == pytest.approx(5 * 0.9 - 4 + np.log(5.0),
                                                rel=1e-14)

    def test_domain(self):
        with pytest.raises(ValueError):
            reg.L_k(4, 1.0)
        with pytest.raises(ValueError):
            reg.L_k(4, -0.1)

    def test_monotone_in_k_and_limit(self):
        s = np.linspace(0.0, 1.0 - 1e-9, 500)
        prev = reg.L_k(1, s)
        for k in (2, 3, 5, 10):
            cur = reg.L_k(k, s)
            assert np.all(cur >= prev - 1e-14)
            prev = cur
        smax = 0.95
        sc = np.linspace(0.0, smax, 100)
        assert np.max(np.abs(reg.L_k(10 ** 7, sc) + np.log1p(-sc))) < 1e-6


class TestLevel:
    def test_validation(self):
        with pytest.raises(ValueError):
            reg.TruncationLevel(0, 0.0)
        with pytest.raises(ValueError):
            reg.TruncationLevel(1, stats.F12_ZERO)
        with pytest.raises(ValueError):
            reg.TruncationLevel(1, -0.1)
        assert reg.TruncationLevel(3).knee == pytest.approx(0.75)


class TestRegularizedFunctionals:
    def test_G_empty_interval(self):
        for lev in (reg.TruncationLevel(1, 0.1), reg.TruncationLevel(10, 0.0)):
            assert reg.G_k_delta(lev, stats.F12_ZERO) == 0.0

    def test_G_matches_nested_oracle(self):
        for lev, s in ((reg.TruncationLevel(2, 0.1), 5.0),
                       (reg.TruncationLevel(5, 0.0), 0.3),
                       (reg.TruncationLevel(1, 0.5), 20.0)):
            a = reg.G_k_delta(lev, s)
            b = reg.G_k_delta_nested(lev, s)
            assert a == pytest.approx(b, rel=1e-6, abs=1e-9)

    def test_H_matches_nested_oracle(self):
        for lev, s in ((reg.TruncationLevel(2, 0.1), 0.9),
                       (reg.TruncationLevel(5, 0.0), 0.2)):
            a = reg.H_k_delta(lev, s)
            b = reg.H_k_delta_nested(lev, s)
            assert a == pytest.approx(b, rel=1e-6, abs=1e-9)

    def test_G_reduces_to_plain_G_below_truncation(self):
        # with delta = 0 and s <= k the weight is exactly g', so the
        # regularized functional equals the plain anti-derivative energy
        lev = reg.TruncationLevel(50, 0.0)
        for s in (0.2, 1.0, 10.0):
            assert reg.G_k_delta(lev, s) == pytest.approx(
                stats.antideriv_G(s), rel=1e-8, abs=1e-10), s

    def test_G_convex_and_monotone_beyond_reference(self):
        lev = reg.TruncationLevel(5, 0.1)
        s = np.linspace(stats.F12_ZERO, 20.0, 12)
        vals = reg.G_k_delta(lev, s)
        assert np.all(np.diff(vals) > 0.0)

    def test_lemma_2_4_sample(self):
        c = load_truncation_constants()["c_trunc53"]
        lev = reg.TruncationLevel(10, 0.1)
        s = 5.0
        val = reg.G_k_delta(lev, s)
        assert reg.trunc_T(10, s) ** (5.0 / 3.0) <= c * (1.0 + val)

    def test_H_domain(self):
        with pytest.raises(ValueError):
            reg.H_k_delta(reg.TruncationLevel(2, 0.0), 1.0)
        # positive delta admits arguments beyond saturation
        assert np.isfinite(reg.H_k_delta(reg.TruncationLevel(2, 0.1), 1.5))

    def test_h_tilde_matches_untruncated_below_knee(self):
        lev = reg.TruncationLevel(10 ** 6, 0.0)
        assert reg.h_tilde_k_delta(lev, 0.5) == pytest.approx(0.0, abs=1e-12)
        assert reg.h_tilde_k_delta(lev, 0.9) == pytest.approx(
            stats.h_tilde(0.9), rel=1e-12)

    def test_h_tilde_closed_form_vs_quadrature(self):
        # the delta > 0 route is a direct quadrature of the same integrand;
        # shrinking delta converges to the closed form
        lev0 = reg.TruncationLevel(3, 0.0)
        val0 = reg.h_tilde_k_delta(lev0, 0.9)
        prev = None
        for d in (1e-4, 1e-6, 1e-8):
            v = reg.h_tilde_k_delta(reg.TruncationLevel(3, d), 0.9)
            if prev is not None:
                assert abs(v - val0) < abs(prev - val0)
            prev = v
        assert prev == pytest.approx(val0, rel=1e-3)

    def test_h_tilde_prime_bounds(self):
        s = np.linspace(1e-4, 1.0 - 1e-4, 200)
        for k in (1, 4, 20):
            lev = reg.TruncationLevel(k, 0.0)
            hp = reg.h_tilde_k_delta_prime(lev, s)
            assert np.all(hp >= np.maximum(s ** -0.5, 1.0) * (1.0 - 1e-12))

    def test_g_tilde_positive_and_increasing(self):
        lev = reg.TruncationLevel(5, 0.0)
        s = np.array([0.1, 0.5, 2.0, 10.0])
        gt = reg.g_tilde_k_delta(lev, s)
        assert np.all(gt > 0.0)
        assert np.all(np.diff(gt) > 0.0)

    def test_consistency_limits(self):
        # capped coefficients converge pointwise to z g'(z) and z h'(z)
        z = np.logspace(-2, 1, 30)
        big = reg.s_k1(10 ** 6, z)
        assert big == pytest.approx(z * stats.g_prime(z), rel=1e-10)
        zh = np.linspace(0.05, 0.95, 30)
        bigh = reg.s_k2(10 ** 9, zh)
        assert bigh == pytest.approx(zh * stats.blakemore_h_prime(zh),
                                     rel=1e-10)

    def test_second_derivative_dominates_gprime(self):
        for k in (1, 5):
            lev = reg.TruncationLevel(k, 0.0)
            for s in (0.3, 2.0, 8.0):
                gpp = reg.G_k_delta_second_fd(lev, s, h=1e-4)
                assert stats.g_prime(s) <= gpp * (1.0 + 1e-6) + 1e-9

    def test_second_fd_equals_prime_difference(self):
        # the stable evaluation is literally the central difference of the
        # first-derivative function
        lev = reg.TruncationLevel(3, 0.05)
        s, h = 1.7, 1e-3
        direct = (reg.G_k_delta_prime(lev, s + h)
                  - reg.G_k_delta_prime(lev, s - h)) / (2 * h)
        assert reg.G_k_delta_second_fd(lev, s, h=h) == pytest.approx(
            direct, rel=1e-8)
