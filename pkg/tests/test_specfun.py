import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, special

from hypberg import specfun
from hypberg.errors import DomainError, NonConvergenceError, OverflowRangeError
from hypberg.specfun import HypParams32, SeriesTolerance


def brute_force_2f1(a, b, c, t, terms):
    """Independent oracle: plain partial sum, term recursion in numpy."""
    k = np.arange(terms, dtype=float)
    ratios = (a + k) * (b + k) / ((c + k) * (k + 1.0)) * t
    terms_arr = np.concatenate(([1.0], np.cumprod(ratios)))
    return float(terms_arr.sum())


def brute_force_3f2(a, b, c, u, v, t, terms, chunk=1_000_000):
    """Partial sum with up to 10^7 terms, chunked to bound memory."""
    total = 1.0
    term = 1.0
    k0 = 0
    while k0 < terms:
        k = np.arange(k0, min(k0 + chunk, terms), dtype=float)
        ratios = (a + k) * (b + k) * (c + k) / ((k + 1.0) * (u + k) * (v + k)) * t
        block = term * np.cumprod(ratios)
        total += float(block.sum())
        term = float(block[-1])
        k0 += chunk
        if term == 0.0:
            break
    return total


def bessel_k_integral_oracle(nu, t):
    """K_nu(t) = int_0^inf exp(-t cosh s) cosh(nu s) ds by adaptive quadrature."""
    s_max = math.acosh(745.0 / t) if t < 745.0 else 1.0
    val, _ = integrate.quad(
        lambda s: math.exp(-t * math.cosh(s)) * math.cosh(nu * s), 0.0, s_max, limit=200
    )
    return val


class TestPochhammer:
    def test_examples(self):
        assert specfun.pochhammer(3.0, 4) == 360.0
        assert specfun.pochhammer(1.7, 0) == 1.0
        assert specfun.pochhammer(-0.5, 3) == pytest.approx(-0.375, abs=0)

    @given(st.floats(-5, 5), st.integers(0, 8), st.integers(0, 8))
    @settings(max_examples=200, deadline=None)
    def test_additivity(self, a, j, k):
        # (a)_{j+k} = (a)_j (a+j)_k
        lhs = specfun.pochhammer(a, j + k)
        rhs = specfun.pochhammer(a, j) * specfun.pochhammer(a + j, k)
        assert lhs == pytest.approx(rhs, rel=1e-12, abs=1e-12)


class TestHyp2f1:
    def test_geometric_case(self):
        assert specfun.hyp2f1(1.0, 2.0, 2.0, 0.25) == pytest.approx(4.0 / 3.0, rel=1e-13)

    def test_empty_series(self):
        assert specfun.hyp2f1(0.7, -1.3, 2.2, 0.0) == 1.0

    def test_brute_force_oracle(self):
        expected = brute_force_2f1(1.5, 3.0, 2.5, 0.64, 1_000_000)
        assert specfun.hyp2f1(1.5, 3.0, 2.5, 0.64) == pytest.approx(expected, rel=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            specfun.hyp2f1(1.0, 1.0, -2.0, 0.3)
        with pytest.raises(DomainError):
            specfun.hyp2f1(1.0, 1.0, 2.0, 1.0)

    def test_nonconvergence(self):
        with pytest.raises(NonConvergenceError):
            specfun.hyp2f1(1.0, 2.0, 2.0, 0.999999, SeriesTolerance(1e-15, 16))

    @given(st.floats(0.1, 5.0), st.floats(0.0, 0.9))
    @settings(max_examples=100, deadline=None)
    def test_binomial_identity(self, b, x):
        # F[1, b, b, x] (1 - x) = 1
        val = specfun.hyp2f1(1.0, b, b, x)
        assert val * (1.0 - x) == pytest.approx(1.0, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_euler_transformation(self, n):
        # the two parameter triples the downstream identities rely on
        for (a, b, c) in ((1.0, 2.0 - n / 2.0, 1.0 + n / 2.0), (n / 2.0, float(n), (n + 2) / 2.0)):
            for x in np.linspace(0.0, 0.9, 10):
                lhs = specfun.hyp2f1(a, b, c, float(x))
                rhs = specfun.hyp2f1_via_euler(a, b, c, float(x))
                assert lhs == pytest.approx(rhs, rel=1e-10)

    @pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
    def test_derivative_identity(self, n):
        # d/ds F[n/2, n, (n+2)/2, s] = n((1-s)^-n - F)/(2s)
        a, b, c = n / 2.0, float(n), (n + 2) / 2.0
        h = 1e-5
        for s in np.linspace(0.05, 0.8, 12):
            s = float(s)
            fd = (specfun.hyp2f1(a, b, c, s + h) - specfun.hyp2f1(a, b, c, s - h)) / (2 * h)
            f_val = specfun.hyp2f1(a, b, c, s)
            rhs = n * ((1.0 - s) ** (-n) - f_val) / (2.0 * s)
            assert fd == pytest.approx(rhs, rel=1e-6, abs=1e-6 * abs(rhs))


class TestHyp3f2:
    def test_leading_term(self):
        p = HypParams32(0.3, 1.1, 0.7, 2.0, 2.5)
        assert specfun.hyp3f2(p, 0.0) == 1.0

    def test_at_one_brute_force(self):
        # the n = 3 weight parameters, summed to 10^7 terms independently;
        # terms decay like k^-3, so the tail rule needs a few 1e5 terms
        p = HypParams32(1.0, 1.0, 0.5, 2.0, 2.5)
        expected = brute_force_3f2(1.0, 1.0, 0.5, 2.0, 2.5, 1.0, 10_000_000)
        got = specfun.hyp3f2(p, 1.0, SeriesTolerance(rel_eps=1e-11, max_terms=3_000_000))
        assert got == pytest.approx(expected, abs=1e-10)

    def test_terminating_n4(self):
        # c = 0 kills every term past the first
        p = HypParams32(1.0, 1.0, 0.0, 2.0, 3.0)
        assert specfun.hyp3f2(p, 0.7) == 1.0

    def test_decay_guard_at_one(self):
        with pytest.raises(DomainError):
            specfun.hyp3f2(HypParams32(1.0, 1.0, 1.0, 1.2, 1.3), 1.0)

    def test_pochhammer_zero_guard(self):
        with pytest.raises(DomainError):
            HypParams32(1.0, 1.0, 0.5, -1.0, 2.5)


class TestGamma:
    def test_against_stdlib(self):
        for x in np.linspace(0.5, 30.0, 97):
            assert specfun.gamma(float(x)) == pytest.approx(math.gamma(float(x)), rel=1e-12)

    def test_poles(self):
        with pytest.raises(DomainError):
            specfun.gamma(0.0)
        with pytest.raises(DomainError):
            specfun.gamma(-3.0)

    def test_gamma_identity(self):
        # 2G(m+n-1)/((2m+n)G(1+m)G(n-2)) + 2G(m+n-1)/(G(1+m)G(n-1))
        #   = 4G(m+n)/((2m+n)G(1+m)G(n-1))
        worst = 0.0
        for m in range(0, 21):
            for n in range(3, 11):
                g = specfun.gamma
                lhs = 2.0 * g(m + n - 1.0) / ((2 * m + n) * g(1.0 + m) * g(n - 2.0)) + 2.0 * g(
                    m + n - 1.0
                ) / (g(1.0 + m) * g(n - 1.0))
                rhs = 4.0 * g(float(m + n)) / ((2 * m + n) * g(1.0 + m) * g(n - 1.0))
                worst = max(worst, abs(lhs - rhs) / abs(rhs))
        assert worst < 1e-10


class TestBesselK:
    def test_half_integer_closed_form(self):
        t = 1.0
        assert specfun.bessel_k_half(1, t) == pytest.approx(
            math.sqrt(math.pi / (2 * t)) * math.exp(-t), rel=1e-14
        )

    def test_integral_oracle_half_integer(self):
        assert specfun.bessel_k_half(3, 2.0) == pytest.approx(
            bessel_k_integral_oracle(1.5, 2.0), abs=1e-10
        )

    def test_integral_oracle_integer_series_branch(self):
        assert specfun.bessel_k_half(2, 0.5) == pytest.approx(
            bessel_k_integral_oracle(1.0, 0.5), abs=1e-10
        )

    def test_integral_oracle_integer_large_branch(self):
        for t in (2.5, 6.0):
            assert specfun.bessel_k_half(4, t) == pytest.approx(
                bessel_k_integral_oracle(2.0, t), rel=1e-12
            )

    def test_domain_error(self):
        with pytest.raises(DomainError):
            specfun.bessel_k_half(2, 0.0)
        with pytest.raises(DomainError):
            specfun.bessel_k_half(2, -1.0)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6, 7, 8])
    def test_recurrence_consistency(self, n):
        # K_{nu+1} - K_{nu-1} - (2 nu / t) K_nu = 0 to 1e-9 relative
        for t in np.geomspace(0.1, 10.0, 37):
            t = float(t)
            lhs = specfun.k_modified(n + 2, t)
            rhs = specfun.k_modified(n - 2, t) + (n / t) * specfun.k_modified(n, t)
            assert abs(lhs - rhs) / abs(lhs) < 1e-9

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_monotone_decreasing(self, n):
        grid = np.geomspace(0.05, 20.0, 60)
        vals = specfun.bessel_k_half(n, grid)
        assert np.all(np.diff(vals) < 0)

    def test_scipy_cross_check(self):
        for n in range(1, 9):
            for t in np.geomspace(0.05, 30.0, 25):
                assert specfun.bessel_k_half(n, float(t)) == pytest.approx(
                    float(special.kv(n / 2.0, t)), rel=5e-13
                )


class TestBesselI:
    def test_zero_argument(self):
        for n in (3, 4, 5):
            assert specfun.bessel_i_half(n, 0.0) == 0.0

    def test_half_integer_closed_form(self):
        assert specfun.bessel_i_half(1, 1.0) == pytest.approx(
            math.sqrt(2.0 / math.pi) * math.sinh(1.0), rel=1e-13
        )

    def test_series_oracle(self):
        # direct 200-term series in exact-precision arithmetic
        import mpmath as mp

        with mp.workdps(40):
            t = mp.mpf("1.5")
            nu = 1
            total = mp.mpf(0)
            for k in range(200):
                total += (t / 2) ** (2 * k + nu) / (mp.factorial(k) * mp.gamma(k + nu + 1))
            expected = float(total)
        assert specfun.bessel_i_half(2, 1.5) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_monotone_increasing(self, n):
        grid = np.geomspace(0.05, 20.0, 60)
        vals = specfun.bessel_i_half(n, grid)
        assert np.all(np.diff(vals) > 0)

    def test_overflow_guard(self):
        with pytest.raises(OverflowRangeError):
            specfun.bessel_i_half(2, 701.0)

    def test_scipy_cross_check(self):
        for n in range(1, 9):
            for t in np.geomspace(0.05, 30.0, 25):
                assert specfun.bessel_i_half(n, float(t)) == pytest.approx(
                    float(special.iv(n / 2.0, t)), rel=5e-13
                )
