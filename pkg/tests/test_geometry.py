import math

import numpy as np
import pytest

from hypberg import geometry as geo
from hypberg import sampling
from hypberg.errors import DomainError, StencilOutsideBallError
from hypberg.geometry import BallDomain, MobiusMap, RadialFunction


def random_point(rng, n, r_max=0.8):
    x = rng.standard_normal(n)
    return x * rng.uniform(0.05, r_max) / np.linalg.norm(x)


def random_map(rng, n, a_max=0.7, rotate=True):
    a = rng.standard_normal(n)
    a *= rng.uniform(0.1, a_max) / np.linalg.norm(a)
    if rotate:
        q, r = np.linalg.qr(rng.standard_normal((n, n)))
        q = q * np.sign(np.diag(r))
    else:
        q = np.eye(n)
    return MobiusMap(a, q)


class TestTauDensity:
    def test_origin(self):
        assert geo.tau_density(np.zeros(2)) == 4.0
        assert geo.tau_density(np.zeros(3)) == 8.0

    def test_half_radius(self):
        x = np.array([0.5, 0.0])
        assert geo.tau_density(x) == pytest.approx(4.0 / 0.75**2, rel=1e-14)

    def test_outside(self):
        with pytest.raises(DomainError):
            geo.tau_density(np.array([1.0, 0.0]))


class TestMobius:
    def test_identity_map(self, rng):
        # sigma_0 = -id, so the family's identity element carries Q = -I
        m = MobiusMap.identity(3)
        x = random_point(rng, 3)
        assert geo.mobius_apply(m, x) == pytest.approx(x)
        antipode = MobiusMap(np.zeros(3), np.eye(3))
        assert geo.mobius_apply(antipode, x) == pytest.approx(-x)

    def test_involution_properties(self, rng):
        for n in (2, 3, 4):
            m = random_map(rng, n, rotate=False)
            a = m.center
            assert geo.mobius_apply(m, np.zeros(n)) == pytest.approx(a, abs=1e-14)
            assert geo.mobius_apply(m, a) == pytest.approx(np.zeros(n), abs=1e-14)
            x = random_point(rng, n)
            y = geo.mobius_apply(m, x)
            assert geo.mobius_apply(m, y) == pytest.approx(x, abs=1e-13)
            assert np.linalg.norm(y) < 1.0

    def test_inverse(self, rng):
        m = random_map(rng, 3)
        x = random_point(rng, 3)
        y = geo.mobius_apply(m, x)
        assert geo.mobius_apply(m.inverse(), y) == pytest.approx(x, abs=1e-13)

    def test_jacobian_rotation_is_one(self, rng):
        q, r = np.linalg.qr(rng.standard_normal((3, 3)))
        m = MobiusMap(np.zeros(3), q * np.sign(np.diag(r)))
        assert geo.mobius_jacobian(m, random_point(rng, 3)) == pytest.approx(1.0, rel=1e-14)

    def test_jacobian_at_origin(self, rng):
        m = random_map(rng, 3)
        a2 = float(np.dot(m.center, m.center))
        assert geo.mobius_jacobian(m, np.zeros(3)) == pytest.approx((1 - a2) ** 3, rel=1e-14)

    def test_jacobian_matches_fd_determinant(self, rng):
        h = 1e-5
        for _ in range(12):
            m = random_map(rng, 3)
            x = random_point(rng, 3)
            jac = np.zeros((3, 3))
            for j in range(3):
                e = np.zeros(3)
                e[j] = h
                jac[:, j] = (m.apply_many((x + e)[None]) - m.apply_many((x - e)[None]))[0] / (
                    2 * h
                )
            fd = abs(np.linalg.det(jac))
            assert geo.mobius_jacobian(m, x) == pytest.approx(fd, rel=1e-6)

    def test_validation(self):
        with pytest.raises(DomainError):
            MobiusMap(np.array([1.0, 0.0]), np.eye(2))
        with pytest.raises(DomainError):
            MobiusMap(np.array([0.3, 0.0]), np.array([[1.0, 0.1], [0.0, 1.0]]))


class TestLaplacianRadial:
    def test_constant(self):
        u = RadialFunction(value=lambda r: 1.0, d1=lambda r: 0.0, d2=lambda r: 0.0)
        assert geo.laplacian_h_radial(u, 0.5, 3) == 0.0

    def test_log_one_minus_r2_n2(self):
        # Delta_h log(1-r^2) = -4 in dimension two, at every radius
        u = RadialFunction(
            value=lambda r: math.log(1 - r * r),
            d1=lambda r: -2 * r / (1 - r * r),
            d2=lambda r: -2 * (1 + r * r) / (1 - r * r) ** 2,
        )
        for r in (0.1, 0.5, 0.9):
            assert geo.laplacian_h_radial(u, r, 2) == pytest.approx(-4.0, rel=1e-12)

    def test_r_squared_n3_fd_oracle(self):
        u_fd = RadialFunction(value=lambda r: r * r)  # derivatives via FD
        u_exact = RadialFunction(value=lambda r: r * r, d1=lambda r: 2 * r, d2=lambda r: 2.0)
        r = 0.5
        got = geo.laplacian_h_radial(u_exact, r, 3)
        via_fd = geo.laplacian_h_radial(u_fd, r, 3)
        omr2 = 1 - r * r
        expected = omr2 * omr2 * (2.0 + 2 * 2.0) + 2.0 * omr2 * r * (2 * r)
        assert got == pytest.approx(expected, rel=1e-13)
        assert via_fd == pytest.approx(expected, rel=1e-6)

    def test_endpoint_errors(self):
        u = RadialFunction(value=lambda r: r)
        with pytest.raises(DomainError):
            geo.laplacian_h_radial(u, 0.0, 3)
        with pytest.raises(DomainError):
            geo.laplacian_h_radial(u, 1.0, 3)


class TestLaplacianFD:
    def test_constant(self, rng):
        assert geo.laplacian_h_fd(lambda x: 1.0, random_point(rng, 3)) == pytest.approx(
            0.0, abs=1e-10
        )

    def test_poisson_kernel_is_harmonic(self, rng):
        for n in (2, 3, 4):
            zeta = rng.standard_normal(n)
            zeta /= np.linalg.norm(zeta)
            x = random_point(rng, n, 0.7)
            val = geo.laplacian_h_fd(lambda p: geo.poisson_kernel(p, zeta), x)
            scale = geo.poisson_kernel(x, zeta)
            assert abs(val) < 1e-5 * max(scale, 1.0)

    def test_mobius_coordinate_identity(self, rng):
        # Delta_h m_i = 2(n-2)(1-|m|^2) m_i
        for n in (3, 4):
            m = random_map(rng, n)
            x = random_point(rng, n, 0.6)
            y = geo.mobius_apply(m, x)
            for i in range(n):
                lap = geo.laplacian_h_fd(lambda p: geo.mobius_apply(m, p)[i], x)
                expected = 2.0 * (n - 2) * (1.0 - float(np.dot(y, y))) * y[i]
                assert lap == pytest.approx(expected, abs=1e-5)

    def test_stencil_guard(self):
        with pytest.raises(StencilOutsideBallError):
            geo.laplacian_h_fd(lambda p: 1.0, np.array([0.9999, 0.0]), h=1e-3)


class TestPoissonKernel:
    def test_center(self):
        zeta = np.array([1.0, 0.0, 0.0])
        assert geo.poisson_kernel(np.zeros(3), zeta) == 1.0

    def test_radial_ray(self):
        zeta = np.array([1.0, 0.0])
        r = 0.5
        assert geo.poisson_kernel(r * zeta, zeta) == pytest.approx(3.0, rel=1e-14)
        # general-n closed form along the ray
        zeta3 = np.array([0.0, 1.0, 0.0])
        r = 0.3
        expected = ((1 + r) / (1 - r)) ** 2
        assert geo.poisson_kernel(r * zeta3, zeta3) == pytest.approx(expected, rel=1e-13)


class TestBallVolumePerimeter:
    def test_n2_closed_forms(self):
        assert geo.ball_volume(2, 0.5) == pytest.approx(4 * math.pi / 3, rel=1e-13)
        assert geo.ball_perimeter(2, 0.5) == pytest.approx(8 * math.pi / 3, rel=1e-13)

    def test_zero_radius(self):
        for n in (2, 3, 5):
            assert geo.ball_volume(n, 0.0) == 0.0
            assert geo.ball_perimeter(n, 0.0) == 0.0

    def test_volume_formula_vs_sinh_antiderivative(self):
        # hypergeometric route against the exact elementary antiderivative
        for n in (2, 3, 4, 5, 6):
            for r in (0.1, 0.4, 0.6, 0.9, 0.97):
                via_chi = geo.ball_volume_from_chi(n, geo.chi_from_r(r))
                assert geo.ball_volume(n, r) == pytest.approx(via_chi, rel=1e-11)

    def test_monotone(self):
        grid = np.linspace(0.01, 0.95, 40)
        for n in (2, 3, 4):
            vols = [geo.ball_volume(n, float(r)) for r in grid]
            pers = [geo.ball_perimeter(n, float(r)) for r in grid]
            assert np.all(np.diff(vols) > 0)
            assert np.all(np.diff(pers) > 0)

    def test_perimeter_is_volume_derivative_in_chi(self):
        # P = dV/dchi pins the 2^(n-1) n coefficient
        h = 1e-6
        for n in (2, 3, 4, 5):
            r = 0.6
            chi = geo.chi_from_r(r)
            dv = (
                geo.ball_volume_from_chi(n, chi + h) - geo.ball_volume_from_chi(n, chi - h)
            ) / (2 * h)
            assert geo.ball_perimeter(n, r) == pytest.approx(dv, rel=1e-9)


class TestRadiusFromVolume:
    def test_zero(self):
        assert geo.radius_from_volume(3, 0.0) == 0.0

    def test_n2_example(self):
        assert geo.radius_from_volume(2, 4 * math.pi / 3) == pytest.approx(0.5, rel=1e-12)

    @pytest.mark.parametrize("n", [2, 3, 4, 5])
    def test_round_trip(self, n):
        s = np.geomspace(1e-4, 1e5, 100)
        r = geo.radius_from_volume(n, s)
        back = np.array([geo.ball_volume(n, float(x)) for x in r])
        assert np.max(np.abs(back - s) / s) < 1e-10

    def test_derivative_formula_vs_fd(self):
        # v'(s) from the closed expression against centered differences
        for n in (2, 3, 4):
            for s in (0.5, 3.0, 20.0):
                h = 1e-4 * s
                fd = (geo.radius_from_volume(n, s + h) - geo.radius_from_volume(n, s - h)) / (
                    2 * h
                )
                v = geo.radius_from_volume(n, s)
                assert geo.radius_derivative_wrt_volume(n, v) == pytest.approx(fd, rel=1e-6)


class TestIsoperimetricProfile:
    def test_n2_closed_form(self):
        for s in np.geomspace(1e-3, 1e3, 100):
            s = float(s)
            assert geo.isoperimetric_profile(2, s) == pytest.approx(
                1.0 / (4 * math.pi + s), rel=1e-10
            )

    @pytest.mark.parametrize("n,s", [(3, 0.05), (3, 2.0), (4, 10.0)])
    def test_two_formula_cross_check(self, n, s):
        assert geo.isoperimetric_profile(n, s) == pytest.approx(
            geo.isoperimetric_profile_closed(n, s), rel=1e-9
        )

    def test_claim_identity(self):
        # -((n-1)+(n+1)v^2) v'/(v(v^2-1)) + v''/v' = 0, v'' by second-order FD
        for n in (2, 3, 4, 5):
            for s in np.geomspace(0.1, 50.0, 20):
                s = float(s)
                v = geo.radius_from_volume(n, s)
                vp = geo.radius_derivative_wrt_volume(n, v)
                h = max(1e-3 * s, 1e-6)
                vpp = (
                    geo.radius_from_volume(n, s + h)
                    - 2 * v
                    + geo.radius_from_volume(n, s - h)
                ) / (h * h)
                res = -((n - 1) + (n + 1) * v * v) * vp / (v * (v * v - 1.0)) + vpp / vp
                assert abs(res) < 1e-4


class TestMeasureInvariance:
    def test_mobius_preserves_measure(self, rng):
        # tau(m^-1(B)) = tau(B), Monte Carlo with a moderate sampling ball
        n = 3
        s_ball = 2.5
        v = geo.radius_from_volume(n, s_ball)
        for _ in range(4):
            m = random_map(rng, n, a_max=0.4)
            # preimage points satisfy |m(x)| < v; they live inside a
            # computable Euclidean ball, so a moderate sampler works
            sampler = sampling.TauSampler(n, 0.97, 64)
            sample = sampler.draw(rng, 1 << 15)
            y = m.apply_many(sample.points)
            inside = (np.linalg.norm(y, axis=1) < v).astype(float)
            frac, err = sampling.stratified_mean(inside, sample.stratum, sampler.n_strata)
            est = sampler.tau_mass * frac
            err_abs = sampler.tau_mass * err
            assert abs(est - s_ball) < 3 * err_abs + 1e-9


class TestBallDomain:
    def test_consistent_pair(self):
        b = BallDomain.from_radius(3, 0.5)
        assert b.hyperbolic_measure == pytest.approx(geo.ball_volume(3, 0.5))
        b2 = BallDomain.from_measure(3, 7.0)
        assert geo.ball_volume(3, b2.euclidean_radius) == pytest.approx(7.0, rel=1e-10)

    def test_inconsistent_pair_rejected(self):
        with pytest.raises(DomainError):
            BallDomain(3, 0.5, 1.0)
