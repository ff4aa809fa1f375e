"""Hyperbolic geometry of the unit ball model.

The metric is 4/(1-|x|^2)^2 times the Euclidean one, the invariant
volume element is dtau = 2^n (1-|x|^2)^-n dV, and the hyperbolic radius
of the Euclidean sphere |x| = r is chi = log((1+r)/(1-r)). Volumes and
perimeters of centered balls reduce to antiderivatives of sinh^(n-1),
which this module evaluates in closed form; the hypergeometric volume
formula is kept as the primary scalar path and the two are tested
against each other.

Note on the perimeter constant: consistency of P_r with the invariant
measure (P = dV/dchi), with the hyperbolic length element
2^(n-1) (1-|x|^2)^(1-n) dH^(n-1), and with the profile Upsilon forces
the coefficient 2^(n-1) n pi^(n/2) / Gamma(1+n/2); every identity
certified downstream pins this convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from . import specfun
from .errors import DomainError, StencilOutsideBallError
from .specfun import DEFAULT_TOL, SeriesTolerance

_BOUNDARY_MARGIN = 1e-12


# ----------------------------------------------------------------------
# Basic densities and kernels
# ----------------------------------------------------------------------


def tau_density(x: np.ndarray) -> float:
    """Invariant-measure density 2^n / (1-|x|^2)^n at x (w.r.t. dV)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    r2 = float(np.dot(x, x))
    if r2 >= 1.0:
        raise DomainError("point outside the open unit ball")
    return 2.0**n / (1.0 - r2) ** n


def poisson_kernel(x: np.ndarray, zeta: np.ndarray) -> float:
    """(1-|x|^2)^(n-1) / |x - zeta|^(2n-2) for |x| < 1, |zeta| = 1."""
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    n = x.size
    r2 = float(np.dot(x, x))
    if r2 >= 1.0:
        raise DomainError("point outside the open unit ball")
    if abs(np.dot(zeta, zeta) - 1.0) > 1e-10:
        raise DomainError("zeta must be a unit vector")
    d2 = float(np.dot(x - zeta, x - zeta))
    return ((1.0 - r2) / d2) ** (n - 1)


def poisson_kernel_array(X: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Poisson kernel at rows of X."""
    X = np.asarray(X, dtype=float)
    n = X.shape[1]
    r2 = np.einsum("ij,ij->i", X, X)
    d2 = np.einsum("ij,ij->i", X - zeta, X - zeta)
    return ((1.0 - r2) / d2) ** (n - 1)


# ----------------------------------------------------------------------
# Moebius self-maps
# ----------------------------------------------------------------------


def _sigma_a(a: np.ndarray, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Ball involution exchanging 0 and a, applied to rows of X.

    Returns (image, rho) where rho = 1 - 2<x,a> + |x|^2 |a|^2 so callers
    can form 1 - |image|^2 = (1-|a|^2)(1-|x|^2) / rho without
    cancellation.
    """
    a2 = float(np.dot(a, a))
    x2 = np.einsum("ij,ij->i", X, X)
    xa = X @ a
    rho = 1.0 - 2.0 * xa + x2 * a2
    diff = X - a[None, :]
    d2 = np.einsum("ij,ij->i", diff, diff)
    img = (d2[:, None] * a[None, :] - (1.0 - a2) * diff) / rho[:, None]
    return img, rho


@dataclass(frozen=True)
class MobiusMap:
    """A Moebius self-map of the ball: x -> Q sigma_a(x).

    sigma_a is the standard involution with sigma_a(0) = a and
    sigma_a(a) = 0; Q is orthogonal.
    """

    center: np.ndarray
    rotation: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.center, dtype=float)
        q = np.asarray(self.rotation, dtype=float)
        object.__setattr__(self, "center", a)
        object.__setattr__(self, "rotation", q)
        if a.ndim != 1 or q.shape != (a.size, a.size):
            raise DomainError("center must be a vector and rotation a matching square matrix")
        if float(np.linalg.norm(a)) >= 1.0 - _BOUNDARY_MARGIN:
            raise DomainError("|center| must be < 1 - 1e-12")
        if float(np.max(np.abs(q.T @ q - np.eye(a.size)))) > 1e-12:
            raise DomainError("rotation must be orthogonal to 1e-12")

    @property
    def dim(self) -> int:
        return self.center.size

    @staticmethod
    def identity(dim: int) -> "MobiusMap":
        # sigma_0 is the antipodal map, so the identity element of the
        # family pairs it with the rotation -I
        return MobiusMap(np.zeros(dim), -np.eye(dim))

    @staticmethod
    def translation(a: np.ndarray) -> "MobiusMap":
        a = np.asarray(a, dtype=float)
        return MobiusMap(a, np.eye(a.size))

    def inverse(self) -> "MobiusMap":
        # sigma_a(Q^T y) = Q^T sigma_{Qa}(y)
        return MobiusMap(self.rotation @ self.center, self.rotation.T)

    def apply_many(self, X: np.ndarray) -> np.ndarray:
        img, _ = _sigma_a(self.center, np.asarray(X, dtype=float))
        return img @ self.rotation.T

    def rho_many(self, X: np.ndarray) -> np.ndarray:
        """rho(x, a) = 1 - 2<x,a> + |x|^2 |a|^2 for rows of X."""
        X = np.asarray(X, dtype=float)
        a = self.center
        a2 = float(np.dot(a, a))
        return 1.0 - 2.0 * (X @ a) + np.einsum("ij,ij->i", X, X) * a2


def mobius_apply(m: MobiusMap, x: np.ndarray) -> np.ndarray:
    """Image of a single point under m."""
    x = np.asarray(x, dtype=float)
    if float(np.dot(x, x)) >= 1.0:
        raise DomainError("point outside the open unit ball")
    return m.apply_many(x[None, :])[0]


def mobius_jacobian(m: MobiusMap, x: np.ndarray) -> float:
    """Volume Jacobian (1-|m(x)|^2)^n / (1-|x|^2)^n.

    Uses the identity (1-|m(x)|^2)/(1-|x|^2) = (1-|a|^2)/rho(x,a), which
    stays accurate arbitrarily close to the boundary.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if float(np.dot(x, x)) >= 1.0:
        raise DomainError("point outside the open unit ball")
    a2 = float(np.dot(m.center, m.center))
    rho = float(m.rho_many(x[None, :])[0])
    return ((1.0 - a2) / rho) ** n


# ----------------------------------------------------------------------
# Hyperbolic Laplacian
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class RadialFunction:
    """A radial profile with optional analytic derivatives on (0, 1)."""

    value: Callable[[float], float]
    d1: Optional[Callable[[float], float]] = None
    d2: Optional[Callable[[float], float]] = None

    def derivatives(self, r: float, h: float = 1e-5) -> tuple[float, float]:
        if self.d1 is not None and self.d2 is not None:
            return self.d1(r), self.d2(r)
        f = self.value
        d1 = (f(r + h) - f(r - h)) / (2.0 * h)
        d2 = (f(r + h) - 2.0 * f(r) + f(r - h)) / (h * h)
        return d1, d2


def laplacian_h_radial(u: RadialFunction, r: float, n: int) -> float:
    """Radial hyperbolic Laplacian
    (1-r^2)^2 (u'' + (n-1) u'/r) + 2(n-2)(1-r^2) r u' on 0 < r < 1.

    r = 0 is a removable singularity with limit n * u''(0); callers
    should use that directly (we raise here to keep the formula honest).
    """
    if r <= 0.0 or r >= 1.0:
        raise DomainError("r must lie strictly between 0 and 1")
    d1, d2 = u.derivatives(r)
    omr2 = 1.0 - r * r
    return omr2 * omr2 * (d2 + (n - 1) * d1 / r) + 2.0 * (n - 2) * omr2 * r * d1


def laplacian_h_fd(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-3) -> float:
    """Hyperbolic Laplacian of a point function by central differences.

    (1-|x|^2)^2 Lap f + 2(n-2)(1-|x|^2) <x, grad f>, with the Euclidean
    pieces Richardson-extrapolated once (h and h/2).
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    r2 = float(np.dot(x, x))
    if r2 >= 1.0:
        raise DomainError("point outside the open unit ball")
    if np.sqrt(r2) + h >= 1.0:
        raise StencilOutsideBallError("stencil leaves the unit ball")

    def euclidean_parts(step: float) -> tuple[float, float]:
        lap = 0.0
        radial = 0.0
        f0 = f(x)
        for i in range(n):
            e = np.zeros(n)
            e[i] = step
            fp = f(x + e)
            fm = f(x - e)
            lap += (fp - 2.0 * f0 + fm) / (step * step)
            radial += x[i] * (fp - fm) / (2.0 * step)
        return lap, radial

    lap_h, rad_h = euclidean_parts(h)
    lap_h2, rad_h2 = euclidean_parts(h / 2.0)
    lap = (4.0 * lap_h2 - lap_h) / 3.0
    radial = (4.0 * rad_h2 - rad_h) / 3.0
    omr2 = 1.0 - r2
    return omr2 * omr2 * lap + 2.0 * (n - 2) * omr2 * radial


# ----------------------------------------------------------------------
# Volume, perimeter, and the isoperimetric profile
# ----------------------------------------------------------------------


def unit_ball_volume(n: int) -> float:
    """Euclidean volume omega_n of the unit ball in R^n."""
    return math.pi ** (n / 2.0) / specfun.gamma(1.0 + n / 2.0)


def chi_from_r(r):
    """Hyperbolic radius chi = log((1+r)/(1-r)) of the sphere |x| = r."""
    r = np.asarray(r, dtype=float)
    out = np.log1p(2.0 * r / (1.0 - r))
    return float(out) if out.ndim == 0 else out


def r_from_chi(chi):
    chi = np.asarray(chi, dtype=float)
    out = np.tanh(0.5 * chi)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=32)
def _sinh_pow_series_coeffs(m: int, terms: int = 40) -> np.ndarray:
    """Coefficients b_j with sinh(x)^m = x^m * sum_j b_j x^(2j)."""
    base = np.zeros(terms)
    for j in range(terms):
        base[j] = 1.0 / math.factorial(2 * j + 1)
    coeffs = np.zeros(terms)
    coeffs[0] = 1.0
    for _ in range(m):
        out = np.zeros(terms)
        for i in range(terms):
            if coeffs[i] == 0.0:
                continue
            upto = terms - i
            out[i : i + upto] += coeffs[i] * base[:upto]
        coeffs = out
    return coeffs


def _sinh_pow_antideriv(m: int, chi: np.ndarray) -> np.ndarray:
    """int_0^chi sinh(u)^m du for integer m >= 1, vectorized and stable.

    Small chi uses the power series of sinh^m (the exponential closed
    form loses all digits there); chi >= 1 expands sinh^m in
    exponentials and integrates term by term via expm1.
    """
    chi = np.asarray(chi, dtype=float)
    out = np.empty_like(chi)
    small = chi < 1.0
    if np.any(small):
        b = _sinh_pow_series_coeffs(m)
        c = chi[small]
        c2 = c * c
        acc = np.zeros_like(c)
        power = c ** (m + 1)
        for j, bj in enumerate(b):
            acc += bj * power / (m + 1 + 2 * j)
            power = power * c2
        out[small] = acc
    if np.any(~small):
        c = chi[~small]
        acc = np.zeros_like(c)
        for j in range(m + 1):
            k = m - 2 * j
            coef = (-1.0) ** j * math.comb(m, j)
            if k == 0:
                acc += coef * c
            else:
                acc += coef * np.expm1(k * c) / k
        out[~small] = acc * 0.5**m
    return out


def ball_volume(n: int, r: float, tol: SeriesTolerance = DEFAULT_TOL) -> float:
    """Hyperbolic volume of the centered ball of Euclidean radius r:

        V_r = 2^n pi^(n/2) F[n/2, n, (n+2)/2, r^2] r^n / Gamma(1+n/2).

    The raw series is summed for r^2 <= 0.5 and the Euler-transformed
    series (terms ~ k^-n) for r^2 in (0.5, 0.995]; beyond that the exact
    sinh^(n-1) antiderivative takes over, since the transformed series
    slows to a crawl as r^2 -> 1.
    """
    if not 0.0 <= r < 1.0:
        raise DomainError("r must lie in [0, 1)")
    if r == 0.0:
        return 0.0
    t = r * r
    a, b, c = n / 2.0, float(n), (n + 2) / 2.0
    if t <= 0.5:
        f = specfun.hyp2f1(a, b, c, t, tol)
    elif t <= 0.995:
        f = specfun.hyp2f1_via_euler(a, b, c, t, tol)
    else:
        return ball_volume_from_chi(n, chi_from_r(r))
    return 2.0**n * math.pi ** (n / 2.0) * f * r**n / specfun.gamma(1.0 + n / 2.0)


def ball_volume_from_chi(n: int, chi) -> np.ndarray | float:
    """V as a function of hyperbolic radius: n omega_n int_0^chi sinh^(n-1)."""
    chi_arr = np.atleast_1d(np.asarray(chi, dtype=float))
    vals = n * unit_ball_volume(n) * _sinh_pow_antideriv(n - 1, chi_arr)
    return float(vals[0]) if np.ndim(chi) == 0 else vals


def ball_perimeter(n: int, r: float) -> float:
    """Hyperbolic perimeter 2^(n-1) n pi^(n/2) r^(n-1) (1-r^2)^(1-n) / Gamma(1+n/2).

    Equivalently n omega_n sinh(chi)^(n-1) = dV/dchi.
    """
    if not 0.0 <= r < 1.0:
        raise DomainError("r must lie in [0, 1)")
    return (
        2.0 ** (n - 1)
        * n
        * math.pi ** (n / 2.0)
        * r ** (n - 1)
        * (1.0 - r * r) ** (1 - n)
        / specfun.gamma(1.0 + n / 2.0)
    )


def chi_from_volume(n: int, s, rel_tol: float = 1e-13):
    """Hyperbolic radius chi of the centered ball with volume s.

    Solves n omega_n * SinhInt(chi) = s by a bracketed Newton iteration
    (the derivative is the perimeter n omega_n sinh^(n-1) chi, never
    degenerate on a positive bracket). Vectorized over s.
    """
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    if np.any(s_arr < 0):
        raise DomainError("volume must be nonnegative")
    m = n - 1
    scale = n * unit_ball_volume(n)
    chi = np.empty_like(s_arr)
    pos = s_arr > 0
    sp = s_arr[pos]
    # initial guess from the two asymptotic regimes of SinhInt
    guess_small = (n * sp / scale) ** (1.0 / n)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        guess_large = np.log(np.maximum(2.0**m * m * sp / scale, 2.0)) / max(m, 1)
    g = np.where(sp < scale, guess_small, np.maximum(guess_large, 1e-3))
    lo = np.zeros_like(sp)
    hi = np.full_like(sp, 2.0)
    # expand upper brackets until they cover the target
    for _ in range(200):
        val = scale * _sinh_pow_antideriv(m, hi) - sp
        if np.all(val > 0):
            break
        hi = np.where(val <= 0, hi * 1.5, hi)
    cur = np.clip(g, lo + 1e-300, hi)
    for _ in range(200):
        f_val = scale * _sinh_pow_antideriv(m, cur) - sp
        lo = np.where(f_val < 0, cur, lo)
        hi = np.where(f_val > 0, cur, hi)
        deriv = scale * np.sinh(cur) ** m
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(deriv > 0, f_val / deriv, 0.0)
        nxt = cur - step
        bad = (nxt <= lo) | (nxt >= hi) | ~np.isfinite(nxt)
        nxt = np.where(bad, 0.5 * (lo + hi), nxt)
        done = np.abs(nxt - cur) <= rel_tol * (1.0 + np.abs(nxt))
        cur = nxt
        if np.all(done):
            break
    chi[pos] = cur
    chi[~pos] = 0.0
    return float(chi[0]) if np.ndim(s) == 0 else chi


def radius_from_volume(n: int, s, rel_tol: float = 1e-13):
    """Euclidean radius of the centered ball with hyperbolic volume s."""
    chi = chi_from_volume(n, s, rel_tol)
    return r_from_chi(chi)


def radius_derivative_wrt_volume(n: int, v: float) -> float:
    """v'(s) = 2^-n pi^(-n/2) v^(1-n) (1-v^2)^n Gamma(1+n/2) / n  (= 1/(dV/dr))."""
    return (
        2.0 ** (-n)
        * math.pi ** (-n / 2.0)
        * v ** (1 - n)
        * (1.0 - v * v) ** n
        * specfun.gamma(1.0 + n / 2.0)
        / n
    )


def isoperimetric_profile(n: int, s: float) -> float:
    """Upsilon(s) = s / P^2 at the centered ball of volume s."""
    if s <= 0:
        raise DomainError("s must be positive")
    v = radius_from_volume(n, s)
    p = ball_perimeter(n, v)
    return s / (p * p)


def isoperimetric_profile_closed(n: int, s: float, tol: SeriesTolerance = DEFAULT_TOL) -> float:
    """The equivalent closed expression
    (1-v^2)^(2n-2) Gamma(n/2) F[n/2, n, (n+2)/2, v^2] / (n 2^(n-1) pi^(n/2) v^(n-2)).
    """
    if s <= 0:
        raise DomainError("s must be positive")
    v = radius_from_volume(n, s)
    t = v * v
    a, b, c = n / 2.0, float(n), (n + 2) / 2.0
    f = specfun.hyp2f1(a, b, c, t, tol) if t <= 0.5 else specfun.hyp2f1_via_euler(a, b, c, t, tol)
    return (
        (1.0 - t) ** (2 * n - 2)
        * specfun.gamma(n / 2.0)
        * f
        / (n * 2.0 ** (n - 1) * math.pi ** (n / 2.0) * v ** (n - 2))
    )


@dataclass(frozen=True)
class BallDomain:
    """A centered ball, stored as the consistent (radius, measure) pair."""

    n: int
    euclidean_radius: float
    hyperbolic_measure: float

    def __post_init__(self) -> None:
        s = ball_volume(self.n, self.euclidean_radius)
        ref = max(abs(self.hyperbolic_measure), 1e-300)
        if abs(s - self.hyperbolic_measure) > 1e-10 * ref:
            raise DomainError("radius/measure pair is inconsistent")

    @staticmethod
    def from_radius(n: int, r: float) -> "BallDomain":
        return BallDomain(n, r, ball_volume(n, r))

    @staticmethod
    def from_measure(n: int, s: float) -> "BallDomain":
        return BallDomain(n, radius_from_volume(n, s), s)
