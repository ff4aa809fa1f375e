"""The sharp concentration bound theta and its certification.

theta(s) = n c(alpha) int_0^{v(s)} r^(n-1) Phi_n^alpha (1-r^2)^-n dr is
a ratio of the quadrature used for the normalization, so theta -> 1 as
s -> infinity by construction. A ThetaProfile caches a monotone table
for the Monte Carlo hot path; every certification below goes through
direct quadrature and closed-form derivatives, never the table.

Certified identities (the computation chain of the main bound):

* theta'' / theta' = -gamma Upsilon(s), with theta' and theta'' from the
  product rule on the closed integrand and the radius derivative, and
  Upsilon from the definitional s / P^2 route;
* the logarithmic-derivative identity
  (log Phi_n)'(v) v'(s) = -(n-1)^2 Gamma(n/2) F[n, n/2, 1+n/2, v^2]
  / (n 2^(n-1) pi^(n/2) (1-v^2)^(2-2n) v^(n-2)).
  (The right side equals -(n-1)^2 Upsilon; the sign is pinned by the
  n = 2 closed forms, where both sides are elementary.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from . import geometry, specfun, weights
from .config import DEFAULT_CONFIG, NumericsConfig
from .errors import DomainError
from .specfun import DEFAULT_TOL
from .weights import WeightParams

_TABLE_SIZE = 2048
_TABLE_S_MIN = 1e-4
_TABLE_TOP = 0.9999


def theta_direct(params: WeightParams, s: float, cfg: NumericsConfig = DEFAULT_CONFIG) -> float:
    """theta(s) by direct quadrature of the weighted radial integral."""
    if s < 0:
        raise DomainError("s must be nonnegative")
    if s == 0.0:
        return 0.0
    v = geometry.radius_from_volume(params.n, s)
    return params.c_alpha * weights.radial_weight_integral(params.n, params.alpha, v, None, cfg)


def theta_closed_n2(alpha: float, s: float) -> float:
    """n = 2 closed form 1 - (1 + s/(4 pi))^(1-alpha)."""
    return 1.0 - (1.0 + s / (4.0 * math.pi)) ** (1.0 - alpha)


def theta_derivative(params: WeightParams, s: float) -> float:
    """theta'(s) = n c v^(n-1) Phi^alpha(v) (1-v^2)^(-n) v'(s)."""
    n = params.n
    v = geometry.radius_from_volume(n, s)
    vp = geometry.radius_derivative_wrt_volume(n, v)
    log_w = (n - 1) * math.log(v) + params.alpha * float(
        weights.log_phi(n, v)
    ) - n * math.log1p(-v * v)
    return params.n * params.c_alpha * math.exp(log_w) * vp


@dataclass
class ThetaProfile:
    """Monotone cached table of (s, v(s), theta(s)) with PCHIP interpolation."""

    params: WeightParams
    cfg: NumericsConfig = field(default_factory=lambda: DEFAULT_CONFIG)
    s_nodes: np.ndarray = field(init=False, repr=False)
    v_nodes: np.ndarray = field(init=False, repr=False)
    theta_nodes: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        s_max = 10.0
        while theta_direct(self.params, s_max, self.cfg) <= _TABLE_TOP:
            s_max *= 2.0
            if s_max > 1e18:
                raise DomainError("theta never reached the table top")
        s_nodes = np.geomspace(_TABLE_S_MIN, s_max, _TABLE_SIZE)
        self.s_nodes = s_nodes
        self.v_nodes = geometry.radius_from_volume(self.params.n, s_nodes)
        # cumulative quadrature: integrate increments between consecutive radii
        n, alpha = self.params.n, self.params.alpha
        thetas = np.empty(_TABLE_SIZE)
        total = 0.0
        prev_v = 0.0
        for i, v in enumerate(self.v_nodes):
            total += _segment_integral(n, alpha, prev_v, v)
            thetas[i] = total
            prev_v = v
        self.theta_nodes = self.params.c_alpha * n * thetas
        if np.any(np.diff(self.theta_nodes) <= 0):
            raise DomainError("theta table is not strictly increasing")
        self._interp = PchipInterpolator(
            np.concatenate(([0.0], s_nodes)), np.concatenate(([0.0], self.theta_nodes))
        )

    def theta_interp(self, s) -> np.ndarray | float:
        """Fast table lookup; clamps to the asymptote above the table."""
        s_arr = np.atleast_1d(np.asarray(s, dtype=float))
        out = np.empty_like(s_arr)
        inside = s_arr <= self.s_nodes[-1]
        out[inside] = self._interp(s_arr[inside])
        out[~inside] = self.theta_nodes[-1] + (1.0 - self.theta_nodes[-1]) * (
            1.0 - self.s_nodes[-1] / s_arr[~inside]
        )
        return float(out[0]) if np.ndim(s) == 0 else out


def _segment_integral(n: int, alpha: float, lo: float, hi: float) -> float:
    """int_lo^hi r^(n-1) Phi^alpha (1-r^2)^(-n) dr by Gauss-Legendre."""
    if hi <= lo:
        return 0.0
    x, w = np.polynomial.legendre.leggauss(24)
    mid = 0.5 * (hi + lo)
    half = 0.5 * (hi - lo)
    r = mid + half * x
    omr2 = (1.0 - r) * (1.0 + r)
    log_w = (
        (n - 1) * np.log(r)
        + alpha * weights.smooth_exponent(n, r * r)
        + (alpha * (n - 1) - n) * np.log(omr2)
    )
    return float(half * np.dot(w, np.exp(log_w)))


def theta(profile: ThetaProfile, s: float) -> float:
    """The sharp bound theta(s), by direct quadrature (table untouched)."""
    return theta_direct(profile.params, s, profile.cfg)


def theta_inverse(profile: ThetaProfile, x: float) -> float:
    """T(x) with theta(T(x)) = x to 1e-10; bracket from the table, then
    Newton with the closed-form theta'."""
    if not 0.0 <= x < 1.0:
        raise DomainError("x must lie in [0, 1)")
    if x == 0.0:
        return 0.0
    nodes_t = profile.theta_nodes
    nodes_s = profile.s_nodes
    if x <= nodes_t[0]:
        lo, hi = 0.0, nodes_s[0]
    elif x >= nodes_t[-1]:
        lo = nodes_s[-1]
        hi = lo * 2.0
        while theta_direct(profile.params, hi, profile.cfg) < x:
            lo, hi = hi, hi * 2.0
            if hi > 1e18:
                raise DomainError("theta_inverse argument too close to 1")
    else:
        idx = int(np.searchsorted(nodes_t, x))
        lo, hi = (nodes_s[idx - 1] if idx > 0 else 0.0), nodes_s[idx]
    s = 0.5 * (lo + hi)
    for _ in range(100):
        val = theta_direct(profile.params, s, profile.cfg) - x
        if val > 0:
            hi = s
        else:
            lo = s
        deriv = theta_derivative(profile.params, s)
        step = val / deriv if deriv > 0 else 0.0
        nxt = s - step
        if not lo < nxt < hi:
            nxt = 0.5 * (lo + hi)
        if abs(nxt - s) <= 1e-12 * (1.0 + abs(nxt)) and abs(val) < 1e-11:
            return nxt
        s = nxt
    return s


# ----------------------------------------------------------------------
# Certifications
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class ResidualReport:
    label: str
    max_residual: float
    worst_arg: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance


def theta_log_derivative_ratio(params: WeightParams, s: float) -> float:
    """theta''(s) / theta'(s) assembled from the closed integrand.

    theta'(s) = n c W(v) v' with W(v) = v^(n-1) Phi^alpha (1-v^2)^(-n);
    one more product-rule differentiation gives
    theta''/theta' = W'(v)/W(v) * v' + v''/v', all terms analytic.
    """
    n = params.n
    v = geometry.radius_from_volume(n, s)
    vp = geometry.radius_derivative_wrt_volume(n, v)
    omt = 1.0 - v * v
    _, dlog_phi, _ = weights.log_phi_derivatives(n, v)
    w_log_deriv = (n - 1) / v + params.alpha * dlog_phi + 2.0 * n * v / omt
    # v'' / v' = d/dv [log v'] * v'
    vpp_over_vp = ((1 - n) / v - 2.0 * n * v / omt) * vp
    return w_log_deriv * vp + vpp_over_vp


def certify_theta_ode(
    profile: ThetaProfile, s_grid: np.ndarray, tolerance: float | None = None
) -> ResidualReport:
    """Residual of theta''/theta' + gamma Upsilon(s) over the grid."""
    params = profile.params
    if tolerance is None:
        tolerance = 1e-8 if params.n == 2 else 1e-5
    worst = -1.0
    worst_s = float("nan")
    for s in np.asarray(s_grid, dtype=float):
        lhs = theta_log_derivative_ratio(params, float(s))
        ups = geometry.isoperimetric_profile(params.n, float(s))
        res = abs(lhs + params.gamma * ups)
        if res > worst:
            worst, worst_s = res, float(s)
    return ResidualReport("theta-ode", worst, worst_s, tolerance)


def merk_right_side(n: int, v: float, tol=DEFAULT_TOL) -> float:
    """(n-1)^2 Gamma(n/2) F[n, n/2, 1+n/2, v^2] (1-v^2)^(2n-2)
    / (n 2^(n-1) pi^(n/2) v^(n-2))  — equals (n-1)^2 Upsilon."""
    t = v * v
    a, b, c = float(n), n / 2.0, 1.0 + n / 2.0
    f = specfun.hyp2f1(a, b, c, t, tol) if t <= 0.5 else specfun.hyp2f1_via_euler(a, b, c, t, tol)
    return (
        (n - 1) ** 2
        * specfun.gamma(n / 2.0)
        * f
        * (1.0 - t) ** (2 * n - 2)
        / (n * 2.0 ** (n - 1) * math.pi ** (n / 2.0) * v ** (n - 2))
    )


def certify_merk(n: int, v_grid: np.ndarray, tolerance: float = 1e-7) -> ResidualReport:
    """Relative residual of (log Phi_n)'(v) v'(s) + merk_right_side(v).

    The two sides are computed through disjoint routes: the left through
    the G-series derivative of log Phi and the radius derivative, the
    right through the hypergeometric closed form. They cancel exactly
    (the displayed identity carries a sign: the left side is negative).
    """
    worst = -1.0
    worst_v = float("nan")
    for v in np.asarray(v_grid, dtype=float):
        v = float(v)
        _, dlog_phi, _ = weights.log_phi_derivatives(n, v)
        vp = geometry.radius_derivative_wrt_volume(n, v)
        lhs = dlog_phi * vp
        rhs = merk_right_side(n, v)
        res = abs(lhs + rhs) / abs(rhs)
        if res > worst:
            worst, worst_v = res, v
    return ResidualReport("merk", worst, worst_v, tolerance)


def certify_claim(n: int, s_grid: np.ndarray, tolerance: float = 1e-4) -> ResidualReport:
    """Residual of -((n-1)+(n+1)v^2) v' / (v (v^2-1)) + v''/v'' ... = 0
    with v' analytic and v'' from second-order finite differences of the
    radius inversion."""
    worst = -1.0
    worst_s = float("nan")
    for s in np.asarray(s_grid, dtype=float):
        s = float(s)
        v = geometry.radius_from_volume(n, s)
        vp = geometry.radius_derivative_wrt_volume(n, v)
        h = max(1e-3 * s, 1e-6)
        v_plus = geometry.radius_from_volume(n, s + h)
        v_minus = geometry.radius_from_volume(n, s - h)
        vpp = (v_plus - 2.0 * v + v_minus) / (h * h)
        res = abs(-((n - 1) + (n + 1) * v * v) * vp / (v * (v * v - 1.0)) + vpp / vp)
        if res > worst:
            worst, worst_s = res, s
    return ResidualReport("claim", worst, worst_s, tolerance)
