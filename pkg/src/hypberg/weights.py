"""The radial weights Phi_n, their normalization, and the weighted norm.

Phi_n(r) = exp(kappa_n * H(r^2)) * (1-r^2)^(n-1) with
kappa_n = (n-1)(2-n)/n and H(t) = t * F[1,1,2-n/2; 2,1+n/2; t]. The
smooth exponent H is evaluated by the branch best suited to n:

* even n: the series terminates, H is a polynomial (exact);
* n = 3: the elementary closed form of log Phi_3 is used directly;
* odd n >= 5: H(t) = int_0^t F[1, 2-n/2; 1+n/2; u] du collapses, via the
  Euler integral for a 2F1 with unit numerator parameter, to a single
  smooth integral over [0, 1] that is uniformly accurate for all
  t in [0, 1] -- including t -> 1 where the raw series slows to k^-n.
  The 3F2 series is kept for moderate t and as a cross-check.

Logarithms are assembled additively so callers near the boundary only
ever exponentiate well-conditioned quantities.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from . import geometry, quadrature, sampling, specfun
from .config import DEFAULT_CONFIG, NumericsConfig
from .errors import DomainError, NonIntegrableError, TruncationWarning
from .geometry import RadialFunction, laplacian_h_radial
from .specfun import DEFAULT_TOL, HypParams32, SeriesTolerance


def _kappa(n: int) -> float:
    return (n - 1) * (2 - n) / n


@lru_cache(maxsize=32)
def _even_h_coeffs(n: int) -> np.ndarray:
    """H(t) = sum c_k t^(k+1) terminates for even n at degree n/2 - 1."""
    if n % 2 != 0:
        raise ValueError("even n only")
    deg = max(n // 2 - 1, 1)
    coeffs = np.zeros(deg)
    ck = 1.0
    for k in range(deg):
        coeffs[k] = ck / (k + 1.0)
        ck *= (2.0 - n / 2.0 + k) / (1.0 + n / 2.0 + k)
    return coeffs


def _h_series(n: int, t: np.ndarray, tol: SeriesTolerance = DEFAULT_TOL) -> np.ndarray:
    """H(t) = t * 3F2(t) by direct summation; fine for t <= ~0.9."""
    t = np.asarray(t, dtype=float)
    term = np.ones_like(t)
    total = np.ones_like(t)
    for k in range(tol.max_terms):
        term = term * ((1.0 + k) * (2.0 - n / 2.0 + k) / ((2.0 + k) * (1.0 + n / 2.0 + k))) * t
        total += term
        if not np.any(np.abs(term) > 1e-16 * np.abs(total)):
            break
    return t * total


def _h_quadrature(n: int, t: np.ndarray) -> np.ndarray:
    """H(t) = (c-1) int_0^1 (1-s)^(c-2) * (1 - (1-ts)^(1-b)) / (s (1-b)) ds

    with b = 2 - n/2, c = 1 + n/2; valid and smooth on all of t in [0,1].
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    b = 2.0 - n / 2.0
    c = 1.0 + n / 2.0
    p = 1.0 - b  # n/2 - 1 >= 3/2 for odd n >= 5
    s, oms, w = quadrature._unit_nodes(6)
    ts = np.minimum(np.outer(t, s), 1.0 - 1e-17)
    inner = -np.expm1(p * np.log1p(-ts))  # 1 - (1-ts)^p
    vals = inner / (s[None, :] * p) * oms[None, :] ** (c - 2.0)
    return (c - 1.0) * vals @ w


def smooth_exponent(n: int, t) -> np.ndarray | float:
    """psi(t) = kappa_n * H(t), the bounded exponent with
    log Phi_n = (n-1) log(1-t) + psi(t), t = r^2."""
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any((t_arr < 0) | (t_arr > 1)):
        raise DomainError("t must lie in [0, 1]")
    if n == 2:
        out = np.zeros_like(t_arr)
    elif n % 2 == 0:
        coeffs = _even_h_coeffs(n)
        h = np.zeros_like(t_arr)
        for k in range(len(coeffs) - 1, -1, -1):
            h = t_arr * (h + coeffs[k])
        out = _kappa(n) * h
    elif n == 3:
        r = np.sqrt(t_arr)
        out = np.empty_like(t_arr)
        tiny = r < 1e-7
        out[tiny] = -(2.0 / 3.0) * t_arr[tiny]
        # the log(1-r)(1-r)^2 term is below 1e-14 past r = 1 - 1e-8;
        # clamping avoids the rounded-to-one inf * 0
        rr = np.minimum(r[~tiny], 1.0 - 1e-8)
        out[~tiny] = (
            2.0
            + np.log1p(-rr) * (1.0 - rr) ** 2 / rr
            - np.log1p(rr) * (1.0 + rr) ** 2 / rr
        )
    else:
        out = np.empty_like(t_arr)
        low = t_arr <= 0.9
        if np.any(low):
            out[low] = _kappa(n) * _h_series(n, t_arr[low])
        if np.any(~low):
            out[~low] = _kappa(n) * _h_quadrature(n, t_arr[~low])
    return float(out[0]) if np.ndim(t) == 0 else out


def sandwich_constant(n: int) -> float:
    """E_n = exp(kappa_n * H(1)): the constant in E_n (1-r^2)^(n-1) < Phi_n."""
    return float(np.exp(smooth_exponent(n, 1.0)))


def log_phi(n: int, r, one_minus_r2=None) -> np.ndarray | float:
    """log Phi_n(r) for r in [0, 1); pass 1-r^2 explicitly near the boundary."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any((r_arr < 0) | (r_arr >= 1.0)):
        raise DomainError("r must lie in [0, 1)")
    t = r_arr * r_arr
    if one_minus_r2 is None:
        log_omt = np.log1p(-t)
    else:
        log_omt = np.log(np.atleast_1d(np.asarray(one_minus_r2, dtype=float)))
    out = (n - 1) * log_omt + smooth_exponent(n, t)
    return float(out[0]) if np.ndim(r) == 0 else out


def phi(n: int, r) -> np.ndarray | float:
    """Phi_n(r) on [0, 1]; Phi_n(1) = 0 by continuous extension."""
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any((r_arr < 0) | (r_arr > 1.0)):
        raise DomainError("r must lie in [0, 1]")
    out = np.zeros_like(r_arr)
    inside = r_arr < 1.0
    if np.any(inside):
        out[inside] = np.exp(log_phi(n, r_arr[inside]))
    return float(out[0]) if np.ndim(r) == 0 else out


def phi_series_3f2(n: int, r: float, tol: SeriesTolerance = DEFAULT_TOL) -> float:
    """Phi_n evaluated through the defining 3F2 series (oracle route)."""
    if not 0.0 <= r <= 1.0:
        raise DomainError("r must lie in [0, 1]")
    if r == 1.0:
        return 0.0
    t = r * r
    params = HypParams32(1.0, 1.0, 2.0 - n / 2.0, 2.0, 1.0 + n / 2.0)
    f32 = specfun.hyp3f2(params, t, tol)
    return math.exp(_kappa(n) * t * f32) * (1.0 - t) ** (n - 1)


# ----------------------------------------------------------------------
# Logarithmic derivatives
# ----------------------------------------------------------------------


def _g1(n: int, t: float, tol: SeriesTolerance) -> float:
    """G(t) = F[1, 2-n/2; (n+2)/2; t]."""
    b = 2.0 - n / 2.0
    c = (n + 2) / 2.0
    if n % 2 == 0 or t <= 0.9:
        return specfun.hyp2f1(1.0, b, c, t, tol)
    s, oms, w = quadrature._unit_nodes(6)
    vals = oms ** (c - 2.0) * (1.0 - t * s) ** (-b)
    return float((c - 1.0) * np.dot(vals, w))


def _g1_prime(n: int, t: float, tol: SeriesTolerance) -> float:
    """G'(t) = (b/c) F[2, b+1; c+1; t]."""
    b = 2.0 - n / 2.0
    c = (n + 2) / 2.0
    if n % 2 == 0 or t <= 0.9:
        return b / c * specfun.hyp2f1(2.0, b + 1.0, c + 1.0, t, tol)
    big_b, big_c = b + 1.0, c + 1.0
    s, oms, w = quadrature._unit_nodes(6)
    vals = s * oms ** (big_c - 3.0) * (1.0 - t * s) ** (-big_b)
    f2 = (big_c - 1.0) * (big_c - 2.0) * float(np.dot(vals, w))
    return b / c * f2


def log_phi_derivatives(
    n: int, r: float, tol: SeriesTolerance = DEFAULT_TOL
) -> tuple[float, float, float]:
    """(log Phi_n, its d/dr, its d^2/dr^2) at 0 < r < 1.

    The first derivative is the closed form
    (n-1) r ((-2 + 4/n) G(r^2) - 2/(1-r^2)) with
    G = F[1, 2-n/2, (n+2)/2, .]; the second differentiates it once more
    through G' rather than stacking finite differences.
    """
    if not 0.0 < r < 1.0:
        raise DomainError("r must lie strictly between 0 and 1")
    t = r * r
    omt = 1.0 - t
    value = float(log_phi(n, r))
    if n == 2:
        return value, -2.0 * r / omt, -2.0 * (1.0 + t) / (omt * omt)
    coef = -2.0 + 4.0 / n
    g = _g1(n, t, tol)
    gp = _g1_prime(n, t, tol)
    d1 = (n - 1) * r * (coef * g - 2.0 / omt)
    d2 = (n - 1) * (coef * (g + 2.0 * t * gp) - 2.0 * (1.0 + t) / (omt * omt))
    return value, d1, d2


@dataclass(frozen=True)
class WeightOdeReport:
    n: int
    max_residual: float
    worst_r: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.max_residual < self.tolerance


def certify_weight_ode(
    n: int, grid: np.ndarray, tolerance: Optional[float] = None
) -> WeightOdeReport:
    """Max over the grid of |Delta_h log Phi_n + 4(n-1)^2|."""
    if tolerance is None:
        tolerance = 1e-10 if n == 2 else 1e-6
    target = -4.0 * (n - 1) ** 2
    profile = RadialFunction(
        value=lambda rr: float(log_phi(n, rr)),
        d1=lambda rr: log_phi_derivatives(n, rr)[1],
        d2=lambda rr: log_phi_derivatives(n, rr)[2],
    )
    worst = -1.0
    worst_r = float("nan")
    for r in np.asarray(grid, dtype=float):
        res = abs(laplacian_h_radial(profile, float(r), n) - target)
        if res > worst:
            worst, worst_r = res, float(r)
    return WeightOdeReport(n, worst, worst_r, tolerance)


# ----------------------------------------------------------------------
# Normalization and the Bergman-type norm
# ----------------------------------------------------------------------


def radial_weight_integral(
    n: int,
    alpha: float,
    upper: float = 1.0,
    extra_log=None,
    cfg: NumericsConfig = DEFAULT_CONFIG,
) -> float:
    """n * int_0^upper r^(n-1) Phi_n^alpha (1-r^2)^(-n) * exp(extra_log) dr.

    extra_log(r, omr2) adds |f(r)|^2 in log space for radial f. The
    integrand is assembled fully in log space: the endpoint behavior
    (1-r^2)^(alpha(n-1)-n) is integrable for alpha > 1 and tanh-sinh
    absorbs the algebraic singularity.
    """

    def integrand(r: np.ndarray, omr2: np.ndarray) -> np.ndarray:
        t = r * r
        log_w = (
            (n - 1) * np.log(np.maximum(r, 1e-300))
            + alpha * smooth_exponent(n, np.minimum(t, 1.0))
            + (alpha * (n - 1) - n) * np.log(omr2)
        )
        if extra_log is not None:
            log_w = log_w + extra_log(r, omr2)
        return n * np.exp(log_w)

    res = quadrature.integrate_radial(
        integrand, upper, rel_tol=cfg.quad_rel_tol, max_level=cfg.quad_max_level
    )
    return res.value


def normalization(n: int, alpha: float, cfg: NumericsConfig = DEFAULT_CONFIG) -> float:
    """c(alpha): the constant making the norm of the constant 1 equal 1.

    Defined operationally as 1 / (n int_0^1 r^(n-1) Phi^alpha (1-r^2)^-n dr);
    every downstream quantity is a ratio, so the ambient-measure
    convention cancels.
    """
    if alpha <= 1.0:
        raise DomainError("alpha must exceed 1 for a finite normalization")
    return 1.0 / radial_weight_integral(n, alpha, 1.0, None, cfg)


@dataclass(frozen=True)
class WeightParams:
    """Dimension, exponent, and the derived constants gamma and c(alpha)."""

    n: int
    alpha: float
    gamma: float
    c_alpha: float

    def __post_init__(self) -> None:
        if self.n < 2:
            raise DomainError("n must be >= 2")
        if self.alpha <= 1.0:
            raise DomainError("alpha must be > 1")
        if self.gamma != self.alpha * (self.n - 1) ** 2:
            raise DomainError("gamma must equal alpha (n-1)^2 exactly")

    @staticmethod
    def create(n: int, alpha: float, cfg: NumericsConfig = DEFAULT_CONFIG) -> "WeightParams":
        return WeightParams(n, alpha, alpha * (n - 1) ** 2, normalization(n, alpha, cfg))


@dataclass(frozen=True)
class NormEstimate:
    value: float
    stderr: float
    tail_bound: float
    method: str


# ----------------------------------------------------------------------
# Importance sampling of the weighted measure
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class WeightedSample:
    points: np.ndarray
    r: np.ndarray
    r2: np.ndarray
    omr2: np.ndarray
    chi: np.ndarray
    u: np.ndarray  # quantile in the weighted radial law
    w_theta: np.ndarray  # E[w_theta phi] = c n int phi Phi^a r^(n-1)(1-r^2)^-n dr
    w_tau: np.ndarray  # E[w_tau 1_A] = tau(A) for radial-measurable A
    stratum: np.ndarray


class WeightedSampler:
    """Radial importance sampler for the weighted measure
    c(alpha) n Phi^alpha r^(n-1) (1-r^2)^(-n) dr x uniform directions.

    A monotone interpolant H maps uniform quantiles u to hyperbolic radii
    chi; sample weights carry the exact density ratio g(chi) H'(u), so
    estimates are change-of-variables identities in expectation and the
    interpolation quality only affects variance (near-constant w_theta
    when the table is good). Everything inside r <= r_max; the weighted
    tail beyond is bounded analytically.
    """

    def __init__(self, params: "WeightParams", r_max: float, n_strata: int = 64,
                 table_size: int = 1024):
        from scipy.interpolate import PchipInterpolator

        self.params = params
        self.r_max = r_max
        self.n_strata = n_strata
        n = params.n
        chi_max = geometry.chi_from_r(r_max)
        chi_nodes = np.concatenate(([0.0], np.geomspace(chi_max * 1e-6, chi_max, table_size)))
        gl_x, gl_w = np.polynomial.legendre.leggauss(8)
        lo = chi_nodes[:-1]
        hi = chi_nodes[1:]
        mid = 0.5 * (hi + lo)[:, None]
        half = 0.5 * (hi - lo)[:, None]
        pts = mid + half * gl_x[None, :]
        incr = (self._g(pts.ravel()).reshape(pts.shape) * gl_w[None, :]).sum(axis=1) * half[:, 0]
        cum = np.concatenate(([0.0], np.cumsum(incr)))
        self.total_mass = cum[-1]  # int_0^chi_max g
        u_nodes = cum / cum[-1]
        keep = np.concatenate(([True], np.diff(u_nodes) > 1e-15))
        self._H = PchipInterpolator(u_nodes[keep], chi_nodes[keep])
        self._Hp = self._H.derivative()

    def _g(self, chi: np.ndarray) -> np.ndarray:
        """Unnormalized radial density Phi^alpha(r(chi)) sinh(chi)^(n-1)."""
        n, alpha = self.params.n, self.params.alpha
        r = np.tanh(0.5 * chi)
        omr2 = 2.0 / (1.0 + np.cosh(chi))
        with np.errstate(divide="ignore"):
            log_sinh = np.where(chi > 0, np.log(np.sinh(np.minimum(chi, 700.0))), -np.inf)
            log_g = alpha * log_phi(n, r, omr2) + (n - 1) * log_sinh
        return np.exp(log_g)

    @property
    def theta_mass(self) -> float:
        """Weighted mass of the truncated ball (close to 1 by design)."""
        n = self.params.n
        return self.params.c_alpha * n / 2.0**n * self.total_mass

    def chi_at_quantile(self, u: float) -> float:
        return float(self._H(u))

    def draw(self, rng: np.random.Generator, n_samples: int) -> WeightedSample:
        n = self.params.n
        per = -(-n_samples // self.n_strata)
        total = per * self.n_strata
        stratum = np.repeat(np.arange(self.n_strata), per)
        u = (stratum + rng.random(total)) / self.n_strata
        chi = np.asarray(self._H(u), dtype=float)
        dchi_du = np.asarray(self._Hp(u), dtype=float)
        r = np.tanh(0.5 * chi)
        omr2 = 2.0 / (1.0 + np.cosh(chi))
        g = self._g(chi)
        w_theta = self.params.c_alpha * n / 2.0**n * g * dchi_du
        sinh_pow = np.where(chi > 0, np.sinh(chi) ** (n - 1), 0.0)
        w_tau = n * geometry.unit_ball_volume(n) * sinh_pow * dchi_du
        dirs = rng.standard_normal((total, n))
        norms = np.linalg.norm(dirs, axis=1)
        norms[norms == 0.0] = 1.0
        dirs /= norms[:, None]
        return WeightedSample(
            dirs * r[:, None], r, r * r, omr2, chi, u, w_theta, w_tau, stratum
        )

    @staticmethod
    def for_params(params: "WeightParams", cfg: NumericsConfig = DEFAULT_CONFIG) -> "WeightedSampler":
        r_max = cfg.r_max or sampling.default_r_max(
            params.n, params.alpha, params.c_alpha, cfg.tail_target
        )
        return WeightedSampler(params, r_max, cfg.mc_strata)


def truncation_tail_bound(params: WeightParams, r_max: float, sup_sq: float) -> float:
    """Bound on the weighted mass beyond r_max:
    c n sup|f|^2 * (1/2) (1-r_max^2)^(beta+1) / (beta+1), beta = alpha(n-1)-n."""
    beta = params.alpha * (params.n - 1) - params.n
    omt = 1.0 - r_max * r_max
    return params.c_alpha * params.n * 0.5 * omt ** (beta + 1.0) / (beta + 1.0) * sup_sq


def _norm_axisym(f, params: WeightParams, cfg: NumericsConfig) -> float:
    n = params.n
    theta_nodes, theta_w = quadrature.gauss_legendre(96)
    ang = math.pi * theta_nodes
    cos_t = np.cos(ang)
    sin_pow = np.sin(ang) ** (n - 2)
    bn = math.sqrt(math.pi) * specfun.gamma((n - 1) / 2.0) / specfun.gamma(n / 2.0)
    ang_w = math.pi * theta_w * sin_pow / bn

    def sphere_avg(r: np.ndarray, omr2: np.ndarray) -> np.ndarray:
        log_f2 = 2.0 * f.log_abs_axisym(r, cos_t, omr2)
        return np.exp(log_f2) @ ang_w

    def extra_log(r: np.ndarray, omr2: np.ndarray) -> np.ndarray:
        return np.log(np.maximum(sphere_avg(r, omr2), 1e-300))

    return params.c_alpha * radial_weight_integral(n, params.alpha, 1.0, extra_log, cfg)


def bergman_norm_sq_detailed(
    f, params: WeightParams, cfg: NumericsConfig = DEFAULT_CONFIG,
    sampler: Optional[WeightedSampler] = None,
    rng: Optional[np.random.Generator] = None,
) -> NormEstimate:
    """Weighted squared norm c(alpha) * int |f|^2 Phi^alpha dtau-normalized.

    Radial f: one tanh-sinh integral. A single Moebius-quotient factor
    (axisymmetric about its center): tensor quadrature in (r, angle).
    Everything else: stratified Monte Carlo with radial importance
    weights matched to the weighted measure, truncated at r_max; the
    tail is bounded through Phi^alpha <= (1-r^2)^(alpha(n-1)) and
    reported via TruncationWarning when it matters.
    """
    if not getattr(f, "norm_finite", True):
        raise NonIntegrableError("the weighted norm of this test function diverges")
    n = params.n
    if f.is_radial:
        def extra_log(r, omr2):
            return 2.0 * f.log_abs_radial(r, omr2)

        val = params.c_alpha * radial_weight_integral(n, params.alpha, 1.0, extra_log, cfg)
        return NormEstimate(val, 0.0, 0.0, "radial-quadrature")
    if getattr(f, "axisym_axis", None) is not None:
        val = _norm_axisym(f, params, cfg)
        return NormEstimate(val, 0.0, 0.0, "axisym-quadrature")
    if sampler is None:
        sampler = WeightedSampler.for_params(params, cfg)
    if rng is None:
        rng = sampling.rng_from_seed(cfg.mc_seed)
    sample = sampler.draw(rng, cfg.mc_samples)
    vals = np.exp(2.0 * f.log_abs(sample.points, sample.r2, sample.omr2)) * sample.w_theta
    value, stderr_val = sampling.stratified_mean(vals, sample.stratum, sampler.n_strata)
    tail = truncation_tail_bound(params, sampler.r_max, f.sup_sq_bound(sampler.r_max))
    if tail > cfg.tail_target * max(value, 1e-300):
        warnings.warn(
            TruncationWarning(
                f"truncated-ball tail bound {tail:.3e} exceeds "
                f"{cfg.tail_target:.1e} of the estimate {value:.6e}"
            )
        )
    return NormEstimate(value, stderr_val, tail, "monte-carlo")


def bergman_norm_sq(f, params: WeightParams, cfg: NumericsConfig = DEFAULT_CONFIG) -> float:
    return bergman_norm_sq_detailed(f, params, cfg).value
