"""Concentration quotients, admissible test functions, rearrangements,
and the randomized stress test of the sharp bound.

Test functions are the multiplicative family whose log-modulus is
invariant-subharmonic by construction: the constant 1, Moebius quotient
factors Phi^(alpha/2)(|m(x)|) / Phi^(alpha/2)(|x|), exponentials of the
invariant Poisson kernel, and finite powers/products of those. All are
positive, so everything is evaluated in log space.

A note on the exponential family: exp(lambda P_h(., zeta)) has infinite
weighted norm for every lambda > 0 (the kernel blows up like
(1-r)^(1-n) along the ray toward zeta and beats every algebraic
weight), so norm-bearing operations reject lambda > 0 and the fuzz
generator draws lambda in [-2, 0]. Positive lambda remains evaluable
pointwise and is exercised by the boundary-decay check along the
antipodal ray.

Monte Carlo quotients always compare mass inside Omega against mass of
the same samples, so R is exactly in [0, 1], monotone in Omega on shared
samples, and scale-invariant. The truncation to r <= r_max replaces
Omega by its intersection with the sampled ball, which is itself an
admissible set of no larger measure; the inequality being tested is
therefore valid verbatim on the truncated data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import bounds, geometry, sampling, weights
from .config import DEFAULT_CONFIG, NumericsConfig
from .errors import (
    DomainError,
    MCVarianceWarning,
    NonIntegrableError,
    NonMonotoneRadialError,
)
from .geometry import MobiusMap
from .weights import WeightParams

_UNIT_BALL_MARGIN = 1.0 - 1e-14


# ----------------------------------------------------------------------
# Test functions
# ----------------------------------------------------------------------


class TestFunction:
    """Base: positive functions with invariant-subharmonic log."""

    is_radial: bool = False
    norm_finite: bool = True

    @property
    def axisym_axis(self) -> Optional[np.ndarray]:
        return None

    def log_abs(self, X: np.ndarray, r2=None, omr2=None) -> np.ndarray:
        raise NotImplementedError

    def log_abs_radial(self, r: np.ndarray, omr2: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def log_abs_axisym(self, r: np.ndarray, cos_t: np.ndarray, omr2: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def sup_sq_bound(self, r_from: float) -> float:
        raise NotImplementedError

    def log_abs_point(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        r2 = float(np.dot(x, x))
        if r2 >= 1.0:
            raise DomainError("point outside the open unit ball")
        return float(self.log_abs(x[None, :], np.array([r2]), np.array([1.0 - r2]))[0])


def _fill_r2_omr2(X, r2, omr2):
    if r2 is None:
        r2 = np.einsum("ij,ij->i", X, X)
    if omr2 is None:
        omr2 = 1.0 - r2
    return r2, omr2


@dataclass(frozen=True)
class One(TestFunction):
    """The constant function 1."""

    is_radial = True

    def log_abs(self, X, r2=None, omr2=None):
        return np.zeros(np.asarray(X).shape[0])

    def log_abs_radial(self, r, omr2):
        return np.zeros_like(np.asarray(r, dtype=float))

    def sup_sq_bound(self, r_from):
        return 1.0


@dataclass(frozen=True)
class Extremizer(TestFunction):
    """g(x) = Phi_n^(alpha/2)(|m(x)|) / Phi_n^(alpha/2)(|x|).

    The ratio is assembled through
    (1-|m(x)|^2)/(1-|x|^2) = (1-|a|^2)/rho(x,a), which keeps it finite
    and accurate up to the boundary, where numerator and denominator
    vanish at matched order.
    """

    map: MobiusMap
    params: WeightParams

    @property
    def is_radial(self) -> bool:  # type: ignore[override]
        return float(np.linalg.norm(self.map.center)) == 0.0

    @property
    def axisym_axis(self) -> Optional[np.ndarray]:
        a = self.map.center
        norm = float(np.linalg.norm(a))
        return None if norm == 0.0 else a / norm

    def _log_ratio(self, rho: np.ndarray, t_x: np.ndarray, omr2: np.ndarray) -> np.ndarray:
        n = self.params.n
        a2 = float(np.dot(self.map.center, self.map.center))
        om_tm = (1.0 - a2) * omr2 / rho  # 1 - |m(x)|^2
        t_m = np.clip(1.0 - om_tm, 0.0, 1.0)
        psi = weights.smooth_exponent
        log_ratio = (n - 1) * (math.log(1.0 - a2) - np.log(rho)) + psi(n, t_m) - psi(
            n, np.clip(t_x, 0.0, 1.0)
        )
        return 0.5 * self.params.alpha * log_ratio

    def log_abs(self, X, r2=None, omr2=None):
        r2, omr2 = _fill_r2_omr2(X, r2, omr2)
        rho = self.map.rho_many(X)
        return self._log_ratio(rho, r2, omr2)

    def log_abs_radial(self, r, omr2):
        if not self.is_radial:
            raise NonMonotoneRadialError("extremizer with nonzero center is not radial")
        return np.zeros_like(np.asarray(r, dtype=float))

    def log_abs_axisym(self, r, cos_t, omr2):
        a_norm = float(np.linalg.norm(self.map.center))
        r = np.asarray(r, dtype=float)[:, None]
        omr2 = np.asarray(omr2, dtype=float)[:, None]
        cos_t = np.asarray(cos_t, dtype=float)[None, :]
        rho = 1.0 - 2.0 * a_norm * r * cos_t + (r * a_norm) ** 2
        return self._log_ratio(rho, r * r, omr2)

    def sup_sq_bound(self, r_from):
        n, alpha = self.params.n, self.params.alpha
        a_norm = float(np.linalg.norm(self.map.center))
        psi_span = abs(math.log(weights.sandwich_constant(n)))
        return math.exp(
            alpha * ((n - 1) * math.log((1.0 + a_norm) / (1.0 - a_norm)) + psi_span)
        )


@dataclass(frozen=True)
class ExpHarmonic(TestFunction):
    """exp(lambda P_h(., zeta)): exponential of an invariant-harmonic kernel."""

    lam: float
    zeta: np.ndarray

    def __post_init__(self) -> None:
        z = np.asarray(self.zeta, dtype=float)
        object.__setattr__(self, "zeta", z / np.linalg.norm(z))

    @property
    def is_radial(self) -> bool:  # type: ignore[override]
        return self.lam == 0.0

    @property
    def norm_finite(self) -> bool:  # type: ignore[override]
        return self.lam <= 0.0

    @property
    def axisym_axis(self) -> Optional[np.ndarray]:
        return None if self.lam == 0.0 else self.zeta

    def log_abs(self, X, r2=None, omr2=None):
        r2, omr2 = _fill_r2_omr2(X, r2, omr2)
        n = np.asarray(X).shape[1]
        diff = X - self.zeta[None, :]
        d2 = np.einsum("ij,ij->i", diff, diff)
        return self.lam * (omr2 / d2) ** (n - 1)

    def log_abs_radial(self, r, omr2):
        return np.zeros_like(np.asarray(r, dtype=float))

    def log_abs_axisym(self, r, cos_t, omr2):
        n = self.zeta.size
        r = np.asarray(r, dtype=float)[:, None]
        omr2 = np.asarray(omr2, dtype=float)[:, None]
        cos_t = np.asarray(cos_t, dtype=float)[None, :]
        omr = omr2 / (1.0 + r)
        d2 = omr * omr + 2.0 * r * (1.0 - cos_t)
        return self.lam * (omr2 / d2) ** (n - 1)

    def sup_sq_bound(self, r_from):
        if self.lam > 0:
            return math.inf
        return 1.0


@dataclass(frozen=True)
class Power(TestFunction):
    """base^p for p >= 0 (closure of the admissible family under powers)."""

    base: TestFunction
    p: float

    def __post_init__(self) -> None:
        if self.p < 0:
            raise DomainError("power must be >= 0")

    @property
    def is_radial(self) -> bool:  # type: ignore[override]
        return self.base.is_radial

    @property
    def norm_finite(self) -> bool:  # type: ignore[override]
        return self.base.norm_finite

    @property
    def axisym_axis(self) -> Optional[np.ndarray]:
        return self.base.axisym_axis

    def log_abs(self, X, r2=None, omr2=None):
        return self.p * self.base.log_abs(X, r2, omr2)

    def log_abs_radial(self, r, omr2):
        return self.p * self.base.log_abs_radial(r, omr2)

    def log_abs_axisym(self, r, cos_t, omr2):
        return self.p * self.base.log_abs_axisym(r, cos_t, omr2)

    def sup_sq_bound(self, r_from):
        return self.base.sup_sq_bound(r_from) ** self.p


@dataclass(frozen=True)
class Product(TestFunction):
    """Finite product of admissible factors."""

    factors: tuple[TestFunction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "factors", tuple(self.factors))

    @property
    def is_radial(self) -> bool:  # type: ignore[override]
        return all(f.is_radial for f in self.factors)

    @property
    def norm_finite(self) -> bool:  # type: ignore[override]
        return all(f.norm_finite for f in self.factors)

    @property
    def axisym_axis(self) -> Optional[np.ndarray]:
        axis = None
        for f in self.factors:
            if f.is_radial:
                continue
            fa = f.axisym_axis
            if fa is None:
                return None
            if axis is None:
                axis = fa
            elif abs(float(np.dot(axis, fa))) < 1.0 - 1e-12:
                return None
        return axis

    def log_abs(self, X, r2=None, omr2=None):
        r2, omr2 = _fill_r2_omr2(X, r2, omr2)
        out = np.zeros(np.asarray(X).shape[0])
        for f in self.factors:
            out = out + f.log_abs(X, r2, omr2)
        return out

    def log_abs_radial(self, r, omr2):
        out = np.zeros_like(np.asarray(r, dtype=float))
        for f in self.factors:
            out = out + f.log_abs_radial(r, omr2)
        return out

    def log_abs_axisym(self, r, cos_t, omr2):
        out = 0.0
        for f in self.factors:
            if f.is_radial:
                out = out + f.log_abs_radial(r, omr2)[:, None]
            else:
                out = out + f.log_abs_axisym(r, cos_t, omr2)
        return out

    def sup_sq_bound(self, r_from):
        out = 1.0
        for f in self.factors:
            out *= f.sup_sq_bound(r_from)
        return out


@dataclass(frozen=True)
class MobiusShifted(TestFunction):
    """The Moebius action: x -> f(m(x)) Phi^(a/2)(|m(x)|)/Phi^(a/2)(|x|)."""

    base: TestFunction
    map: MobiusMap
    params: WeightParams

    @property
    def norm_finite(self) -> bool:  # type: ignore[override]
        return self.base.norm_finite

    def log_abs(self, X, r2=None, omr2=None):
        r2, omr2 = _fill_r2_omr2(X, r2, omr2)
        a2 = float(np.dot(self.map.center, self.map.center))
        rho = self.map.rho_many(X)
        Y = self.map.apply_many(X)
        omr2_y = (1.0 - a2) * omr2 / rho
        r2_y = np.clip(1.0 - omr2_y, 0.0, 1.0)
        quotient = Extremizer(self.map, self.params).log_abs(X, r2, omr2)
        return self.base.log_abs(Y, r2_y, omr2_y) + quotient

    def sup_sq_bound(self, r_from):
        return self.base.sup_sq_bound(0.0) * Extremizer(self.map, self.params).sup_sq_bound(
            r_from
        )


def eval_test_function(f: TestFunction, x: np.ndarray) -> float:
    """Pointwise value (all family members are positive)."""
    return math.exp(f.log_abs_point(np.asarray(x, dtype=float)))


def random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    mtx = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(mtx)
    return q * np.sign(np.diag(r))


# ----------------------------------------------------------------------
# Domains
# ----------------------------------------------------------------------


class DomainSpec:
    """A measurable subset of the ball with a (possibly estimated) measure."""

    measure: float
    measure_err: float

    def contains(self, X: np.ndarray, r: np.ndarray, omr2: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def boundary_chi_distance(self, X, r, omr2) -> np.ndarray:
        raise NotImplementedError("no boundary-distance oracle for this domain")


@dataclass(frozen=True)
class CenteredBall(DomainSpec):
    n: int
    measure: float
    measure_err: float = 0.0

    @property
    def radius(self) -> float:
        return geometry.radius_from_volume(self.n, self.measure)

    def contains(self, X, r, omr2):
        return r < self.radius

    def boundary_chi_distance(self, X, r, omr2):
        chi_b = geometry.chi_from_r(self.radius)
        return np.abs(geometry.chi_from_r(np.minimum(r, _UNIT_BALL_MARGIN)) - chi_b)


@dataclass(frozen=True)
class MobiusBall(DomainSpec):
    """Preimage {x : |m(x)| < v(s)} of a centered ball; tau-measure s."""

    map: MobiusMap
    measure: float
    measure_err: float = 0.0

    @property
    def n(self) -> int:
        return self.map.dim

    @property
    def radius(self) -> float:
        return geometry.radius_from_volume(self.n, self.measure)

    def _om_tm(self, X, omr2):
        a2 = float(np.dot(self.map.center, self.map.center))
        rho = self.map.rho_many(X)
        return (1.0 - a2) * omr2 / rho

    def contains(self, X, r, omr2):
        v = self.radius
        return self._om_tm(X, omr2) > (1.0 - v * v)

    def boundary_chi_distance(self, X, r, omr2):
        om_tm = np.clip(self._om_tm(X, omr2), 1e-300, 1.0)
        r_m = np.sqrt(np.clip(1.0 - om_tm, 0.0, 1.0))
        chi_b = geometry.chi_from_r(self.radius)
        return np.abs(geometry.chi_from_r(np.minimum(r_m, _UNIT_BALL_MARGIN)) - chi_b)


@dataclass(frozen=True)
class Predicate(DomainSpec):
    """Indicator-defined set.

    measure_bound, when finite, is an a-priori upper bound on the tau
    measure (e.g. subadditivity for unions of declared-measure parts);
    otherwise the measure is estimated by sampling.
    """

    indicator: Callable[[np.ndarray], np.ndarray]
    measure: float = math.nan
    measure_err: float = math.nan
    measure_bound: float = math.inf
    label: str = "predicate"
    bdist: Optional[Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]] = None

    def contains(self, X, r, omr2):
        return np.asarray(self.indicator(X), dtype=bool)

    def boundary_chi_distance(self, X, r, omr2):
        if self.bdist is None:
            raise NotImplementedError("no boundary-distance oracle for this predicate")
        return self.bdist(X, r, omr2)


def half_space_cap(c: float, label: str = "cap") -> Predicate:
    """Omega = {x_1 > c} intersected with the ball (infinite tau measure)."""
    return Predicate(indicator=lambda X: X[:, 0] > c, label=label)


def union_domain(parts: Sequence[DomainSpec], label: str = "union") -> Predicate:
    measure_bound = math.inf
    if all(math.isfinite(p.measure) for p in parts):
        measure_bound = float(sum(p.measure for p in parts))

    def indicator(X):
        r = np.sqrt(np.einsum("ij,ij->i", X, X))
        omr2 = 1.0 - r * r
        out = np.zeros(X.shape[0], dtype=bool)
        for p in parts:
            out |= p.contains(X, r, omr2)
        return out

    def bdist(X, r, omr2):
        dists = [p.boundary_chi_distance(X, r, omr2) for p in parts]
        return np.min(np.stack(dists, axis=0), axis=0)

    return Predicate(indicator=indicator, measure_bound=measure_bound, label=label, bdist=bdist)


# ----------------------------------------------------------------------
# The concentration quotient
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class QuotientResult:
    value: float
    stderr: float
    s_used: float
    s_err: float
    shell_slack: float
    method: str


_SHELL_QUANTILE = 1.0 - 1e-4


def concentration_quotient(
    f: TestFunction,
    omega: DomainSpec,
    params: WeightParams,
    cfg: NumericsConfig = DEFAULT_CONFIG,
    sampler: Optional[weights.WeightedSampler] = None,
    rng: Optional[np.random.Generator] = None,
    tau_sampler: Optional[sampling.TauSampler] = None,
) -> QuotientResult:
    """R_n(f, Omega): the fraction of weighted mass of f inside Omega.

    Radial f on a centered ball reduces to one-dimensional quadrature
    (zero standard error); everything else is stratified Monte Carlo
    with radial importance weights, numerator and denominator on shared
    samples, so the value lies in [0, 1] exactly.

    Declared-measure domains report (s, 0). Predicate domains report the
    tau-measure of Omega intersected with the inner ball holding all but
    1e-4 of the weighted mass -- estimated by a flat-weight tau sampler
    -- plus shell_slack, a high-probability bound on the weighted mass
    fraction outside that inner ball. The inequality R <= theta(s) on
    the sampled data is then implied by the exact inequality applied to
    Omega cut to the inner ball.
    """
    if not f.norm_finite:
        raise NonIntegrableError("quotient undefined: the weighted norm diverges")
    n = params.n
    if f.is_radial and isinstance(omega, CenteredBall):
        def extra_log(r, omr2):
            return 2.0 * f.log_abs_radial(r, omr2)

        num = weights.radial_weight_integral(n, params.alpha, omega.radius, extra_log, cfg)
        den = weights.radial_weight_integral(n, params.alpha, 1.0, extra_log, cfg)
        return QuotientResult(num / den, 0.0, omega.measure, 0.0, 0.0, "radial-quadrature")
    if sampler is None:
        sampler = weights.WeightedSampler.for_params(params, cfg)
    if rng is None:
        rng = sampling.rng_from_seed(cfg.mc_seed)
    sample = sampler.draw(rng, cfg.mc_samples)
    v = np.exp(2.0 * f.log_abs(sample.points, sample.r2, sample.omr2)) * sample.w_theta
    member = omega.contains(sample.points, sample.r, sample.omr2)
    ratio, stderr = sampling.stratified_ratio(v * member, v, sample.stratum, sampler.n_strata)
    if isinstance(omega, (CenteredBall, MobiusBall)):
        s_used, s_err, slack = omega.measure, 0.0, 0.0
    elif math.isfinite(getattr(omega, "measure_bound", math.inf)):
        s_used, s_err, slack = omega.measure_bound, 0.0, 0.0
    else:
        # inner-ball measure with bounded-weight tau sampling
        r_in = math.tanh(0.5 * sampler.chi_at_quantile(_SHELL_QUANTILE))
        if tau_sampler is None or abs(tau_sampler.r_max - r_in) > 1e-12:
            tau_sampler = sampling.TauSampler(n, r_in, sampler.n_strata)
        tsample = tau_sampler.draw(rng, cfg.mc_samples)
        inner = omega.contains(tsample.points, tsample.r, tsample.omr2).astype(float)
        frac, frac_err = sampling.stratified_mean(inner, tsample.stratum, tau_sampler.n_strata)
        s_used = tau_sampler.tau_mass * frac
        s_err = tau_sampler.tau_mass * frac_err
        shell = sample.u > _SHELL_QUANTILE
        shell_frac, shell_err = sampling.stratified_ratio(
            v * shell, v, sample.stratum, sampler.n_strata
        )
        slack = shell_frac + 3.0 * shell_err
    if stderr > 0.05:
        warnings.warn(MCVarianceWarning(f"quotient standard error {stderr:.3g} is large"))
    return QuotientResult(ratio, stderr, s_used, s_err, slack, "monte-carlo")


# ----------------------------------------------------------------------
# Distribution function, rearrangement, I_n
# ----------------------------------------------------------------------


@dataclass
class SuperlevelProfile:
    """Tables for mu (distribution of u = |f|^2 Phi^alpha w.r.t. tau),
    the decreasing rearrangement u*, and I_n(s) = integral of u over its
    own superlevel set of measure s, normalized so I_n(inf) = 1."""

    s_grid: np.ndarray
    u_star: np.ndarray
    i_n: np.ndarray
    i_n_stderr: np.ndarray
    method: str
    params: WeightParams
    _radial_norm: float = 0.0
    _f: Optional[TestFunction] = None

    def u_star_at(self, s: float) -> float:
        if self.method == "radial-exact":
            return _radial_u_hat(self._f, self.params, s, self._radial_norm)
        return float(np.interp(s, self.s_grid, self.u_star))

    def i_n_at(self, s: float) -> float:
        if self.method == "radial-exact":
            return _radial_i_n(self._f, self.params, s, self._radial_norm)
        return float(np.interp(s, self.s_grid, self.i_n))

    def mu_at(self, t: float) -> float:
        """Distribution function tau({u > t}); radial-exact path only."""
        if self.method != "radial-exact":
            raise NonMonotoneRadialError("mu inversion available on the radial path only")
        lo, hi = self.s_grid[0] * 1e-6, self.s_grid[-1] * 1e6
        for _ in range(200):
            mid = math.sqrt(lo * hi)
            if self.u_star_at(mid) > t:
                lo = mid
            else:
                hi = mid
            if hi / lo < 1.0 + 1e-12:
                break
        return math.sqrt(lo * hi)


def _radial_u_hat(f: TestFunction, params: WeightParams, s: float, norm: float) -> float:
    """u(v(s)) in the normalization with total mass one."""
    n = params.n
    v = geometry.radius_from_volume(n, s)
    omr2 = 1.0 - v * v
    log_u = 2.0 * float(f.log_abs_radial(np.array([v]), np.array([omr2]))[0]) + params.alpha * float(
        weights.log_phi(n, v)
    )
    scale = params.c_alpha / (2.0**n * geometry.unit_ball_volume(n) * norm)
    return scale * math.exp(log_u)


def _radial_i_n(f: TestFunction, params: WeightParams, s: float, norm: float) -> float:
    n = params.n
    v = geometry.radius_from_volume(n, s)

    def extra_log(r, omr2):
        return 2.0 * f.log_abs_radial(r, omr2)

    val = params.c_alpha * weights.radial_weight_integral(n, params.alpha, v, extra_log)
    return val / norm


def superlevel_profile(
    f: TestFunction,
    params: WeightParams,
    cfg: NumericsConfig = DEFAULT_CONFIG,
    s_grid: Optional[np.ndarray] = None,
    sampler: Optional[sampling.TauSampler] = None,
    rng: Optional[np.random.Generator] = None,
) -> SuperlevelProfile:
    """Build mu / u* / I_n tables.

    Radial, strictly decreasing u: superlevel sets are centered balls and
    everything reduces to exact quadrature. Otherwise: a weighted Monte
    Carlo histogram; plateaus resolve by right-continuity of the
    empirical distribution, matching the infimum definition of u*.
    """
    if s_grid is None:
        s_grid = np.geomspace(0.05, 50.0, 50)
    s_grid = np.asarray(s_grid, dtype=float)
    if f.is_radial:
        # monotonicity check of u(r) on a probe grid
        probe = np.linspace(1e-3, 1.0 - 1e-6, 400)
        omr2 = (1.0 - probe) * (1.0 + probe)
        log_u = 2.0 * f.log_abs_radial(probe, omr2) + params.alpha * weights.log_phi(
            params.n, probe, omr2
        )
        if np.any(np.diff(log_u) >= 0):
            raise NonMonotoneRadialError("radial path requires strictly decreasing u")
        norm = weights.bergman_norm_sq(f, params, cfg)
        prof = SuperlevelProfile(
            s_grid=s_grid,
            u_star=np.empty_like(s_grid),
            i_n=np.empty_like(s_grid),
            i_n_stderr=np.zeros_like(s_grid),
            method="radial-exact",
            params=params,
            _radial_norm=norm,
            _f=f,
        )
        prof.u_star = np.array([_radial_u_hat(f, params, s, norm) for s in s_grid])
        prof.i_n = np.array([_radial_i_n(f, params, s, norm) for s in s_grid])
        return prof
    if not f.norm_finite:
        raise NonIntegrableError("superlevel profile needs a finite norm")
    if sampler is None:
        sampler = weights.WeightedSampler.for_params(params, cfg)
    if rng is None:
        rng = sampling.rng_from_seed(cfg.mc_seed)
    sample = sampler.draw(rng, cfg.mc_samples)
    log_u = 2.0 * f.log_abs(sample.points, sample.r2, sample.omr2) + params.alpha * weights.log_phi(
        params.n, sample.r, sample.omr2
    )
    v = np.exp(2.0 * f.log_abs(sample.points, sample.r2, sample.omr2)) * sample.w_theta
    total = v.mean()  # estimates the (truncated) squared norm
    order = np.argsort(-log_u)
    n_tot = v.size
    # superlevel sets of u are nested along the sorted order: mass and
    # tau-measure accumulate together (right-continuity resolves plateaus)
    cum_mass = np.cumsum(v[order]) / (n_tot * total)
    cum_s = np.cumsum(sample.w_tau[order]) / n_tot
    i_vals = np.interp(s_grid, cum_s, cum_mass, left=0.0, right=1.0)
    scale = params.c_alpha / (2.0**params.n * geometry.unit_ball_volume(params.n))
    norm_est = total
    u_hat_sorted = np.exp(log_u[order]) * scale / norm_est
    u_vals = np.interp(s_grid, cum_s, u_hat_sorted, right=0.0)
    errs = np.empty_like(s_grid)
    log_u_thresholds = np.interp(s_grid, cum_s, log_u[order], right=-np.inf)
    for i in range(s_grid.size):
        z = v * (log_u > log_u_thresholds[i])
        _, e = sampling.stratified_mean(z, sample.stratum, sampler.n_strata)
        errs[i] = e / total
    return SuperlevelProfile(
        s_grid=s_grid,
        u_star=u_vals,
        i_n=i_vals,
        i_n_stderr=errs,
        method="monte-carlo",
        params=params,
    )


# ----------------------------------------------------------------------
# Randomized stress test of the main inequality
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class FuzzTrial:
    index: int
    f_label: str
    omega_label: str
    s_used: float
    s_err: float
    quotient: float
    stderr: float
    bound: float
    deficit: float

    @property
    def violated(self) -> bool:
        return self.deficit < 0.0


@dataclass(frozen=True)
class FuzzReport:
    trials: tuple[FuzzTrial, ...]
    violations: int
    min_deficit: float
    max_deficit: float


def _random_test_function(rng: np.random.Generator, params: WeightParams) -> tuple[TestFunction, str]:
    n = params.n
    n_factors = int(rng.integers(1, 4))
    factors = []
    labels = []
    for _ in range(n_factors):
        kind = rng.random()
        if kind < 0.45:
            a = rng.standard_normal(n)
            a *= rng.uniform(0.05, 0.7) / np.linalg.norm(a)
            q = random_rotation(rng, n) if rng.random() < 0.3 else np.eye(n)
            factors.append(Extremizer(MobiusMap(a, q), params))
            labels.append(f"ext(|a|={np.linalg.norm(a):.2f})")
        elif kind < 0.85:
            lam = rng.uniform(-2.0, 0.0)
            zeta = rng.standard_normal(n)
            factors.append(ExpHarmonic(lam, zeta))
            labels.append(f"exph({lam:.2f})")
        else:
            factors.append(One())
            labels.append("one")
    if rng.random() < 0.4:
        idx = int(rng.integers(0, len(factors)))
        p = rng.uniform(0.3, 1.5)
        factors[idx] = Power(factors[idx], p)
        labels[idx] = f"{labels[idx]}^{p:.2f}"
    f: TestFunction = factors[0] if len(factors) == 1 else Product(tuple(factors))
    return f, "*".join(labels)


def _random_domain(
    rng: np.random.Generator, params: WeightParams
) -> tuple[DomainSpec, str]:
    n = params.n
    kind = rng.random()
    s = float(np.exp(rng.uniform(math.log(0.1), math.log(30.0))))
    if kind < 0.3:
        return CenteredBall(n, s), f"ball(s={s:.2f})"
    if kind < 0.6:
        a = rng.standard_normal(n)
        a *= rng.uniform(0.05, 0.6) / np.linalg.norm(a)
        return MobiusBall(MobiusMap.translation(a), s), f"mball(s={s:.2f},|a|={np.linalg.norm(a):.2f})"
    if kind < 0.8:
        c = rng.uniform(0.1, 0.7)
        return half_space_cap(c), f"cap(c={c:.2f})"
    s2 = float(np.exp(rng.uniform(math.log(0.1), math.log(10.0))))
    a = rng.standard_normal(n)
    a *= rng.uniform(0.3, 0.6) / np.linalg.norm(a)
    parts = (CenteredBall(n, s), MobiusBall(MobiusMap.translation(a), s2))
    return union_domain(parts, "two-balls"), f"two-balls(s={s:.2f}+{s2:.2f})"


def fuzz_main_inequality(
    trials: int,
    params: WeightParams,
    cfg: NumericsConfig = DEFAULT_CONFIG,
    seed: int = 0,
    profile: Optional[bounds.ThetaProfile] = None,
    include_equality_family: bool = False,
) -> FuzzReport:
    """Randomized (f, Omega) pairs; asserts R <= theta(s + 3 s_err) + 3 stderr.

    The theta lookup goes through the cached profile table (certified
    separately against direct quadrature); a 1e-5 slack absorbs table
    interpolation and truncation bias. Violations are recorded, not
    raised; the caller's suite fails on any.
    """
    if profile is None:
        profile = bounds.ThetaProfile(params, cfg)
    sampler = weights.WeightedSampler.for_params(params, cfg)
    r_in = math.tanh(0.5 * sampler.chi_at_quantile(_SHELL_QUANTILE))
    tau_sampler = sampling.TauSampler(params.n, r_in, sampler.n_strata)
    rngs = sampling.spawn_rngs(seed, trials)
    records = []
    for i, rng in enumerate(rngs):
        if include_equality_family:
            a = rng.standard_normal(params.n)
            a *= rng.uniform(0.05, 0.7) / np.linalg.norm(a)
            m = MobiusMap.translation(a)
            f, f_label = Extremizer(m, params), f"ext(|a|={np.linalg.norm(a):.2f})"
            s = float(np.exp(rng.uniform(math.log(0.5), math.log(20.0))))
            omega, o_label = MobiusBall(m, s), f"mball-matched(s={s:.2f})"
        else:
            f, f_label = _random_test_function(rng, params)
            omega, o_label = _random_domain(rng, params)
        res = concentration_quotient(
            f, omega, params, cfg, sampler=sampler, rng=rng, tau_sampler=tau_sampler
        )
        s_hi = res.s_used + 3.0 * res.s_err
        bound = float(profile.theta_interp(s_hi)) + res.shell_slack + 3.0 * res.stderr + 1e-5
        records.append(
            FuzzTrial(
                index=i,
                f_label=f_label,
                omega_label=o_label,
                s_used=res.s_used,
                s_err=res.s_err,
                quotient=res.value,
                stderr=res.stderr,
                bound=bound,
                deficit=bound - res.value,
            )
        )
    deficits = [t.deficit for t in records]
    return FuzzReport(
        trials=tuple(records),
        violations=sum(t.violated for t in records),
        min_deficit=min(deficits),
        max_deficit=max(deficits),
    )


# ----------------------------------------------------------------------
# Moebius action and boundary decay
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class MobiusActionReport:
    norm_f: float
    norm_g: float
    stderr: float
    min_laplacian: float
    fd_tolerance: float

    @property
    def norms_equal(self) -> bool:
        tol = 3.0 * self.stderr + 1e-6 * max(self.norm_f, 1.0)
        return abs(self.norm_f - self.norm_g) <= tol

    @property
    def log_subharmonic(self) -> bool:
        return self.min_laplacian >= -self.fd_tolerance

    @property
    def passed(self) -> bool:
        return self.norms_equal and self.log_subharmonic


def certify_mobius_action(
    f: TestFunction,
    m: MobiusMap,
    params: WeightParams,
    cfg: NumericsConfig = DEFAULT_CONFIG,
    fd_tolerance: float = 1e-5,
    n_lap_points: int = 16,
) -> MobiusActionReport:
    """Checks that the Moebius action preserves the norm and keeps the
    log-modulus invariant-subharmonic (sampled finite differences)."""
    g = MobiusShifted(f, m, params)
    nf = weights.bergman_norm_sq_detailed(f, params, cfg)
    ng = weights.bergman_norm_sq_detailed(g, params, cfg)
    stderr = math.hypot(nf.stderr, ng.stderr)
    rng = sampling.rng_from_seed(cfg.mc_seed + 17)
    worst = math.inf
    scale_probe = 1.0
    for _ in range(n_lap_points):
        x = rng.standard_normal(params.n)
        x *= rng.uniform(0.05, 0.7) / np.linalg.norm(x)
        val = geometry.laplacian_h_fd(lambda p: g.log_abs_point(p), x, h=5e-4)
        scale_probe = max(scale_probe, abs(g.log_abs_point(x)))
        worst = min(worst, val)
    return MobiusActionReport(nf.value, ng.value, stderr, worst, fd_tolerance * scale_probe)


@dataclass(frozen=True)
class DecayRay:
    direction: np.ndarray
    values: np.ndarray
    passed: bool


def boundary_decay_check(
    f: TestFunction,
    params: WeightParams,
    directions: Optional[Sequence[np.ndarray]] = None,
    seed: int = 7,
) -> list[DecayRay]:
    """Samples |f(r zeta)|^2 (1-r^2)^alpha on r -> 1 and asserts a
    monotone-to-zero tail below 1e-3 * 2^alpha * sup-bound at r = 1-1e-4.

    Rays along which an ExpHarmonic factor with positive exponent blows
    up are excluded (checked along the antipode instead), matching the
    kernel's known boundary behavior.
    """
    n, alpha = params.n, params.alpha
    rng = sampling.rng_from_seed(seed)
    if directions is None:
        dirs = []
        for _ in range(4):
            d = rng.standard_normal(n)
            dirs.append(d / np.linalg.norm(d))
        for g in _walk_factors(f):
            if isinstance(g, ExpHarmonic) and g.lam > 0:
                dirs.append(-g.zeta)
            elif isinstance(g, Extremizer) and g.axisym_axis is not None:
                dirs.append(g.axisym_axis)
                dirs.append(-g.axisym_axis)
    else:
        dirs = [np.asarray(d, dtype=float) for d in directions]
    dirs = [d for d in dirs if not _blows_up_along(f, d)]
    rs = 1.0 - np.geomspace(1e-1, 1e-4, 16)
    omr2 = (1.0 - rs) * (1.0 + rs)
    out = []
    threshold = 1e-3 * 2.0**alpha * min(f.sup_sq_bound(0.99), 1e6)
    for d in dirs:
        X = rs[:, None] * d[None, :]
        vals = np.exp(2.0 * f.log_abs(X, rs * rs, omr2) + alpha * np.log(omr2))
        tail = vals[-6:]
        ok = bool(vals[-1] < threshold and np.all(np.diff(tail) <= 1e-12))
        out.append(DecayRay(d, vals, ok))
    return out


def _walk_factors(f: TestFunction):
    if isinstance(f, Product):
        for g in f.factors:
            yield from _walk_factors(g)
    elif isinstance(f, Power):
        yield from _walk_factors(f.base)
    else:
        yield f


def _blows_up_along(f: TestFunction, d: np.ndarray) -> bool:
    for g in _walk_factors(f):
        if isinstance(g, ExpHarmonic) and g.lam > 0:
            if float(np.dot(d, g.zeta)) > 0.95:
                return True
    return False


# ----------------------------------------------------------------------
# Collar perimeter for sampled domains
# ----------------------------------------------------------------------


def perimeter_collar(
    omega: DomainSpec,
    n: int,
    sampler: sampling.TauSampler,
    rng: np.random.Generator,
    n_samples: int = 1 << 16,
    eps: float = 1e-3,
) -> tuple[float, float]:
    """Perimeter estimate tau(collar)/eps with a hyperbolic collar of
    width eps around the boundary (measure-derivative method)."""
    sample = sampler.draw(rng, n_samples)
    dist = omega.boundary_chi_distance(sample.points, sample.r, sample.omr2)
    inside = (dist < 0.5 * eps).astype(float)
    frac, err = sampling.stratified_mean(inside, sample.stratum, sampler.n_strata)
    return sampler.tau_mass * frac / eps, sampler.tau_mass * err / eps
