"""Seeded, stratified Monte Carlo sampling of the invariant measure.

Points are drawn from tau restricted to a ball r <= r_max: the radial
cumulative measure is inverted exactly through the hyperbolic-radius
solver (stratified uniforms in measure space), directions are uniform on
the sphere. Samplers are deterministic given a seed; independent trials
use numpy SeedSequence spawning so merged results do not depend on
evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry, specfun
from .config import DEFAULT_CONFIG, NumericsConfig


def rng_from_seed(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Deterministic independent substreams, one per trial."""
    seqs = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(s)) for s in seqs]


def default_r_max(n: int, alpha: float, c_alpha: float, tail_target: float = 1e-6) -> float:
    """Truncation radius making the weighted tail of the *norm of 1* fall
    below tail_target: solves c n/2 (1-r^2)^(beta+1)/(beta+1) = target
    with beta = alpha(n-1) - n, floored so 1-r^2 >= 1e-13.
    """
    beta = alpha * (n - 1) - n
    omt = (2.0 * (beta + 1.0) * tail_target / (c_alpha * n)) ** (1.0 / (beta + 1.0))
    omt = min(max(omt, 1e-13), 0.5)
    return math.sqrt(1.0 - omt)


@dataclass(frozen=True)
class Sample:
    points: np.ndarray  # (N, n)
    r: np.ndarray
    r2: np.ndarray
    omr2: np.ndarray  # 1 - r^2, computed from the hyperbolic radius
    stratum: np.ndarray  # stratum index per point


class TauSampler:
    """Exact sampler of tau restricted to the centered ball of radius r_max."""

    def __init__(self, n: int, r_max: float, n_strata: int = 64):
        if not 0.0 < r_max < 1.0:
            raise ValueError("r_max must lie in (0, 1)")
        self.n = n
        self.r_max = r_max
        self.n_strata = n_strata
        self.s_max = geometry.ball_volume_from_chi(n, geometry.chi_from_r(r_max))

    @staticmethod
    def for_params(params, cfg: NumericsConfig = DEFAULT_CONFIG) -> "TauSampler":
        r_max = cfg.r_max or default_r_max(
            params.n, params.alpha, params.c_alpha, cfg.tail_target
        )
        return TauSampler(params.n, r_max, cfg.mc_strata)

    @property
    def tau_mass(self) -> float:
        """tau of the truncated ball."""
        return self.s_max

    @property
    def tau_tilde_mass(self) -> float:
        """Mass in the normalized convention: tau / (2^n omega_n)."""
        return self.s_max / (2.0**self.n * geometry.unit_ball_volume(self.n))

    def draw(self, rng: np.random.Generator, n_samples: int) -> Sample:
        per = -(-n_samples // self.n_strata)  # ceil; keeps strata balanced
        total = per * self.n_strata
        stratum = np.repeat(np.arange(self.n_strata), per)
        u = (stratum + rng.random(total)) / self.n_strata
        s = u * self.s_max
        chi = geometry.chi_from_volume(self.n, s)
        r = np.tanh(0.5 * chi)
        omr2 = 2.0 / (1.0 + np.cosh(chi))  # = 1 - r^2 without cancellation
        dirs = rng.standard_normal((total, self.n))
        norms = np.linalg.norm(dirs, axis=1)
        norms[norms == 0.0] = 1.0
        dirs /= norms[:, None]
        return Sample(dirs * r[:, None], r, r * r, omr2, stratum)


def stratified_mean(values: np.ndarray, stratum: np.ndarray, n_strata: int) -> tuple[float, float]:
    """Mean and its standard error under equal-probability stratification."""
    values = np.asarray(values, dtype=float)
    mean = float(values.mean())
    var_sum = 0.0
    for s_idx in range(n_strata):
        grp = values[stratum == s_idx]
        if grp.size > 1:
            var_sum += grp.var(ddof=1) / grp.size
    stderr = math.sqrt(var_sum) / n_strata
    return mean, stderr


def stratified_ratio(
    num: np.ndarray, den: np.ndarray, stratum: np.ndarray, n_strata: int
) -> tuple[float, float]:
    """Ratio sum(num)/sum(den) on shared samples, with a delta-method
    standard error that respects the stratification."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    den_mean = float(den.mean())
    if den_mean <= 0.0:
        return 0.0, 0.0
    ratio = float(num.mean()) / den_mean
    z = num - ratio * den
    _, z_err = stratified_mean(z, stratum, n_strata)
    return ratio, z_err / den_mean
