"""Shared numerics configuration."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class NumericsConfig:
    """Knobs for quadrature, series, finite differences and Monte Carlo.

    r_max == 0.0 means "choose automatically" from the truncation-tail
    target; see sampling.default_r_max.
    """

    quad_rel_tol: float = 1e-13
    quad_max_level: int = 8
    series_rel_eps: float = 1e-13
    series_max_terms: int = 500_000
    fd_step: float = 1e-4
    mc_seed: int = 20240 * 7
    mc_samples: int = 8192
    mc_strata: int = 64
    r_max: float = 0.0
    tail_target: float = 1e-6

    def __post_init__(self) -> None:
        if self.quad_rel_tol <= 0 or self.series_rel_eps <= 0:
            raise ValueError("tolerances must be positive")
        if self.mc_samples < self.mc_strata:
            raise ValueError("need at least one sample per stratum")
        if not (0.0 <= self.r_max < 1.0):
            raise ValueError("r_max must lie in [0, 1)")


DEFAULT_CONFIG = NumericsConfig()
