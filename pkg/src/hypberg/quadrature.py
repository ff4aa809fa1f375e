"""Deterministic quadrature engines.

Two double-exponential rules do almost all integration work in the
package: a tanh-sinh rule on [0, 1] that tolerates algebraic endpoint
singularities, and an exp-sinh-type rule for integrands on (0, inf) with
exponential decay. Both refine by halving the mesh until two consecutive
levels agree to a relative tolerance, so every value carries an error
estimate. Node tables are cached per level; integrands are evaluated on
whole node arrays.

Integrands on [0, 1] receive both the node x and the distance 1 - x so
that factors like (1 - x)**beta can be computed without cancellation
near the right endpoint.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import QuadratureFailure

_W_MAX_UNIT = 3.7  # |w| beyond this the tanh-sinh weight underflows
_H0 = 0.5


@dataclass(frozen=True)
class QuadResult:
    value: float
    error: float
    levels: int


@lru_cache(maxsize=32)
def _unit_nodes(level: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Tanh-sinh nodes on [0, 1]: (x, 1 - x, weight) at mesh h0 / 2**level."""
    h = _H0 / 2.0**level
    w = np.arange(-_W_MAX_UNIT, _W_MAX_UNIT + h / 2, h)
    s = 0.5 * np.pi * np.sinh(w)
    # 1 - x = (1 - tanh(s)) / 2 = exp(-2s) / (1 + exp(-2s)), stable both ways
    ex = np.exp(-2.0 * s)
    omx = ex / (1.0 + ex)
    x = 1.0 / (1.0 + ex)
    weight = h * 0.25 * np.pi * np.cosh(w) / np.cosh(s) ** 2
    keep = weight > 1e-300
    return x[keep], omx[keep], weight[keep]


def tanhsinh_unit(
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    rel_tol: float = 1e-13,
    max_level: int = 8,
) -> QuadResult:
    """Integrate g(x, 1-x) over [0, 1] with level-doubled tanh-sinh.

    Raises QuadratureFailure when consecutive levels never agree.
    """
    prev = None
    for level in range(2, max_level + 1):
        x, omx, weight = _unit_nodes(level)
        vals = np.asarray(g(x, omx), dtype=float)
        cur = float(np.dot(weight, vals))
        if prev is not None:
            err = abs(cur - prev)
            if err <= rel_tol * max(abs(cur), 1e-300) or err < 1e-300:
                return QuadResult(cur, err, level)
        prev = cur
    raise QuadratureFailure(
        f"tanh-sinh did not stabilize at level {max_level} "
        f"(last delta {abs(cur - prev) if prev is not None else float('nan'):.3e})"
    )


def integrate_radial(
    g: Callable[[np.ndarray, np.ndarray], np.ndarray],
    upper: float,
    rel_tol: float = 1e-13,
    max_level: int = 8,
) -> QuadResult:
    """Integrate g(r, 1-r^2) dr over [0, upper], upper <= 1.

    Uses r = upper * x; 1 - r is assembled as (1-upper) + upper*(1-x) so
    integrands keep full precision against the r = 1 singularity even
    when upper is itself close to 1.
    """
    if not 0.0 <= upper <= 1.0:
        raise ValueError("upper must lie in [0, 1]")
    if upper == 0.0:
        return QuadResult(0.0, 0.0, 0)
    gap = 1.0 - upper

    def h(x: np.ndarray, omx: np.ndarray) -> np.ndarray:
        r = upper * x
        omr = gap + upper * omx
        return g(r, omr * (1.0 + r)) * upper

    return tanhsinh_unit(h, rel_tol=rel_tol, max_level=max_level)


@lru_cache(maxsize=32)
def _halfline_nodes(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Exp-transformed nodes u = exp(w - exp(-w)) on (0, inf)."""
    h = _H0 / 2.0**level
    w = np.arange(-4.2, 7.0 + h / 2, h)
    emw = np.exp(-w)
    u = np.exp(w - emw)
    weight = h * u * (1.0 + emw)
    keep = (u > 1e-300) & (u < 690.0)  # exp(-u) underflows past ~709
    return u[keep], weight[keep]


def de_halfline(
    g: Callable[[np.ndarray], np.ndarray],
    rel_tol: float = 1e-13,
    max_level: int = 8,
) -> QuadResult:
    """Integrate g(u) du over (0, inf) for exponentially decaying g."""
    prev = None
    for level in range(2, max_level + 1):
        u, weight = _halfline_nodes(level)
        cur = float(np.dot(weight, np.asarray(g(u), dtype=float)))
        if prev is not None:
            err = abs(cur - prev)
            if err <= rel_tol * max(abs(cur), 1e-300) or err < 1e-300:
                return QuadResult(cur, err, level)
        prev = cur
    raise QuadratureFailure(f"half-line DE rule did not stabilize at level {max_level}")


@lru_cache(maxsize=16)
def gauss_legendre(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w
