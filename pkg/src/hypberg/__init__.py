"""hypberg: sharp concentration bounds for weighted Bergman-type spaces
on the hyperbolic unit ball, with numerically certified identities and
wavelet-window diagnostics.

Modules
-------
specfun        hypergeometric series, Gamma, modified Bessel functions
quadrature     tanh-sinh / double-exponential integration engines
geometry       ball-model Moebius maps, invariant measure, isoperimetry
weights        the radial weights Phi_n and the weighted norm
bounds         the sharp bound theta(s), its inverse, and certifications
sampling       seeded stratified Monte Carlo over the invariant measure
concentration  quotients R_n(f, Omega), rearrangements, fuzz testing
wavelet        admissible windows and the log-subharmonicity failure
cli            command-line interface over all certifications
"""

from . import (  # noqa: F401
    bounds,
    concentration,
    config,
    errors,
    geometry,
    quadrature,
    sampling,
    specfun,
    wavelet,
    weights,
)
from .config import DEFAULT_CONFIG, NumericsConfig  # noqa: F401
from .weights import WeightParams  # noqa: F401

__version__ = "0.1.0"
