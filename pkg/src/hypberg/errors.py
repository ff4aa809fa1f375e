"""Exception and warning types shared across the package."""


class HypbergError(Exception):
    """Base class for all package errors."""


class DomainError(HypbergError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class NonConvergenceError(HypbergError):
    """A series hit its term cap before the tail bound was satisfied."""


class QuadratureFailure(HypbergError):
    """A quadrature rule did not stabilize under refinement."""


class StencilOutsideBallError(HypbergError):
    """A finite-difference stencil point left the unit ball."""


class StencilError(HypbergError):
    """A finite-difference stencil point left the upper half-space."""


class OverflowRangeError(HypbergError):
    """Argument beyond the documented overflow threshold."""


class NonMonotoneRadialError(HypbergError):
    """The radial superlevel path was requested for a non-monotone profile."""


class NoWitnessFoundError(HypbergError):
    """The negativity-witness grid search found no certified point."""


class NonIntegrableError(HypbergError):
    """The requested weighted integral diverges for this test function."""


class TruncationWarning(UserWarning):
    """Monte Carlo integration truncated the ball; carries the tail bound."""


class MCVarianceWarning(UserWarning):
    """Monte Carlo standard error exceeded the requested tolerance."""
