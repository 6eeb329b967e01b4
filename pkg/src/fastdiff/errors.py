"""Exception hierarchy.

Every failure the library raises deliberately is a FastDiffError subclass so
callers (and the CLI) can map failures to the three exit classes: bad input,
numerical failure, violated invariant.
"""


class FastDiffError(Exception):
    """Base class for all library errors."""


# --- bad input / configuration ---------------------------------------------

class ConfigError(FastDiffError):
    """Malformed or inconsistent run configuration."""


class RangeError(FastDiffError, ValueError):
    """Parameter outside its admissible range."""


class DegenerateError(FastDiffError):
    """Parameter combination hits a pole of a derived quantity."""


class GridMismatchError(FastDiffError):
    """Two tabulated fields do not share a grid."""


# --- numerical failures ------------------------------------------------------

class QuadratureError(FastDiffError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class StiffnessError(FastDiffError):
    """ODE step size underflowed before reaching the end of the span."""


class BlowUpError(FastDiffError):
    """ODE solution exceeded the overflow guard."""


class ToleranceError(FastDiffError):
    """Iteration exhausted its budget before reaching tolerance."""


class ExtrapolationError(FastDiffError):
    """Richardson levels disagree; no trustworthy limit."""


class ResolutionError(FastDiffError):
    """Tabulated data does not resolve the scales a check requires."""


class NewtonDivergence(FastDiffError):
    """Newton iteration failed to converge after step-size reduction."""


# --- violated invariants ------------------------------------------------------

class InternalError(FastDiffError):
    """A quantity the theory pins down came out wrong; indicates a bug."""


class NonContractionError(FastDiffError):
    """Picard update ratios stopped contracting; constants are suspect."""


class BoundViolationError(FastDiffError):
    """A proven pointwise bound failed on computed data."""


class PositivityError(FastDiffError):
    """Evolved field lost positivity and step-size reduction could not fix it."""


class SandwichViolationError(FastDiffError):
    """Field left the self-similar sandwich that encloses it."""
