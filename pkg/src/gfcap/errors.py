"""Exception types shared across the pipeline."""

from __future__ import annotations


class GfcapError(Exception):
    """Base class for all library errors."""


class InvalidParamsError(GfcapError):
    """Constructor parameters violate a documented precondition."""


class NonTransverseSliceError(GfcapError):
    """The requested height is not generic for this family."""

    def __init__(self, height: float, detail: str = ""):
        self.height = height
        msg = f"slice height {height!r} is not transverse"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DegenerateCrossingError(GfcapError):
    """A self-intersection is too close to tangential to be signed reliably."""


class MissingCriticalPointError(GfcapError):
    """Newton iteration failed from every seed of a crossing."""


class NonGenericFamilyError(GfcapError):
    """An isolated critical point has a (numerically) degenerate Hessian."""


class UndersampledPathError(GfcapError):
    """Tangent direction jumps too much between adjacent path samples."""


class InvalidPathError(GfcapError):
    """Path endpoints do not project to the same double point."""


class UnsupportedDimensionError(GfcapError):
    """The cubical engine only handles difference functions up to dimension 4."""


class BadEtaError(GfcapError):
    """eta does not separate 0 from the nonzero critical values."""


class InsufficientSweepError(GfcapError):
    """The filtration sweep does not extend past all critical values."""


class RuleNotApplicableError(GfcapError):
    """The single-crossing capacity rule needs exactly one double point."""


class InvalidBoxError(GfcapError):
    """A rectangular cylinder does not contain the traced slice."""


class ConfigError(GfcapError):
    """A run configuration failed to parse or validate."""
