"""Exception types shared across the package."""


class LevelcgError(Exception):
    """Base class for all package errors."""


class DegenerateCritical(LevelcgError):
    """A critical point of the potential has (numerically) vanishing curvature."""


class NoRoots(LevelcgError):
    """The derivative of the potential has no real roots in the scan window."""


class UnsupportedTopology(LevelcgError):
    """The potential does not have the (min, max, min) shape the graph needs."""


class OutOfRange(LevelcgError):
    """An energy lies outside the h-range of the requested edge."""


class NearSaddle(LevelcgError):
    """The energy is inside the exclusion band around the saddle energy."""


class AtSaddlePoint(LevelcgError):
    """A phase point sits (to tolerance) exactly on the saddle of H."""


class Unstable(LevelcgError):
    """A trajectory left the escape bound; step size and epsilon mismatch."""


class CFLViolation(LevelcgError):
    """The requested explicit time step violates the stability limit."""


class MassLoss(LevelcgError):
    """Total mass of a conservative solve drifted beyond tolerance."""


class OutOfDomain(LevelcgError):
    """An evaluation point lies outside the domain of a test function or table."""


class TimeGridMismatch(LevelcgError):
    """Two measure paths do not share a common time grid."""


class UnboundedSupport(LevelcgError):
    """A measure carries mass beyond the truncation energy."""


class ConfigError(LevelcgError):
    """A run configuration failed validation; the message names the field."""
