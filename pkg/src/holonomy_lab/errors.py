"""Exception types shared across the package."""

__all__ = [
    "HolonomyLabError",
    "InputError",
    "PreconditionError",
    "LogDomainError",
    "ChartDomainError",
    "CapabilityError",
    "InsufficientDataError",
    "ConfigError",
    "SeriesRadiusWarning",
]


class HolonomyLabError(Exception):
    """Base class for errors raised by holonomy_lab."""


class InputError(HolonomyLabError, ValueError):
    """Malformed numerical input (non-finite entries, wrong shapes)."""


class PreconditionError(HolonomyLabError, ValueError):
    """An operation was called outside its documented domain."""


class LogDomainError(PreconditionError):
    """Group element too far from the identity for the principal logarithm."""


class ChartDomainError(PreconditionError):
    """A point left the region where a chart or model is valid."""


class CapabilityError(HolonomyLabError, RuntimeError):
    """Requested derivative data or structure that an object cannot supply."""


class InsufficientDataError(HolonomyLabError, ValueError):
    """Too few usable rows to fit a convergence order."""


class ConfigError(HolonomyLabError, ValueError):
    """Invalid or unknown experiment configuration entry."""


class SeriesRadiusWarning(UserWarning):
    """dexp-inverse series evaluated close to its radius of convergence."""

