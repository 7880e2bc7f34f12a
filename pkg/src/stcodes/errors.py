"""Exception and warning types shared across the toolkit."""


class StcError(Exception):
    """Base class for all toolkit errors."""


class DomainError(StcError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ShapeError(StcError, ValueError):
    """Dimensions or code lengths do not line up."""


class CapacityError(StcError, MemoryError):
    """A requested allocation exceeds the addressable size or configured cap."""


class FormatError(StcError, ValueError):
    """A persisted file has the wrong magic, version or layout."""


class ConfigError(StcError, ValueError):
    """Inconsistent configuration, e.g. a transition matrix with undefined rows."""


class StcWarning(UserWarning):
    """Non-fatal conditions: probability clamping, clamped top-k, ..."""
