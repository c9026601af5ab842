"""
Exception hierarchy for the IQB engine.

Validation problems are reported as Finding values (see model.types), not raised.
Exceptions are reserved for conditions that stop an operation outright.
"""


class IQBError(Exception):
    """Base class for all engine errors."""


class ConfigError(IQBError):
    """Config or adapter spec cannot be read or parsed."""


class IngestError(IQBError):
    """An input file is unreadable as a whole (rows are rejected individually)."""


class InsufficientDataError(IQBError):
    """No usable measurements for a key or region. Never the same as a score of 0."""


class UnscorableError(IQBError):
    """A weight tier sums to zero, so normalization is undefined."""

    def __init__(self, tier: str, key: str, message: str | None = None):
        self.tier = tier
        self.key = key
        super().__init__(message or f"unscorable {tier}: zero weight sum for {key}")


class CoverageError(IQBError):
    """The flat score form was given a matrix missing a positively weighted cell."""


class AggregationError(IQBError):
    """Conflicting aggregate statistics, e.g. a duplicated provided stat."""


class FixtureError(IQBError):
    """A fixture scenario cannot be realized."""
