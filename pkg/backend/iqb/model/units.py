"""Unit table shared by threshold rows and ingest adapters."""

from typing import Optional

from pydantic import BaseModel, ConfigDict, Field

from .types import MetricKind, Unit


class UnitConversion(BaseModel):
    """Multiply a source value by `factor` to get `to` units."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    to: Unit
    factor: float = Field(gt=0)


UNIT_TABLE: dict[str, UnitConversion] = {
    # throughput
    "Mbps": UnitConversion(to=Unit.Mbps, factor=1.0),
    "mbps": UnitConversion(to=Unit.Mbps, factor=1.0),
    "Mbit/s": UnitConversion(to=Unit.Mbps, factor=1.0),
    "kbps": UnitConversion(to=Unit.Mbps, factor=1e-3),
    "Kbps": UnitConversion(to=Unit.Mbps, factor=1e-3),
    "bps": UnitConversion(to=Unit.Mbps, factor=1e-6),
    "Gbps": UnitConversion(to=Unit.Mbps, factor=1e3),
    # latency
    "ms": UnitConversion(to=Unit.ms, factor=1.0),
    "s": UnitConversion(to=Unit.ms, factor=1e3),
    "us": UnitConversion(to=Unit.ms, factor=1e-3),
    # packet loss
    "fraction": UnitConversion(to=Unit.fraction, factor=1.0),
    "%": UnitConversion(to=Unit.fraction, factor=0.01),
    "percent": UnitConversion(to=Unit.fraction, factor=0.01),
}


def to_canonical(
    value: float,
    unit: Optional[str],
    metric: MetricKind,
    extra: Optional[dict[str, UnitConversion]] = None,
) -> float:
    """
    Convert `value` in `unit` to the metric's canonical unit.

    A missing or empty unit means the value is already canonical.
    Raises ValueError for unknown units or units of the wrong dimension.
    """
    if not unit:
        return value
    conversion = (extra or {}).get(unit) or UNIT_TABLE.get(unit)
    if conversion is None:
        raise ValueError(f"unknown unit {unit!r}")
    if conversion.to is not metric.unit:
        raise ValueError(f"unit {unit!r} does not apply to {metric.value}")
    if conversion.factor == 1.0:
        return value
    return value * conversion.factor
