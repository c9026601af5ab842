"""
Per-use-case network requirement thresholds at two quality levels.

Values are stored in canonical metric units. A (use case, metric) pair may be
absent entirely when the metric does not apply to the use case.
"""

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .types import Finding, MetricKind, QualityLevel, UseCase, key_path

ThresholdKey = tuple[UseCase, MetricKind, QualityLevel]


@dataclass(frozen=True)
class ThresholdTable:
    entries: dict[ThresholdKey, float] = field(default_factory=dict)

    def get(self, use_case: UseCase, metric: MetricKind, level: QualityLevel) -> Optional[float]:
        return self.entries.get((use_case, metric, level))

    def pairs(self) -> list[tuple[UseCase, MetricKind]]:
        """(use case, metric) pairs present at any level, in enum order."""
        present = {(u, r) for u, r, _ in self.entries}
        return [(u, r) for u in UseCase for r in MetricKind if (u, r) in present]

    def __iter__(self) -> Iterator[tuple[ThresholdKey, float]]:
        return iter(self.entries.items())


def validate_threshold_table(t: ThresholdTable) -> list[Finding]:
    """Return one finding per violated ThresholdTable invariant; empty when valid."""
    findings: list[Finding] = []

    for (u, r, level), value in t:
        if not math.isfinite(value) or value < 0:
            findings.append(Finding(
                code="threshold_out_of_range",
                key=key_path("thresholds", u, r, level),
                message=f"threshold must be finite and non-negative: {value!r}",
            ))

    for u, r in t.pairs():
        minimum = t.get(u, r, QualityLevel.minimum)
        high = t.get(u, r, QualityLevel.high)
        if minimum is None or high is None:
            missing = QualityLevel.minimum if minimum is None else QualityLevel.high
            findings.append(Finding(
                code="level_asymmetry",
                key=key_path("thresholds", u, r, missing),
                message=f"level asymmetry: {missing.value} threshold missing",
            ))
            continue
        if r.higher_is_better and high < minimum:
            findings.append(Finding(
                code="level_order",
                key=key_path("thresholds", u, r),
                message=f"high < minimum for higher_is_better ({high} < {minimum})",
            ))
        elif not r.higher_is_better and high > minimum:
            findings.append(Finding(
                code="level_order",
                key=key_path("thresholds", u, r),
                message=f"high > minimum for lower_is_better ({high} > {minimum})",
            ))

    return findings
