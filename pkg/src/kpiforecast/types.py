"""Core domain types: hourly aggregated samples and per-(host, kpi) series."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone

HOUR = timedelta(hours=1)
WEEK_HOURS = 168

#: Order of the seven per-hour aggregates, everywhere (CSV columns, arrays).
AGGREGATE_FIELDS = ("count", "mean", "std", "first", "last", "max", "min")


@dataclass(frozen=True, order=True)
class SeriesKey:
    """Identity of one monitored series: which host, which KPI."""

    host_id: str
    kpi_name: str

    def __str__(self) -> str:
        return f"{self.host_id}/{self.kpi_name}"


@dataclass(frozen=True)
class AggregatedSample:
    """Seven aggregates summarizing the sub-hour measurements of one hour."""

    count: int
    mean: float
    std: float
    first: float
    last: float
    max: float
    min: float

    def consistency_violations(self) -> list[str]:
        """Soft invariant checks.

        Real telemetry is dirty; violations are reported by the ingest layer
        but the sample is kept (downstream consumes only mean and last).
        """
        bad = []
        if self.count < 0:
            bad.append(f"count={self.count} < 0")
        if self.min > self.max:
            bad.append(f"min={self.min} > max={self.max}")
        else:
            for name in ("mean", "first", "last"):
                v = getattr(self, name)
                if not (self.min <= v <= self.max):
                    bad.append(f"{name}={v} outside [{self.min}, {self.max}]")
        return bad


@dataclass
class KpiSeries:
    """Hour-aligned sequence of samples for one series, with explicit gaps.

    ``samples[i]`` belongs to the hour labelled ``start + i hours``; labels are
    end-of-hour UTC timestamps, so slot ``i`` covers the hour ending at its
    label.  ``None`` marks a missing hour.
    """

    key: SeriesKey
    start: datetime
    samples: list[AggregatedSample | None] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.samples)

    def timestamp(self, i: int) -> datetime:
        return self.start + i * HOUR

    @property
    def gap_count(self) -> int:
        return sum(1 for s in self.samples if s is None)

    @property
    def gap_fraction(self) -> float:
        return self.gap_count / len(self.samples) if self.samples else 0.0

    @property
    def is_gap_free(self) -> bool:
        return self.gap_count == 0

    def slice(self, a: int, b: int) -> "KpiSeries":
        """Sub-series covering slots ``a..b`` inclusive (b - a + 1 slots)."""
        if not (0 <= a <= b < len(self.samples)):
            raise IndexError(f"slice [{a}, {b}] outside series of length {len(self.samples)}")
        return KpiSeries(self.key, self.timestamp(a), self.samples[a : b + 1])


def utc(year: int, month: int, day: int, hour: int = 0) -> datetime:
    """Shorthand for an hour-aligned UTC timestamp."""
    return datetime(year, month, day, hour, tzinfo=timezone.utc)
