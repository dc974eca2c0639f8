"""Parse raw KPI telemetry CSV into hour-aligned per-(host, kpi) series.

Canonical input is long-form CSV, one row per hour of one series::

    host_id,kpi_name,timestamp,count,mean,std,first,last,max,min

Timestamps are ISO-8601 UTC hour labels (``YYYY-MM-DDTHH:00:00Z``) and are
treated as end-of-hour labels.  A :class:`ColumnMapping` adapts files whose
header uses different column names.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from datetime import datetime, timezone
from typing import IO, Iterable

from .types import AGGREGATE_FIELDS, HOUR, AggregatedSample, KpiSeries, SeriesKey

log = logging.getLogger(__name__)

CANONICAL_COLUMNS = ("host_id", "kpi_name", "timestamp") + AGGREGATE_FIELDS

#: Stored warning messages are capped; counts are always exact.
MAX_MESSAGES = 50


class CorpusFormatError(ValueError):
    """Fatal ingestion problem: unreadable stream or unusable header."""


@dataclass(frozen=True)
class ColumnMapping:
    """Maps the canonical column roles to the column names found in a file."""

    host_id: str = "host_id"
    kpi_name: str = "kpi_name"
    timestamp: str = "timestamp"
    count: str = "count"
    mean: str = "mean"
    std: str = "std"
    first: str = "first"
    last: str = "last"
    max: str = "max"
    min: str = "min"

    def required_names(self) -> list[str]:
        return [getattr(self, f.name) for f in fields(self)]


@dataclass
class ParsedCorpus:
    """Raw per-key records plus ingestion bookkeeping.

    Count conservation: sum of per-key record counts equals
    ``rows_read - malformed - duplicates``.
    """

    records: dict[SeriesKey, list[tuple[datetime, AggregatedSample]]]
    rows_read: int = 0
    malformed: int = 0
    duplicates: int = 0
    consistency_warnings: int = 0
    messages: list[str] = field(default_factory=list)

    def note(self, msg: str) -> None:
        if len(self.messages) < MAX_MESSAGES:
            self.messages.append(msg)

    @property
    def n_records(self) -> int:
        return sum(len(v) for v in self.records.values())


def parse_timestamp(text: str) -> datetime:
    """Parse an ISO-8601 timestamp; naive values are taken as UTC."""
    raw = text.strip()
    if raw.endswith(("Z", "z")):
        raw = raw[:-1] + "+00:00"
    ts = datetime.fromisoformat(raw)
    if ts.tzinfo is None:
        return ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


def _parse_row(row: dict[str, str], schema: ColumnMapping) -> tuple[SeriesKey, datetime, AggregatedSample]:
    host = row[schema.host_id].strip()
    kpi = row[schema.kpi_name].strip()
    if not host or not kpi:
        raise ValueError("empty host_id or kpi_name")
    ts = parse_timestamp(row[schema.timestamp])
    values = {}
    for name in AGGREGATE_FIELDS:
        text = row[getattr(schema, name)].strip()
        v = float(text)
        if not math.isfinite(v):
            raise ValueError(f"non-finite {name}={text}")
        values[name] = v
    count = int(round(values["count"]))
    sample = AggregatedSample(count=count, **{k: values[k] for k in AGGREGATE_FIELDS[1:]})
    return SeriesKey(host, kpi), ts, sample


def parse_corpus(stream: IO[str] | Iterable[str], schema: ColumnMapping | None = None) -> ParsedCorpus:
    """Read delimited telemetry into per-key record lists.

    Malformed rows are skipped and counted; duplicate (key, timestamp) rows
    keep the first occurrence.  A missing mandatory column is fatal.
    """
    schema = schema or ColumnMapping()
    reader = csv.DictReader(stream)
    if reader.fieldnames is None:
        raise CorpusFormatError("input is empty: no header row")
    header = [h.strip() for h in reader.fieldnames]
    missing = [name for name in schema.required_names() if name not in header]
    if missing:
        raise CorpusFormatError(f"header is missing mandatory column(s): {', '.join(missing)}")
    reader.fieldnames = header

    out = ParsedCorpus(records={})
    seen: set[tuple[SeriesKey, datetime]] = set()
    for row in reader:
        out.rows_read += 1
        try:
            key, ts, sample = _parse_row(row, schema)
        except (KeyError, TypeError, ValueError) as exc:
            out.malformed += 1
            out.note(f"row {out.rows_read}: skipped ({exc})")
            continue
        if (key, ts) in seen:
            out.duplicates += 1
            out.note(f"row {out.rows_read}: duplicate sample for {key} at {ts.isoformat()}")
            continue
        seen.add((key, ts))
        violations = sample.consistency_violations()
        if violations:
            out.consistency_warnings += 1
            out.note(f"row {out.rows_read}: inconsistent aggregates for {key}: {'; '.join(violations)}")
        out.records.setdefault(key, []).append((ts, sample))
    return out


def snap_to_hour(ts: datetime) -> datetime:
    """Snap a timestamp to the label of the hour containing it.

    Labels are end-of-hour, so anything inside (H:00, H+1:00] maps to H+1:00.
    """
    if ts.minute == 0 and ts.second == 0 and ts.microsecond == 0:
        return ts
    floored = ts.replace(minute=0, second=0, microsecond=0)
    return floored + HOUR


def assemble_series(key: SeriesKey, records: list[tuple[datetime, AggregatedSample]]) -> KpiSeries:
    """Build an hour-grid series spanning the records, gaps left explicit.

    Records are sorted; non-hour-aligned timestamps are snapped to their
    containing hour with a warning; collisions after snapping keep the
    earliest record.
    """
    if not records:
        raise ValueError(f"no records for {key}: cannot assemble an empty series")
    snapped: list[tuple[datetime, AggregatedSample]] = []
    for ts, sample in records:
        s = snap_to_hour(ts)
        if s != ts:
            log.warning("%s: timestamp %s snapped to hour label %s", key, ts.isoformat(), s.isoformat())
        snapped.append((s, sample))
    snapped.sort(key=lambda r: r[0])

    start = snapped[0][0]
    end = snapped[-1][0]
    n_slots = int((end - start) / HOUR) + 1
    slots: list[AggregatedSample | None] = [None] * n_slots
    for ts, sample in snapped:
        i = int((ts - start) / HOUR)
        if slots[i] is not None:
            log.warning("%s: second sample for hour %s dropped after snapping", key, ts.isoformat())
            continue
        slots[i] = sample
    series = KpiSeries(key, start, slots)
    log.debug("%s: %d slots, gap fraction %.3f", key, n_slots, series.gap_fraction)
    return series


def assemble_corpus(parsed: ParsedCorpus) -> dict[SeriesKey, KpiSeries]:
    """Assemble every parsed key, sorted for deterministic iteration."""
    return {
        key: assemble_series(key, parsed.records[key])
        for key in sorted(parsed.records, key=lambda k: (k.host_id, k.kpi_name))
    }


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def write_corpus_csv(corpus: Iterable[KpiSeries], stream: IO[str]) -> int:
    """Serialize series to the canonical CSV; gap slots are simply absent.

    Floats are written with ``repr`` so a re-parse round-trips bit-for-bit.
    Returns the number of rows written.
    """
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CANONICAL_COLUMNS)
    n = 0
    for series in sorted(corpus, key=lambda s: (s.key.host_id, s.key.kpi_name)):
        for i, sample in enumerate(series.samples):
            if sample is None:
                continue
            writer.writerow(
                [series.key.host_id, series.key.kpi_name, format_timestamp(series.timestamp(i)),
                 sample.count, repr(sample.mean), repr(sample.std), repr(sample.first),
                 repr(sample.last), repr(sample.max), repr(sample.min)]
            )
            n += 1
    return n


def load_corpus(path: str, schema: ColumnMapping | None = None) -> tuple[dict[SeriesKey, KpiSeries], ParsedCorpus]:
    """Parse and assemble a corpus file in one step."""
    with open(path, newline="", encoding="utf-8") as f:
        parsed = parse_corpus(f, schema)
    return assemble_corpus(parsed), parsed
