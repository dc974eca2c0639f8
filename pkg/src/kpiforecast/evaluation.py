"""Coefficient-of-determination scoring and weekly seasonality profiles.

The score of a prediction vector is 1 - SS_res / SS_tot against the truth's
own mean.  Near-constant truth makes the denominator collapse; such series
get an "undefined" sentinel (None) instead of an explosive number, and are
excluded from the macro average while still contributing their points to the
pooled score.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import IO, Iterable, Sequence

import numpy as np

from .features import hour_meta
from .types import WEEK_HOURS, KpiSeries, SeriesKey

#: Sum-of-squares below this is treated as zero variance.
VARIANCE_FLOOR = 1e-12


def r2(truth: Sequence[float], pred: Sequence[float]) -> float | None:
    """1 - SS_res/SS_tot; None when the truth has (numerically) no variance.

    The degenerate-but-perfect case (both sums below the floor) scores 1.0.
    """
    t = np.asarray(truth, dtype=float)
    p = np.asarray(pred, dtype=float)
    if t.shape != p.shape:
        raise ValueError(f"length mismatch: truth {t.shape} vs pred {p.shape}")
    if t.size == 0:
        raise ValueError("cannot score empty vectors")
    ss_tot = float(((t - t.mean()) ** 2).sum())
    ss_res = float(((t - p) ** 2).sum())
    if ss_tot < VARIANCE_FLOOR:
        return 1.0 if ss_res < VARIANCE_FLOOR else None
    return 1.0 - ss_res / ss_tot


def pooled_r2(pairs: Iterable[tuple[Sequence[float], Sequence[float]]]) -> float | None:
    """Score the concatenation of all (truth, pred) pairs against the grand mean."""
    truths, preds = [], []
    for t, p in pairs:
        truths.append(np.asarray(t, dtype=float))
        preds.append(np.asarray(p, dtype=float))
    if not truths:
        raise ValueError("pooled score needs at least one series")
    return r2(np.concatenate(truths), np.concatenate(preds))


@dataclass
class ScoreReport:
    """Per-series and pooled scores over one forecast/truth matching."""

    per_series: dict[SeriesKey, float | None]
    pooled: float | None
    n_points: int
    macro_average: float | None
    n_undefined: int

    def summary_line(self) -> str:
        def fmt(v: float | None) -> str:
            return "undefined" if v is None else f"{v:.4f}"

        return (
            f"pooled_r2={fmt(self.pooled)} macro_r2={fmt(self.macro_average)} "
            f"series={len(self.per_series)} undefined={self.n_undefined} points={self.n_points}"
        )


def score_pairs(pairs: dict[SeriesKey, tuple[Sequence[float], Sequence[float]]]) -> ScoreReport:
    """Build the full report from per-series (truth, pred) vectors."""
    if not pairs:
        raise ValueError("no series to score")
    per_series: dict[SeriesKey, float | None] = {}
    n_points = 0
    for key, (t, p) in sorted(pairs.items()):
        per_series[key] = r2(t, p)
        n_points += len(np.asarray(t))
    defined = [v for v in per_series.values() if v is not None]
    return ScoreReport(
        per_series=per_series,
        pooled=pooled_r2(pairs.values()),
        n_points=n_points,
        macro_average=float(np.mean(defined)) if defined else None,
        n_undefined=sum(1 for v in per_series.values() if v is None),
    )


@dataclass(frozen=True)
class ProfileRow:
    """Mean and 0.95 normal-approximation CI of one hour-of-week across weeks."""

    hour_of_week: int
    mean: float
    ci_low: float
    ci_high: float
    n: int


def weekly_profile(series: KpiSeries) -> list[ProfileRow]:
    """Group hourly means by hour-of-week (1..168, Monday start).

    The CI is mean +/- 1.96 * sd / sqrt(n) with the sample (n-1) deviation;
    singleton and constant groups collapse to a zero-width interval.  Always
    returns 168 rows; an hour never observed yields NaN statistics with n=0.
    """
    if not series.is_gap_free:
        raise ValueError(f"{series.key}: profile requires a gap-free series; interpolate first")
    groups: list[list[float]] = [[] for _ in range(WEEK_HOURS)]
    for i, sample in enumerate(series.samples):
        how = hour_meta(series.timestamp(i)).hour_of_week
        groups[how - 1].append(sample.mean)

    rows: list[ProfileRow] = []
    for how in range(1, WEEK_HOURS + 1):
        vals = np.asarray(groups[how - 1], dtype=float)
        n = vals.size
        if n == 0:
            rows.append(ProfileRow(how, math.nan, math.nan, math.nan, 0))
            continue
        # Centered arithmetic keeps constant groups exact (mean == the value,
        # sd == 0.0) instead of accumulating an ulp of summation noise.
        offsets = vals - vals[0]
        off_mean = float(offsets.mean())
        mean = float(vals[0] + off_mean)
        sd = float(np.sqrt(((offsets - off_mean) ** 2).sum() / (n - 1))) if n > 1 else 0.0
        half = 1.96 * sd / math.sqrt(n)
        rows.append(ProfileRow(how, mean, mean - half, mean + half, n))
    return rows


# --- delimited output ------------------------------------------------------


def write_score_csv(report: ScoreReport, stream: IO[str]) -> None:
    """``host_id,kpi_name,r2`` rows, key-ascending; undefined scores are blank."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["host_id", "kpi_name", "r2"])
    for key in sorted(report.per_series):
        v = report.per_series[key]
        writer.writerow([key.host_id, key.kpi_name, "" if v is None else repr(v)])


def write_profile_csv(profiles: dict[SeriesKey, list[ProfileRow]], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["host_id", "kpi_name", "hour_of_week", "mean", "ci_low", "ci_high", "n"])
    for key in sorted(profiles):
        for row in profiles[key]:
            writer.writerow(
                [key.host_id, key.kpi_name, row.hour_of_week,
                 repr(row.mean), repr(row.ci_low), repr(row.ci_high), row.n]
            )
