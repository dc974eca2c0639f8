"""Gap filling and value rescaling, with an exact inverse for predictions.

Gaps are filled by linear interpolation independently on each of the seven
aggregate dimensions; leading/trailing gaps take the nearest observed value.
Values are then mapped affinely to a uniform range ``[c, d]`` fitted per
series and per dimension, so forecasts can be mapped back to native units.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .types import AGGREGATE_FIELDS, AggregatedSample, KpiSeries, SeriesKey


class AllGapError(ValueError):
    """Series without a single observed sample cannot be interpolated."""


@dataclass(frozen=True)
class ScaleParams:
    """Affine map between native units [lo, hi] and the target range [c, d].

    ``lo == hi`` marks the degenerate constant map: everything scales to ``c``
    and inverts back to ``lo``.
    """

    c: float
    d: float
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.c < self.d:
            raise ValueError(f"target range requires c < d, got [{self.c}, {self.d}]")
        if self.lo > self.hi:
            raise ValueError(f"observed range requires lo <= hi, got [{self.lo}, {self.hi}]")

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi


def interpolate_gaps(series: KpiSeries) -> KpiSeries:
    """Return a gap-free copy of ``series``.

    Interior gaps are filled by the line between the nearest observed
    neighbours, per dimension; the interpolated count is rounded to the
    nearest integer.  Applying this to a gap-free series is the identity.
    """
    n = len(series)
    observed = [i for i, s in enumerate(series.samples) if s is not None]
    if not observed:
        raise AllGapError(f"{series.key}: all {n} slots are gaps")
    if len(observed) == n:
        return series

    idx = np.asarray(observed, dtype=float)
    grid = np.arange(n, dtype=float)
    filled: dict[str, np.ndarray] = {}
    for name in AGGREGATE_FIELDS:
        known = np.array([getattr(series.samples[i], name) for i in observed], dtype=float)
        # np.interp extends constantly beyond the first/last observation.
        filled[name] = np.interp(grid, idx, known)

    samples: list[AggregatedSample | None] = []
    for i in range(n):
        if series.samples[i] is not None:
            samples.append(series.samples[i])
        else:
            samples.append(
                AggregatedSample(
                    count=int(np.rint(filled["count"][i])),
                    **{name: float(filled[name][i]) for name in AGGREGATE_FIELDS[1:]},
                )
            )
    return KpiSeries(series.key, series.start, samples)


def fit_scale(values: np.ndarray | list[float], c: float, d: float) -> ScaleParams:
    """Fit the observed [lo, hi] of one dimension against target [c, d]."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise ValueError("cannot fit scale parameters on empty values")
    return ScaleParams(c=c, d=d, lo=float(arr.min()), hi=float(arr.max()))


def rescale(v, p: ScaleParams):
    """Map native values into [c, d]; values outside [lo, hi] extrapolate linearly."""
    if p.degenerate:
        return np.full_like(np.asarray(v, dtype=float), p.c) if np.ndim(v) else p.c
    return p.c + (np.asarray(v, dtype=float) - p.lo) * (p.d - p.c) / (p.hi - p.lo)


def inverse_rescale(u, p: ScaleParams):
    """Exact inverse of :func:`rescale` (constant ``lo`` in the degenerate case)."""
    if p.degenerate:
        return np.full_like(np.asarray(u, dtype=float), p.lo) if np.ndim(u) else p.lo
    return p.lo + (np.asarray(u, dtype=float) - p.c) * (p.hi - p.lo) / (p.d - p.c)


@dataclass
class ScaledSeries:
    """Gap-free series after rescaling, reduced to the dimensions the models use.

    ``mean`` and ``last`` are float arrays in scaled space; the fitted
    per-dimension parameters are retained so predictions can be de-scaled.
    """

    key: SeriesKey
    start: datetime
    mean: np.ndarray
    last: np.ndarray
    mean_scale: ScaleParams
    last_scale: ScaleParams

    def __len__(self) -> int:
        return len(self.mean)


def scale_series(series: KpiSeries, c: float = 0.0, d: float = 100.0) -> ScaledSeries:
    """Fit per-dimension scale parameters on the full history and apply them.

    Requires a gap-free series (interpolate first).
    """
    if not series.is_gap_free:
        raise ValueError(f"{series.key}: series still has {series.gap_count} gaps; interpolate first")
    means = np.array([s.mean for s in series.samples], dtype=float)
    lasts = np.array([s.last for s in series.samples], dtype=float)
    mean_scale = fit_scale(means, c, d)
    last_scale = fit_scale(lasts, c, d)
    return ScaledSeries(
        key=series.key,
        start=series.start,
        mean=np.asarray(rescale(means, mean_scale), dtype=float),
        last=np.asarray(rescale(lasts, last_scale), dtype=float),
        mean_scale=mean_scale,
        last_scale=last_scale,
    )
