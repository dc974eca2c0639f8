"""Feature filters and training-tuple construction for the network model.

Two fixed filters feed the models: the first projects the hourly mean values
(for the overall-mean predictor), the second picks the mean and last value at
a calendar anchor before the target's week plus the mean of the target's
hour-of-week from each of the previous ``k`` weeks.  Calendar meta (hour of
day 1..24, day of week 1..7 with Monday = 1) is derived from end-of-hour UTC
labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime

import numpy as np

from .preprocess import ScaledSeries
from .types import HOUR, WEEK_HOURS, KpiSeries

#: Original anchor rule e = t_p - (m2*24 + m1); lands a full day before the
#: target's week start, so the anchor is always a Saturday's last hour.
E_OFFSET_PAPER = "paper"
#: Corrected rule e = t_p - ((m2-1)*24 + m1), anchored at the week boundary.
E_OFFSET_WEEK_START = "week-start"

E_OFFSET_VARIANTS = (E_OFFSET_PAPER, E_OFFSET_WEEK_START)


class InsufficientHistoryError(ValueError):
    """Series is too short to anchor the requested feature window."""


@dataclass(frozen=True)
class HourMeta:
    """Calendar position of one hour slot: hour of day and day of week."""

    m1: int  # 1..24
    m2: int  # 1..7, Monday = 1

    @property
    def hour_of_week(self) -> int:
        """Position 1..168 within a Monday-start week."""
        return (self.m2 - 1) * 24 + self.m1


def hour_meta(ts: datetime) -> HourMeta:
    """Meta of the hour labelled by ``ts`` (an end-of-hour UTC label).

    The label Monday 01:00 marks Monday's first hour -> (1, 1); the label
    Monday 00:00 marks Sunday's last hour -> (24, 7).
    """
    m1 = ts.hour if ts.hour != 0 else 24
    return HourMeta(m1=m1, m2=(ts - HOUR).weekday() + 1)


@dataclass(frozen=True)
class WindowConfig:
    """Lookback geometry for feature construction."""

    k: int = 2
    e_offset_variant: str = E_OFFSET_PAPER
    week_hours: int = WEEK_HOURS

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"lookback weeks k must be >= 1, got {self.k}")
        if self.e_offset_variant not in E_OFFSET_VARIANTS:
            raise ValueError(f"unknown e_offset_variant {self.e_offset_variant!r}")


@dataclass(frozen=True)
class FeatureVector:
    """Flat network input; length is k + 5 once flattened.

    Order is fixed: anchor mean, anchor last, the k same-hour means (most
    recent week first), raw m1, raw m2, injected mean-model output.  All value
    features live in scaled space; m1/m2 are the plain integers cast to float.
    """

    mean_e: float
    last_e: float
    same_hour_means: tuple[float, ...]
    m1: float
    m2: float
    mean_model_output: float

    def to_array(self) -> np.ndarray:
        return np.array(
            [self.mean_e, self.last_e, *self.same_hour_means, self.m1, self.m2, self.mean_model_output],
            dtype=float,
        )

    def __len__(self) -> int:
        return len(self.same_hour_means) + 5


def input_dim(cfg: WindowConfig) -> int:
    return cfg.k + 5


@dataclass(frozen=True)
class TrainingExample:
    """One input/target tuple; the target is always the mean aggregate at t_p."""

    x: FeatureVector
    target: float
    meta: HourMeta
    t_p: int


def filter_f1(series: KpiSeries | ScaledSeries) -> np.ndarray:
    """Project the mean dimension of every slot, in order."""
    if isinstance(series, ScaledSeries):
        return np.asarray(series.mean, dtype=float)
    if not series.is_gap_free:
        raise ValueError(f"{series.key}: series has gaps; interpolate first")
    return np.array([s.mean for s in series.samples], dtype=float)


def anchor_index(t_p: int, meta: HourMeta, cfg: WindowConfig) -> tuple[int, int]:
    """Slice boundaries (e, s) for the window feeding the target at ``t_p``.

    ``s < 0`` means the target lacks history and its tuple is excluded.
    """
    if cfg.e_offset_variant == E_OFFSET_PAPER:
        offset = meta.m2 * 24 + meta.m1
    else:
        offset = (meta.m2 - 1) * 24 + meta.m1
    e = t_p - offset
    s = e - cfg.week_hours * cfg.k
    return e, s


def filter_f2(scaled: ScaledSeries, e: int, t_p: int, cfg: WindowConfig) -> tuple[float, float, tuple[float, ...]]:
    """Anchor mean/last plus the target's hour-of-week mean from the previous k weeks."""
    n = len(scaled)
    if not 0 <= e < n:
        raise InsufficientHistoryError(f"anchor index {e} outside series of length {n}")
    lookbacks = [t_p - cfg.week_hours * i for i in range(1, cfg.k + 1)]
    if lookbacks[-1] < 0 or lookbacks[0] >= n:
        raise InsufficientHistoryError(
            f"same-hour lookbacks {lookbacks} for target {t_p} outside series of length {n}"
        )
    return (
        float(scaled.mean[e]),
        float(scaled.last[e]),
        tuple(float(scaled.mean[i]) for i in lookbacks),
    )


def _meta_at(scaled: ScaledSeries, t_p: int) -> HourMeta:
    return hour_meta(scaled.start + t_p * HOUR)


def build_training_set(scaled: ScaledSeries, cfg: WindowConfig, mean_output: float) -> list[TrainingExample]:
    """All input/target tuples whose anchor window fits inside the history.

    One tuple per target index with s >= 0, ordered by ascending t_p.
    """
    examples: list[TrainingExample] = []
    for t_p in range(len(scaled)):
        meta = _meta_at(scaled, t_p)
        e, s = anchor_index(t_p, meta, cfg)
        if s < 0:
            continue
        mean_e, last_e, shm = filter_f2(scaled, e, t_p, cfg)
        x = FeatureVector(mean_e, last_e, shm, float(meta.m1), float(meta.m2), mean_output)
        examples.append(TrainingExample(x=x, target=float(scaled.mean[t_p]), meta=meta, t_p=t_p))
    if not examples:
        min_offset = 25 if cfg.e_offset_variant == E_OFFSET_PAPER else 1
        required = cfg.week_hours * cfg.k + min_offset + 1
        raise InsufficientHistoryError(
            f"{scaled.key}: no trainable targets in {len(scaled)} slots; "
            f"at least {required} slots of history are required for k={cfg.k}"
        )
    return examples


def build_inference_inputs(
    scaled: ScaledSeries,
    cfg: WindowConfig,
    mean_output: float,
    n_horizons: int = WEEK_HOURS,
) -> list[tuple[FeatureVector, HourMeta]]:
    """Inputs for the ``n_horizons`` hours following the observed history.

    Constructed exactly like training tuples for virtual targets T+1..T+W,
    reading only observed slots: the same-hour means come from the last k
    observed weeks, and an anchor that would land beyond the history (series
    not ending at a week boundary) is pulled back by whole weeks, preserving
    its hour of week.
    """
    T = len(scaled) - 1
    out: list[tuple[FeatureVector, HourMeta]] = []
    for w in range(1, n_horizons + 1):
        t_p = T + w
        meta = _meta_at(scaled, t_p)
        e, _ = anchor_index(t_p, meta, cfg)
        while e > T:
            e -= cfg.week_hours
        if e < 0:
            raise InsufficientHistoryError(
                f"{scaled.key}: horizon {w} needs anchor {e}; series of length {len(scaled)} is too short"
            )
        mean_e, last_e, shm = filter_f2(scaled, e, t_p, cfg)
        x = FeatureVector(mean_e, last_e, shm, float(meta.m1), float(meta.m2), mean_output)
        out.append((x, meta))
    return out
