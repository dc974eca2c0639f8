"""Combine the overall-mean predictor with the network model per series.

The two model outputs are merged by a weighted sum whose weights come from a
hold-out heuristic: after training, the final observed week is re-predicted
and scored for both models; if the network scores worse than the plain mean
it is switched off entirely (weights 1.0/0.0), otherwise both models share
equally (0.5/0.5).  Forecasts are de-scaled back to KPI-native units.
"""

from __future__ import annotations

import csv
import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import IO, Iterable

import numpy as np

from . import evaluation
from .features import (
    E_OFFSET_PAPER,
    InsufficientHistoryError,
    WindowConfig,
    build_inference_inputs,
    build_training_set,
    filter_f1,
    input_dim,
)
from .mlp import (
    MlpModel,
    TrainConfig,
    TrainingDivergedError,
    adam_init,
    init_mlp,
    predict,
    train,
)
from .preprocess import ScaledSeries, interpolate_gaps, inverse_rescale, scale_series
from .types import WEEK_HOURS, KpiSeries, SeriesKey

log = logging.getLogger(__name__)

#: Hold-out truth variance below this switches the comparison to MSE.
HOLDOUT_VARIANCE_FLOOR = 1e-9


@dataclass(frozen=True)
class EnsembleWeights:
    """Convex pair (mean predictor, network); the heuristic emits only two pairs."""

    w_mean: float
    w_nn: float

    def __post_init__(self) -> None:
        if self.w_mean < 0.0 or self.w_nn < 0.0:
            raise ValueError(f"weights must be non-negative, got ({self.w_mean}, {self.w_nn})")
        if abs(self.w_mean + self.w_nn - 1.0) > 1e-12:
            raise ValueError(f"weights must sum to 1, got {self.w_mean} + {self.w_nn}")


MEAN_ONLY = EnsembleWeights(1.0, 0.0)
BALANCED = EnsembleWeights(0.5, 0.5)


@dataclass(frozen=True)
class PipelineConfig:
    """Per-series modelling parameters shared across the whole pipeline."""

    k: int = 2
    e_offset_variant: str = E_OFFSET_PAPER
    c: float = 0.0
    d: float = 100.0
    epochs: int = 6
    lr: float = 1e-3
    dropout_p: float = 0.1
    seed: int = 0

    def window(self) -> WindowConfig:
        return WindowConfig(k=self.k, e_offset_variant=self.e_offset_variant)

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(epochs=self.epochs, lr=self.lr, dropout_p=self.dropout_p, seed=seed)


@dataclass
class SeriesForecast:
    """The 168 de-scaled hourly mean predictions following the history."""

    key: SeriesKey
    values: list[float]


@dataclass
class SeriesModel:
    """Everything fitted for one series: scale, trained network, weights."""

    key: SeriesKey
    cfg: PipelineConfig
    scaled: ScaledSeries
    mean_output: float
    model: MlpModel | None
    weights: EnsembleWeights
    epoch_losses: list[float] = field(default_factory=list)
    n_examples: int = 0
    notes: list[str] = field(default_factory=list)


def derive_seed(global_seed: int, key: SeriesKey) -> int:
    """Stable per-series seed, independent of scheduling or hash randomization."""
    digest = hashlib.sha256(f"{global_seed}|{key.host_id}|{key.kpi_name}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def mean_predict(series: KpiSeries | ScaledSeries) -> float:
    """Overall average of the projected mean values; constant over all horizons."""
    return float(np.mean(filter_f1(series)))


def combine(o1: float, o2: float, w: EnsembleWeights) -> float:
    """Weighted sum of the two model outputs."""
    if abs(w.w_mean + w.w_nn - 1.0) > 1e-12:
        raise ValueError(f"ensemble weights must sum to 1, got {w.w_mean} + {w.w_nn}")
    return w.w_mean * o1 + w.w_nn * o2


def _holdout_weights(
    examples: list,
    model: MlpModel,
    mean_output: float,
    n_history: int,
) -> tuple[EnsembleWeights, str | None]:
    """Score both models on the final observed week and pick the weights.

    The network was trained on that week too (by design), so this is an
    optimistic check; it exists to catch series the network cannot represent
    at all, where the plain mean is the safer predictor.
    """
    first_holdout = n_history - WEEK_HOURS
    holdout = [ex for ex in examples if ex.t_p >= first_holdout]
    if not holdout:
        return MEAN_ONLY, "no hold-out tuples in the final week; defaulting to the mean predictor"
    truth = np.array([ex.target for ex in holdout])
    nn_pred = np.array([predict(model, ex.x.to_array()) for ex in holdout])
    mean_pred = np.full(truth.shape, mean_output)
    if float(np.var(truth)) < HOLDOUT_VARIANCE_FLOOR:
        # Near-constant week: the score ratio is meaningless, compare MSE.
        # Ties go to the mean predictor, which is exact on true constants.
        nn_worse = float(np.mean((nn_pred - truth) ** 2)) >= float(np.mean((mean_pred - truth) ** 2))
    else:
        nn_worse = evaluation.r2(truth, nn_pred) < evaluation.r2(truth, mean_pred)
    return (MEAN_ONLY if nn_worse else BALANCED), None


def fit_series(series: KpiSeries, cfg: PipelineConfig, seed: int | None = None) -> SeriesModel:
    """Interpolate, scale, train the network, and select ensemble weights.

    Series without enough history for the network (or whose training
    diverges) degrade to the mean-only ensemble instead of failing.
    """
    if seed is None:
        seed = derive_seed(cfg.seed, series.key)
    scaled = scale_series(interpolate_gaps(series), cfg.c, cfg.d)
    mean_output = mean_predict(scaled)
    fitted = SeriesModel(
        key=series.key, cfg=cfg, scaled=scaled, mean_output=mean_output,
        model=None, weights=MEAN_ONLY,
    )
    try:
        examples = build_training_set(scaled, cfg.window(), mean_output)
    except InsufficientHistoryError as exc:
        fitted.notes.append(f"mean-only fallback: {exc}")
        log.warning("%s: %s", series.key, fitted.notes[-1])
        return fitted
    fitted.n_examples = len(examples)

    model = init_mlp(input_dim(cfg.window()), seed=seed, dropout_p=cfg.dropout_p)
    adam = adam_init(model, lr=cfg.lr)
    try:
        fitted.epoch_losses = train(model, adam, examples, cfg.train_config(seed))
    except TrainingDivergedError as exc:
        fitted.notes.append(f"mean-only fallback: {exc}")
        log.warning("%s: %s", series.key, fitted.notes[-1])
        return fitted
    fitted.model = model

    fitted.weights, note = _holdout_weights(examples, model, mean_output, len(scaled))
    if note:
        fitted.notes.append(note)
    return fitted


def select_weights(series: KpiSeries, cfg: PipelineConfig, seed: int | None = None) -> EnsembleWeights:
    """Train on the full history and apply the hold-out-week heuristic."""
    return fit_series(series, cfg, seed=seed).weights


def forecast_series(fitted: SeriesModel, n_horizons: int = WEEK_HOURS) -> SeriesForecast:
    """Combined, de-scaled forecast for the ``n_horizons`` hours after the history."""
    cfg = fitted.cfg
    o1 = fitted.mean_output
    if fitted.weights.w_nn == 0.0 or fitted.model is None:
        combined = np.full(n_horizons, o1)
    else:
        inputs = build_inference_inputs(fitted.scaled, cfg.window(), o1, n_horizons)
        combined = np.empty(n_horizons)
        for i, (x, _meta) in enumerate(inputs):
            o2 = predict(fitted.model, x.to_array())
            if not math.isfinite(o2):
                fitted.notes.append(f"horizon {i + 1}: non-finite network output, using mean output")
                log.warning("%s: %s", fitted.key, fitted.notes[-1])
                o2 = o1
            combined[i] = combine(o1, o2, fitted.weights)
    native = np.asarray(inverse_rescale(combined, fitted.scaled.mean_scale), dtype=float)
    if not np.all(np.isfinite(native)):
        raise ValueError(f"{fitted.key}: forecast contains non-finite values")
    return SeriesForecast(key=fitted.key, values=[float(v) for v in native])


def run_series(series: KpiSeries, cfg: PipelineConfig, seed: int | None = None) -> tuple[SeriesForecast, SeriesModel]:
    """Full per-series pipeline: fit everything, then forecast the next week."""
    fitted = fit_series(series, cfg, seed=seed)
    return forecast_series(fitted), fitted


# --- forecast file format ---------------------------------------------------

FORECAST_COLUMNS = ("host_id", "kpi_name", "horizon_hour", "predicted_mean")


def write_forecast_csv(forecasts: Iterable[SeriesForecast], stream: IO[str]) -> int:
    """One row per horizon, ordered by key then horizon; returns rows written."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(FORECAST_COLUMNS)
    n = 0
    for fc in sorted(forecasts, key=lambda f: f.key):
        for h, v in enumerate(fc.values, start=1):
            writer.writerow([fc.key.host_id, fc.key.kpi_name, h, repr(v)])
            n += 1
    return n


def read_forecast_csv(stream: IO[str]) -> dict[SeriesKey, dict[int, float]]:
    """Load a forecast file as key -> {horizon: value}."""
    reader = csv.DictReader(stream)
    missing = [c for c in FORECAST_COLUMNS if reader.fieldnames is None or c not in reader.fieldnames]
    if missing:
        raise ValueError(f"forecast file is missing column(s): {', '.join(missing)}")
    out: dict[SeriesKey, dict[int, float]] = {}
    for row in reader:
        key = SeriesKey(row["host_id"], row["kpi_name"])
        out.setdefault(key, {})[int(row["horizon_hour"])] = float(row["predicted_mean"])
    return out
