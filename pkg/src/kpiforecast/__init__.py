"""Per-series hourly KPI forecasting toolkit.

Each monitored (host, kpi) series gets its own lightweight model pair: the
overall average of its hourly means and a small feed-forward network fed with
calendar meta and same-hour-of-week history.  A hold-out heuristic decides
per series whether the network participates in the final weighted forecast of
the next 168 hours.
"""

__version__ = "0.1.0"

from .ensemble import (
    BALANCED,
    MEAN_ONLY,
    EnsembleWeights,
    PipelineConfig,
    SeriesForecast,
    SeriesModel,
    combine,
    fit_series,
    forecast_series,
    mean_predict,
    run_series,
    select_weights,
)
from .evaluation import ScoreReport, pooled_r2, r2, score_pairs, weekly_profile
from .features import (
    FeatureVector,
    HourMeta,
    TrainingExample,
    WindowConfig,
    anchor_index,
    build_inference_inputs,
    build_training_set,
    filter_f1,
    filter_f2,
    hour_meta,
)
from .ingest import (
    ColumnMapping,
    CorpusFormatError,
    assemble_corpus,
    assemble_series,
    load_corpus,
    parse_corpus,
    write_corpus_csv,
)
from .mlp import (
    AdamState,
    MlpModel,
    TrainConfig,
    TrainingDivergedError,
    adam_init,
    forward,
    init_mlp,
    load_model,
    predict,
    save_model,
    train,
    train_step,
)
from .preprocess import (
    AllGapError,
    ScaledSeries,
    ScaleParams,
    fit_scale,
    interpolate_gaps,
    inverse_rescale,
    rescale,
    scale_series,
)
from .synth import SynthSpec, generate, generate_corpus, inject_gaps
from .types import AggregatedSample, KpiSeries, SeriesKey

__all__ = [name for name in dir() if not name.startswith("_")]
