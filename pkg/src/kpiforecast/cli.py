"""Command-line surface tying the pipeline together.

Subcommands: ``synth`` (generate a corpus), ``ingest`` (normalize arbitrary
headers to the canonical CSV), ``forecast`` (train per-series models and emit
the next 168 hours), ``score`` (R² of forecasts against a truth corpus),
``profile`` (weekly seasonality profiles), ``bench`` (per-epoch training
time).  Reporting commands render a matplotlib figure next to their CSV
output unless ``--no-figure`` is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import multiprocessing
import re
import sys
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from . import __version__
from .ensemble import (
    PipelineConfig,
    SeriesForecast,
    mean_predict,
    read_forecast_csv,
    run_series,
    write_forecast_csv,
)
from .evaluation import score_pairs, weekly_profile, write_profile_csv, write_score_csv
from .features import E_OFFSET_PAPER, E_OFFSET_WEEK_START, build_training_set, input_dim
from .ingest import ColumnMapping, CorpusFormatError, load_corpus, write_corpus_csv
from .mlp import TrainConfig, adam_init, init_mlp, save_model, train
from .preprocess import interpolate_gaps, scale_series
from .synth import generate, generate_corpus, SynthSpec
from .types import HOUR, KpiSeries, SeriesKey

log = logging.getLogger(__name__)

#: The larger alternative reading of the method's learning rate.
LR_LITERAL = 1e-2


@dataclass
class SeriesStatus:
    """Outcome of one series in a forecast run; every input key appears once."""

    key: SeriesKey
    ok: bool
    w_mean: float | None
    w_nn: float | None
    n_examples: int
    message: str


def _forecast_one(job: tuple[SeriesKey, KpiSeries, PipelineConfig, str | None]):
    """Worker body: fit and forecast one series, isolating its failures."""
    key, series, cfg, save_dir = job
    try:
        forecast, fitted = run_series(series, cfg)
    except Exception as exc:  # per-series isolation: a bad series never kills the run
        return SeriesStatus(key, False, None, None, 0, f"{type(exc).__name__}: {exc}"), None
    if save_dir is not None and fitted.model is not None:
        path = Path(save_dir) / f"{_safe_name(key)}.kpfm"
        save_model(path, fitted.model, fitted.scaled.mean_scale, fitted.scaled.last_scale)
    status = SeriesStatus(
        key, True, fitted.weights.w_mean, fitted.weights.w_nn,
        fitted.n_examples, "; ".join(fitted.notes),
    )
    return status, forecast


def run_forecast(
    corpus: dict[SeriesKey, KpiSeries],
    cfg: PipelineConfig,
    workers: int = 1,
    save_models_dir: str | None = None,
) -> tuple[list[SeriesForecast], list[SeriesStatus]]:
    """Forecast every series, in parallel when asked.

    Per-series seeds are derived from (cfg.seed, key), so results do not
    depend on the worker count or scheduling order.
    """
    if save_models_dir is not None:
        Path(save_models_dir).mkdir(parents=True, exist_ok=True)
    jobs = [(key, corpus[key], cfg, save_models_dir) for key in sorted(corpus)]
    if workers <= 1:
        results = [_forecast_one(job) for job in jobs]
    else:
        with multiprocessing.Pool(processes=workers) as pool:
            results = pool.map(_forecast_one, jobs)
    statuses = [status for status, _ in results]
    forecasts = [fc for _, fc in results if fc is not None]
    return forecasts, statuses


def write_status_csv(statuses: list[SeriesStatus], stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["host_id", "kpi_name", "status", "w_mean", "w_nn", "n_examples", "message"])
    for st in sorted(statuses, key=lambda s: s.key):
        writer.writerow(
            [st.key.host_id, st.key.kpi_name, "ok" if st.ok else "failed",
             "" if st.w_mean is None else repr(st.w_mean),
             "" if st.w_nn is None else repr(st.w_nn),
             st.n_examples, st.message]
        )


def _safe_name(key: SeriesKey) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", f"{key.host_id}__{key.kpi_name}")


# --- bench ------------------------------------------------------------------


@dataclass
class BenchResult:
    timings: list[float]
    mean: float
    sd: float
    ci_low: float
    ci_high: float
    n_examples: int


def run_bench(cfg: PipelineConfig, length_hours: int, repetitions: int) -> BenchResult:
    """Time one training epoch on a representative series, repeatedly."""
    spec = SynthSpec("seasonal", length_hours, seed=cfg.seed + 97, baseline=100.0,
                     amplitude=40.0, noise_sd=2.0)
    scaled = scale_series(interpolate_gaps(generate(spec)), cfg.c, cfg.d)
    examples = build_training_set(scaled, cfg.window(), mean_predict(scaled))
    timings: list[float] = []
    for rep in range(repetitions):
        model = init_mlp(input_dim(cfg.window()), seed=cfg.seed + rep, dropout_p=cfg.dropout_p)
        adam = adam_init(model, lr=cfg.lr)
        t0 = time.perf_counter()
        train(model, adam, examples,
              TrainConfig(epochs=1, lr=cfg.lr, dropout_p=cfg.dropout_p, seed=rep))
        timings.append(time.perf_counter() - t0)
    mean = float(np.mean(timings))
    sd = float(np.std(timings, ddof=1)) if len(timings) > 1 else 0.0
    half = 1.96 * sd / np.sqrt(len(timings))
    return BenchResult(timings, mean, sd, float(mean - half), float(mean + half), len(examples))


def write_bench_csv(result: BenchResult, stream: IO[str]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["metric", "seconds"])
    for i, t in enumerate(result.timings, start=1):
        writer.writerow([f"epoch_{i}", repr(t)])
    writer.writerow(["mean", repr(result.mean)])
    writer.writerow(["sd", repr(result.sd)])
    writer.writerow(["ci_low", repr(result.ci_low)])
    writer.writerow(["ci_high", repr(result.ci_high)])


# --- command handlers ---------------------------------------------------------


def cmd_synth(args: argparse.Namespace) -> int:
    corpus = generate_corpus(args.n_per_class, args.seed, args.length_hours, args.gap_prob)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        rows = write_corpus_csv(corpus.values(), f)
    print(f"wrote {len(corpus)} series ({rows} rows) to {args.out}")
    return 0


def _column_mapping(args: argparse.Namespace) -> ColumnMapping:
    values: dict[str, str] = {}
    if args.column_map:
        with open(args.column_map, encoding="utf-8") as f:
            values.update(json.load(f))
    for override in args.col or []:
        role, _, name = override.partition("=")
        if not name:
            raise CorpusFormatError(f"--col expects role=name, got {override!r}")
        values[role.strip()] = name.strip()
    valid = {f.name for f in fields(ColumnMapping)}
    unknown = set(values) - valid
    if unknown:
        raise CorpusFormatError(f"unknown column role(s): {', '.join(sorted(unknown))}")
    return ColumnMapping(**values)


def cmd_ingest(args: argparse.Namespace) -> int:
    corpus, parsed = load_corpus(args.input, _column_mapping(args))
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        rows = write_corpus_csv(corpus.values(), f)
    gap_fractions = [s.gap_fraction for s in corpus.values()]
    print(
        f"read {parsed.rows_read} rows: {len(corpus)} series, {rows} samples, "
        f"{parsed.malformed} malformed, {parsed.duplicates} duplicates, "
        f"{parsed.consistency_warnings} consistency warnings, "
        f"mean gap fraction {np.mean(gap_fractions):.4f}"
    )
    for msg in parsed.messages:
        log.warning("%s", msg)
    return 0


def cmd_forecast(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    corpus, parsed = load_corpus(args.input)
    if parsed.malformed or parsed.duplicates:
        log.warning("input had %d malformed and %d duplicate rows", parsed.malformed, parsed.duplicates)
    forecasts, statuses = run_forecast(corpus, cfg, workers=args.workers,
                                       save_models_dir=args.save_models)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        write_forecast_csv(forecasts, f)
    status_path = args.status_log or str(Path(args.out).with_name(Path(args.out).stem + "_status.csv"))
    with open(status_path, "w", newline="", encoding="utf-8") as f:
        write_status_csv(statuses, f)
    n_ok = sum(1 for s in statuses if s.ok)
    n_mean_only = sum(1 for s in statuses if s.ok and s.w_nn == 0.0)
    print(
        f"forecast {n_ok}/{len(statuses)} series ({n_mean_only} mean-only) "
        f"-> {args.out}; status log {status_path}"
    )
    return 0 if n_ok > 0 else 1


def cmd_score(args: argparse.Namespace) -> int:
    with open(args.forecast, newline="", encoding="utf-8") as f:
        forecasts = read_forecast_csv(f)
    truth, _ = load_corpus(args.truth)
    shared = sorted(set(forecasts) & set(truth))
    if not shared:
        raise CorpusFormatError("no overlapping series between forecasts and truth corpus")
    only_fc = len(forecasts) - len(shared)
    only_truth = len(truth) - len(shared)
    if only_fc or only_truth:
        log.warning("scoring intersection of keys: %d forecast-only, %d truth-only skipped",
                    only_fc, only_truth)

    # Horizon 1 is the earliest hour present anywhere in the truth corpus.
    t0 = min(s.start for s in truth.values())
    pairs = {}
    skipped_points = 0
    for key in shared:
        series = truth[key]
        ts, ps = [], []
        for h in sorted(forecasts[key]):
            i = int((t0 + (h - 1) * HOUR - series.start) / HOUR)
            if 0 <= i < len(series) and series.samples[i] is not None:
                ts.append(series.samples[i].mean)
                ps.append(forecasts[key][h])
            else:
                skipped_points += 1
        if ts:
            pairs[key] = (ts, ps)
    if not pairs:
        raise CorpusFormatError("no forecast horizon matched an observed truth hour")
    if skipped_points:
        log.warning("%d forecast points had no observed truth hour", skipped_points)

    report = score_pairs(pairs)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        write_score_csv(report, f)
    print(report.summary_line())
    if not args.no_figure:
        from . import report as rpt

        fig_path = Path(args.out).with_suffix(".png")
        rpt.save_score_figure(report, fig_path)
        print(f"figure -> {fig_path}")
    return 0


def cmd_profile(args: argparse.Namespace) -> int:
    corpus, _ = load_corpus(args.input)
    selected = {
        key: series
        for key, series in corpus.items()
        if (args.host is None or key.host_id == args.host)
        and (args.kpi is None or key.kpi_name == args.kpi)
    }
    if not selected:
        raise CorpusFormatError("no series matched the host/kpi selection")
    profiles = {key: weekly_profile(interpolate_gaps(s)) for key, s in sorted(selected.items())}
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        write_profile_csv(profiles, f)
    print(f"wrote weekly profiles for {len(profiles)} series to {args.out}")
    if not args.no_figure:
        from . import report as rpt

        fig_dir = Path(args.out).with_name(Path(args.out).stem + "_figures")
        fig_dir.mkdir(parents=True, exist_ok=True)
        for key, rows in profiles.items():
            rpt.save_profile_figure(rows, key, fig_dir / f"{_safe_name(key)}.png")
        print(f"figures -> {fig_dir}")
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    cfg = _pipeline_config(args)
    result = run_bench(cfg, args.length_hours, args.repetitions)
    with open(args.out, "w", newline="", encoding="utf-8") as f:
        write_bench_csv(result, f)
    print(
        f"{len(result.timings)} repetitions on {result.n_examples} examples: "
        f"{result.mean:.3f} s/epoch (sd {result.sd:.3f}, "
        f"0.95 CI [{result.ci_low:.3f}, {result.ci_high:.3f}]) -> {args.out}"
    )
    if not args.no_figure:
        from . import report as rpt

        fig_path = Path(args.out).with_suffix(".png")
        rpt.save_bench_figure(result.timings, result.mean, (result.ci_low, result.ci_high), fig_path)
        print(f"figure -> {fig_path}")
    return 0


# --- parser -------------------------------------------------------------------


def _pipeline_config(args: argparse.Namespace) -> PipelineConfig:
    return PipelineConfig(
        k=args.k,
        e_offset_variant=args.e_offset,
        c=args.c,
        d=args.d,
        epochs=args.epochs,
        lr=LR_LITERAL if args.lr_literal else args.lr,
        dropout_p=args.dropout,
        seed=args.seed,
    )


def _add_model_options(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--k", type=int, default=2, help="lookback weeks for same-hour features")
    g.add_argument("--c", type=float, default=0.0, help="lower bound of the scaled range")
    g.add_argument("--d", type=float, default=100.0, help="upper bound of the scaled range")
    g.add_argument("--epochs", type=int, default=6)
    g.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    g.add_argument("--lr-literal", action="store_true",
                   help=f"use the alternative rate {LR_LITERAL} instead of --lr")
    g.add_argument("--dropout", type=float, default=0.1,
                   help="dropout rate between the hidden layers")
    g.add_argument("--seed", type=int, default=0, help="global seed; per-series seeds derive from it")
    g.add_argument("--e-offset", choices=[E_OFFSET_PAPER, E_OFFSET_WEEK_START],
                   default=E_OFFSET_PAPER, help="anchor offset variant")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kpiforecast",
        description="Per-series hourly KPI forecasting: overall-mean predictor + small "
                    "feed-forward network, combined by a hold-out weight heuristic.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log warnings and info")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--n-per-class", type=int, default=25)
    p.add_argument("--length-hours", type=int, default=2184)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--gap-prob", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="normalize telemetry to the canonical CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--column-map", help="JSON file mapping column roles to header names")
    p.add_argument("--col", action="append", metavar="ROLE=NAME",
                   help="single role mapping override (repeatable)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("forecast", help="train per-series models and forecast the next week")
    p.add_argument("--input", required=True, help="canonical corpus CSV")
    p.add_argument("--out", required=True, help="forecast CSV path")
    p.add_argument("--status-log", help="per-series status CSV (default: <out>_status.csv)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--save-models", metavar="DIR", help="persist trained models to DIR")
    _add_model_options(p)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("score", help="score a forecast CSV against a truth corpus")
    p.add_argument("--forecast", required=True)
    p.add_argument("--truth", required=True, help="canonical corpus CSV with the observed target week")
    p.add_argument("--out", required=True, help="per-series score CSV path")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("profile", help="weekly seasonality profiles with 0.95 CIs")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--host", help="restrict to one host_id")
    p.add_argument("--kpi", help="restrict to one kpi_name")
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("bench", help="per-epoch training time on a representative series")
    p.add_argument("--out", required=True)
    p.add_argument("--length-hours", type=int, default=2184)
    p.add_argument("--repetitions", type=int, default=10)
    p.add_argument("--no-figure", action="store_true")
    _add_model_options(p)
    p.set_defaults(func=cmd_bench)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CorpusFormatError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
