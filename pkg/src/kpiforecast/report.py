"""Figure rendering for the reporting commands.

Each report command writes its delimited output first; these helpers render a
companion PNG next to it.  Everything goes through the Agg backend so the CLI
works headless.
"""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .evaluation import ProfileRow, ScoreReport
from .types import SeriesKey


def save_profile_figure(rows: list[ProfileRow], key: SeriesKey, path: str | Path) -> None:
    """Weekly profile: mean line with the 0.95 CI band, hour-of-week on x."""
    hours = [r.hour_of_week for r in rows if r.n > 0]
    means = [r.mean for r in rows if r.n > 0]
    lo = [r.ci_low for r in rows if r.n > 0]
    hi = [r.ci_high for r in rows if r.n > 0]
    fig, ax = plt.subplots(figsize=(8, 3.2))
    ax.fill_between(hours, lo, hi, alpha=0.3, label="0.95 CI")
    ax.plot(hours, means, lw=1.2, label="mean")
    ax.set_xlabel("hour of week (Mon 1 .. Sun 168)")
    ax.set_ylabel("hourly mean")
    ax.set_xlim(1, 168)
    ax.set_xticks(range(0, 169, 24))
    ax.set_title(f"{key.host_id} / {key.kpi_name}")
    ax.legend(loc="upper right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_score_figure(report: ScoreReport, path: str | Path) -> None:
    """Histogram of per-series scores (floored at -1 for display)."""
    vals = [max(v, -1.0) for v in report.per_series.values() if v is not None]
    fig, ax = plt.subplots(figsize=(6, 3.6))
    if vals:
        ax.hist(vals, bins=40, range=(-1.0, 1.0), color="tab:blue", alpha=0.8)
    if report.pooled is not None and math.isfinite(report.pooled):
        ax.axvline(max(report.pooled, -1.0), color="tab:red", lw=1.5,
                   label=f"pooled = {report.pooled:.3f}")
        ax.legend(fontsize=8)
    ax.set_xlabel("per-series R² (clipped at -1)")
    ax.set_ylabel("series")
    ax.set_title(f"{len(report.per_series)} series, {report.n_undefined} undefined")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_bench_figure(timings: list[float], mean: float, ci: tuple[float, float], path: str | Path) -> None:
    """Per-repetition epoch timings with the mean and its 0.95 CI."""
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(range(1, len(timings) + 1), timings, "o-", ms=4, label="seconds/epoch")
    ax.axhline(mean, color="tab:red", lw=1.2, label=f"mean = {mean:.3f} s")
    ax.axhspan(ci[0], ci[1], color="tab:red", alpha=0.15, label="0.95 CI")
    ax.set_xlabel("repetition")
    ax.set_ylabel("seconds per epoch")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
