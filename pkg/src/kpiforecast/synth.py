"""Seeded synthetic KPI corpora for tests and desk-scale benchmarks.

Four qualitative series classes mirror what real host telemetry looks like:
daily/weekly seasonal load, noisy-but-constant gauges, long-term trends, and
flat series with sporadic bursts.  Every hour is backed by 60 simulated
sub-hour draws so the seven aggregates are internally consistent instead of
being invented independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import AggregatedSample, KpiSeries, SeriesKey, utc

CLASSES = ("seasonal", "noisy_constant", "trend", "bursty")

DRAWS_PER_HOUR = 60

#: Label of a Monday's first hour, so generated series start week-aligned.
DEFAULT_START = utc(2020, 1, 6, 1)


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for one synthetic series; unused class parameters are ignored."""

    series_class: str
    length_hours: int
    seed: int
    baseline: float = 100.0
    amplitude: float = 40.0
    daily_amplitude: float = 10.0
    noise_sd: float = 2.0
    slope: float = 0.05
    burst_rate: float = 0.02
    burst_height: float = 80.0

    def __post_init__(self) -> None:
        if self.series_class not in CLASSES:
            raise ValueError(f"unknown series class {self.series_class!r}; expected one of {CLASSES}")
        if self.length_hours < 1:
            raise ValueError(f"length_hours must be >= 1, got {self.length_hours}")
        if self.noise_sd < 0:
            raise ValueError(f"noise_sd must be >= 0, got {self.noise_sd}")
        if not 0.0 <= self.burst_rate <= 1.0:
            raise ValueError(f"burst_rate must be in [0, 1], got {self.burst_rate}")


def _levels(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    """Deterministic hourly level path (noise is added per sub-hour draw)."""
    t = np.arange(spec.length_hours)
    if spec.series_class == "seasonal":
        # Integer mod before the trig keeps the noiseless path exactly
        # 168-periodic; the start is week-aligned so phase 0 is Monday hour 1.
        weekly = spec.amplitude * np.sin(2.0 * np.pi * (t % 168) / 168.0)
        daily = spec.daily_amplitude * np.sin(2.0 * np.pi * (t % 24) / 24.0)
        return spec.baseline + weekly + daily
    if spec.series_class == "noisy_constant":
        return np.full(spec.length_hours, spec.baseline)
    if spec.series_class == "trend":
        return spec.baseline + spec.slope * t.astype(float)
    # bursty: flat baseline with sporadic elevated hours
    bursts = rng.random(spec.length_hours) < spec.burst_rate
    return spec.baseline + spec.burst_height * bursts


def sub_hour_draws(spec: SynthSpec) -> np.ndarray:
    """The (length_hours, 60) simulated measurements behind the aggregates."""
    rng = np.random.default_rng(spec.seed)
    levels = _levels(spec, rng)
    draws = np.tile(levels[:, None], (1, DRAWS_PER_HOUR))
    if spec.noise_sd > 0:
        draws = draws + rng.normal(0.0, spec.noise_sd, size=draws.shape)
    return draws


def _aggregate_hour(row: np.ndarray) -> AggregatedSample:
    lo = float(row.min())
    hi = float(row.max())
    # Centered mean is exact on constant rows; the clamp absorbs the last
    # ulp of summation roundoff so min <= mean <= max holds exactly.
    offsets = row - row[0]
    off_mean = float(offsets.mean())
    mean = min(max(float(row[0] + off_mean), lo), hi)
    std = float(np.sqrt(np.mean((offsets - off_mean) ** 2)))
    return AggregatedSample(
        count=row.size, mean=mean, std=std,
        first=float(row[0]), last=float(row[-1]), max=hi, min=lo,
    )


def generate(spec: SynthSpec, key: SeriesKey | None = None, start=DEFAULT_START) -> KpiSeries:
    """Synthesize one gap-free series; deterministic for a given spec."""
    key = key or SeriesKey("synth-host", f"synth_{spec.series_class}")
    samples = [_aggregate_hour(row) for row in sub_hour_draws(spec)]
    return KpiSeries(key=key, start=start, samples=samples)


def inject_gaps(series: KpiSeries, deletion_prob: float, seed: int) -> KpiSeries:
    """Drop slots independently with the given probability (never all of them)."""
    if not 0.0 <= deletion_prob < 1.0:
        raise ValueError(f"deletion_prob must be in [0, 1), got {deletion_prob}")
    rng = np.random.default_rng(seed)
    drop = rng.random(len(series)) < deletion_prob
    if drop.all():
        drop[0] = False
    samples = [None if d else s for s, d in zip(series.samples, drop)]
    return KpiSeries(series.key, series.start, samples)


def class_from_kpi_name(kpi_name: str) -> str | None:
    """Recover the generator class from the naming convention's suffix."""
    for cls in CLASSES:
        if kpi_name.endswith(cls):
            return cls
    return None


def spec_for_class(cls: str, length_hours: int, rng: np.random.Generator) -> SynthSpec:
    """Draw one series recipe with class-appropriate randomized parameters.

    Baselines vary widely across series on purpose: pooled scores over a
    corpus are dominated by between-series variance, as in real fleets.
    """
    baseline = float(rng.uniform(20.0, 500.0))
    seed = int(rng.integers(0, 2**32))
    if cls == "seasonal":
        amplitude = baseline * float(rng.uniform(0.25, 0.6))
        return SynthSpec(
            cls, length_hours, seed, baseline=baseline, amplitude=amplitude,
            daily_amplitude=0.25 * amplitude, noise_sd=0.05 * amplitude,
        )
    if cls == "noisy_constant":
        return SynthSpec(
            cls, length_hours, seed, baseline=baseline,
            noise_sd=baseline * float(rng.uniform(0.05, 0.15)),
        )
    if cls == "trend":
        total_drift = baseline * float(rng.uniform(-0.4, 0.4))
        return SynthSpec(
            cls, length_hours, seed, baseline=baseline,
            slope=total_drift / length_hours, noise_sd=0.02 * baseline,
        )
    return SynthSpec(
        cls, length_hours, seed, baseline=baseline,
        burst_rate=float(rng.uniform(0.01, 0.05)),
        burst_height=baseline * float(rng.uniform(0.5, 2.0)),
        noise_sd=0.02 * baseline,
    )


def generate_corpus(
    n_per_class: int,
    base_seed: int,
    length_hours: int = 2184,
    gap_prob: float = 0.0,
) -> dict[SeriesKey, KpiSeries]:
    """4 * n_per_class series with distinct keys and derived seeds.

    The class of each series is recoverable from its kpi_name suffix.
    """
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    corpus: dict[SeriesKey, KpiSeries] = {}
    for ci, cls in enumerate(CLASSES):
        for j in range(n_per_class):
            rng = np.random.default_rng(np.random.SeedSequence([base_seed, ci, j]))
            spec = spec_for_class(cls, length_hours, rng)
            key = SeriesKey(f"host{ci * n_per_class + j:04d}", f"kpi{j:02d}_{cls}")
            series = generate(spec, key=key)
            if gap_prob > 0.0:
                series = inject_gaps(series, gap_prob, seed=int(rng.integers(0, 2**32)))
            corpus[key] = series
    return corpus

