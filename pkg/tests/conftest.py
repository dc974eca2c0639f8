import io

import pytest

from kpiforecast.ingest import write_corpus_csv
from kpiforecast.types import AggregatedSample, KpiSeries, SeriesKey, utc

#: Label of a Monday's first hour: slot 0 has meta (m1=1, m2=1).
MONDAY_H1 = utc(2020, 1, 6, 1)


def sample(v: float, count: int = 60, last: float | None = None) -> AggregatedSample:
    last = v if last is None else last
    lo = min(v, last)
    hi = max(v, last)
    return AggregatedSample(count=count, mean=v, std=0.0, first=v, last=last, max=hi, min=lo)


def make_series(means, start=MONDAY_H1, key=None, gaps=(), lasts=None) -> KpiSeries:
    """Series whose aggregates are derived from the given mean values."""
    key = key or SeriesKey("h1", "cpu")
    gap_set = set(gaps)
    samples = []
    for i, v in enumerate(means):
        if i in gap_set:
            samples.append(None)
        else:
            samples.append(sample(float(v), last=None if lasts is None else float(lasts[i])))
    return KpiSeries(key, start, samples)


def corpus_csv_text(corpus) -> str:
    buf = io.StringIO()
    write_corpus_csv(corpus, buf)
    return buf.getvalue()


@pytest.fixture
def tmp_csv(tmp_path):
    def write(name: str, text: str) -> str:
        p = tmp_path / name
        p.write_text(text, encoding="utf-8")
        return str(p)

    return write
