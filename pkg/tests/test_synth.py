import pytest

from kpiforecast.synth import (
    CLASSES,
    SynthSpec,
    class_from_kpi_name,
    generate,
    generate_corpus,
    inject_gaps,
    sub_hour_draws,
)

from conftest import corpus_csv_text


class TestGenerate:
    def test_noiseless_constant_is_exact(self):
        spec = SynthSpec("noisy_constant", 48, seed=0, baseline=3.7, noise_sd=0.0)
        for s in generate(spec).samples:
            assert s.mean == 3.7
            assert s.std == 0.0
            assert s.min == s.max == s.first == s.last == 3.7
            assert s.count == 60

    def test_seasonal_noiseless_exactly_periodic(self):
        spec = SynthSpec("seasonal", 168 * 3, seed=1, baseline=50, amplitude=10,
                         daily_amplitude=3, noise_sd=0.0)
        means = [s.mean for s in generate(spec).samples]
        assert means[:168] == means[168:336] == means[336:]

    def test_aggregates_recomputable_from_draws(self):
        # Oracle: the retained sub-hour draws must reproduce every
        # aggregate, and the hard invariants must hold exactly.
        for cls in CLASSES:
            spec = SynthSpec(cls, 100, seed=5, baseline=80, amplitude=20, noise_sd=4.0,
                             slope=0.1, burst_rate=0.1, burst_height=50)
            draws = sub_hour_draws(spec)
            series = generate(spec)
            assert draws.shape == (100, 60)
            for row, s in zip(draws, series.samples):
                assert s.min == row.min() and s.max == row.max()
                assert s.first == row[0] and s.last == row[-1]
                assert s.mean == pytest.approx(row.mean(), rel=1e-12, abs=1e-12)
                assert s.std == pytest.approx(row.std(), rel=1e-9, abs=1e-12)
                assert s.min <= s.mean <= s.max
                assert s.min <= s.first <= s.max and s.min <= s.last <= s.max
                assert s.std >= 0.0

    def test_deterministic_per_seed(self):
        spec = SynthSpec("bursty", 500, seed=9, baseline=10, burst_rate=0.05,
                         burst_height=100, noise_sd=1.0)
        assert corpus_csv_text([generate(spec)]) == corpus_csv_text([generate(spec)])

    def test_invalid_specs(self):
        with pytest.raises(ValueError):
            SynthSpec("sawtooth", 100, seed=0)
        with pytest.raises(ValueError):
            SynthSpec("seasonal", 0, seed=0)
        with pytest.raises(ValueError):
            SynthSpec("seasonal", 100, seed=0, noise_sd=-1)


class TestCorpus:
    def test_counts_and_keys(self):
        corpus = generate_corpus(25, base_seed=3, length_hours=400)
        assert len(corpus) == 100
        assert len({k.host_id for k in corpus}) == 100

    def test_class_recoverable_from_suffix(self):
        corpus = generate_corpus(2, base_seed=0, length_hours=200)
        classes = sorted({class_from_kpi_name(k.kpi_name) for k in corpus})
        assert classes == sorted(CLASSES)
        assert class_from_kpi_name("weird") is None

    def test_same_seed_identical(self):
        a = generate_corpus(3, base_seed=7, length_hours=300)
        b = generate_corpus(3, base_seed=7, length_hours=300)
        assert corpus_csv_text(a.values()) == corpus_csv_text(b.values())

    def test_different_seed_differs(self):
        a = generate_corpus(2, base_seed=1, length_hours=200)
        b = generate_corpus(2, base_seed=2, length_hours=200)
        assert corpus_csv_text(a.values()) != corpus_csv_text(b.values())

    def test_gap_injection(self):
        corpus = generate_corpus(2, base_seed=0, length_hours=500, gap_prob=0.2)
        fractions = [s.gap_fraction for s in corpus.values()]
        assert all(0.05 < f < 0.4 for f in fractions)

    def test_inject_gaps_never_removes_everything(self):
        series = generate(SynthSpec("noisy_constant", 20, seed=0))
        gapped = inject_gaps(series, 0.99, seed=1)
        assert gapped.gap_count < len(gapped)

    def test_n_per_class_validation(self):
        with pytest.raises(ValueError):
            generate_corpus(0, base_seed=0)
