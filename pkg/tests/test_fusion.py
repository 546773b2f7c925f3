"""
Tests for rater averaging, sampling schedules and ensemble aggregation
"""

from collections import Counter

import numpy as np
import pytest

from src.annotation_model.coordinates import ISBI_ORIGINAL
from src.annotation_model.schemas import AnnotationSet, LandmarkPoint, Provenance, SampleCorpus, SampleSet
from src.fusion.strategies import (
    SCHEDULE_BLOCK_SIZE,
    FusionKind,
    FusionStrategy,
    SamplingSchedule,
    aggregate_ensemble,
    average_annotations,
    build_training_schedule,
    final_prediction_table,
    fused_prediction,
    sampling_schedule,
)
from src.geometry.covariance import centroid
from src.utils.exceptions import ConfigError, DataError, ProvenanceError


def _point(x: float, y: float) -> LandmarkPoint:
    return LandmarkPoint(x, y, ISBI_ORIGINAL)


def _samples(points, provenance=Provenance.MC_DROPOUT, scan_id="s", landmark_id=0) -> SampleSet:
    return SampleSet(scan_id, landmark_id, provenance, tuple((_point(x, y), None) for x, y in points))


# ---------------------------------------------------------------- averaging

def test_average_annotations_examples():
    pair = AnnotationSet("s", 0, (("r1", _point(0.0, 0.0)), ("r2", _point(2.0, 2.0))))
    mean = average_annotations(pair)
    assert (mean.x, mean.y) == (1.0, 1.0)
    assert mean.space == ISBI_ORIGINAL

    single = AnnotationSet("s", 0, (("r1", _point(7.5, 3.25)),))
    assert average_annotations(single) == _point(7.5, 3.25)


def test_average_matches_cloud_centroid(rng):
    coords = rng.uniform(100, 1800, size=(11, 2))
    annotation_set = AnnotationSet("s", 0, tuple((f"r{i}", _point(x, y)) for i, (x, y) in enumerate(coords)))
    mean = average_annotations(annotation_set)
    np.testing.assert_allclose([mean.x, mean.y], centroid(coords), atol=1e-12)
    np.testing.assert_allclose([mean.x, mean.y], coords.sum(axis=0) / 11, rtol=1e-12)


# ---------------------------------------------------------------- schedules

def test_schedule_single_rater_is_all_zero():
    assert sampling_schedule(5, 1, 50) == [0] * 50


def test_schedule_is_reproducible_and_prefix_stable():
    assert sampling_schedule(42, 11, 500) == sampling_schedule(42, 11, 500)
    long = sampling_schedule(42, 11, 3 * SCHEDULE_BLOCK_SIZE)
    for k in (1, 10, SCHEDULE_BLOCK_SIZE - 1, SCHEDULE_BLOCK_SIZE + 5, 1500):
        assert sampling_schedule(42, 11, k) == long[:k]


def test_schedule_iterator_matches_draws():
    schedule = SamplingSchedule(9, 4)
    iterated = [index for index, _ in zip(schedule, range(2000))]
    assert iterated == SamplingSchedule(9, 4).draws(2000)


def test_schedule_is_roughly_uniform():
    counts = Counter(sampling_schedule(123, 11, 110000))
    assert set(counts) == set(range(11))
    for count in counts.values():
        assert abs(count - 10000) <= 500


def test_schedule_seed_sequences():
    assert sampling_schedule([7, 3], 11, 100) == sampling_schedule((7, 3), 11, 100)
    assert sampling_schedule([7, 3], 11, 100) != sampling_schedule([7, 4], 11, 100)


def test_schedule_validation():
    with pytest.raises(DataError):
        sampling_schedule(1, 0, 10)
    with pytest.raises(DataError):
        SamplingSchedule(1, 3).draws(-1)


def test_training_schedule_layout(small_corpus):
    records = build_training_schedule(small_corpus, seed=11, n_iterations=6)
    assert len(records) == 6 * len(small_corpus)
    assert [r["iteration"] for r in records[: len(small_corpus)]] == [0] * len(small_corpus)
    for record in records:
        assert record["rater_id"] in small_corpus.sets[(record["scan_id"], record["landmark_id"])].rater_ids


def test_training_schedule_exclusion_keeps_other_draws(small_corpus):
    full = build_training_schedule(small_corpus, seed=11, n_iterations=20)
    reduced = build_training_schedule(small_corpus, seed=11, n_iterations=20, exclude_scans=["scan_1"])
    assert all(r["scan_id"] != "scan_1" for r in reduced)
    assert reduced == [r for r in full if r["scan_id"] != "scan_1"]


def test_training_schedule_needs_iterations(small_corpus):
    with pytest.raises(DataError):
        build_training_schedule(small_corpus, seed=1, n_iterations=0)


# ---------------------------------------------------------------- ensembles / MC

def test_aggregate_ensemble_mean():
    point = aggregate_ensemble(_samples([(0.0, 0.0), (4.0, 0.0)], Provenance.ENSEMBLE))
    assert (point.x, point.y) == (2.0, 0.0)
    with pytest.raises(ProvenanceError):
        aggregate_ensemble(_samples([(0.0, 0.0)], Provenance.MC_DROPOUT))


def test_identical_mc_samples_give_that_point():
    samples = _samples([(12.5, 40.0)] * 20)
    point = fused_prediction(FusionStrategy(FusionKind.RANDOM_SAMPLING), samples)
    assert (point.x, point.y) == (12.5, 40.0)


def test_fused_prediction_checks_provenance():
    with pytest.raises(ProvenanceError):
        fused_prediction(FusionStrategy.from_name("deep_ensembles"), _samples([(1.0, 1.0)], Provenance.MC_DROPOUT))
    with pytest.raises(ProvenanceError):
        fused_prediction(FusionStrategy.from_name("averaging"), _samples([(1.0, 1.0)], Provenance.ENSEMBLE))
    with pytest.raises(ProvenanceError):
        fused_prediction(FusionStrategy.from_name("averaging"), _samples([(1.0, 1.0)], Provenance.RATERS))


def test_fused_prediction_permutation_invariant(rng):
    coords = rng.uniform(0, 1000, size=(9, 2))
    strategy = FusionStrategy.from_name("deep_ensembles")
    a = fused_prediction(strategy, _samples(coords, Provenance.ENSEMBLE))
    b = fused_prediction(strategy, _samples(coords[rng.permutation(9)], Provenance.ENSEMBLE))
    assert a.x == pytest.approx(b.x, rel=1e-12)
    assert a.y == pytest.approx(b.y, rel=1e-12)


def test_strategy_names():
    assert FusionStrategy.from_name("random_sampling").expected_provenance is Provenance.MC_DROPOUT
    assert FusionStrategy("deep_ensembles").name == "deep_ensembles"
    with pytest.raises(ConfigError):
        FusionStrategy.from_name("majority_vote")


def test_final_prediction_table():
    corpus = SampleCorpus.from_sets([
        _samples([(0.0, 0.0), (2.0, 2.0)], scan_id="a", landmark_id=0),
        _samples([(5.0, 5.0)], scan_id="a", landmark_id=1),
    ], "averaging")
    table = final_prediction_table(corpus, FusionStrategy.from_name("averaging"))
    assert list(table.columns) == ["scan_id", "landmark_id", "x_px", "y_px", "space_id", "n_samples"]
    assert table.loc[0, "x_px"] == 1.0
    assert list(table["n_samples"]) == [2, 1]
    assert set(table["space_id"]) == {"isbi_original"}
