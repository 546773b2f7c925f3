"""
Tests for the synthetic annotation and prediction-sample generator
"""

import numpy as np
import pytest

from src.annotation_model.coordinates import ISBI_ORIGINAL, derive_space, points_to_mm
from src.annotation_model.schemas import Provenance, annotation_set_to_samples
from src.fusion.strategies import FusionStrategy
from src.geometry.covariance import PointCloud
from src.metrics.variability import cvar, landmark_metrics, wcvar
from src.synthetic.generator import (
    ConfidenceModel,
    GeneratorSpec,
    LandmarkModel,
    gaussian_draws,
    generate_annotations,
    generate_prediction_samples,
    write_simulated_corpus,
)
from src.utils.config import SimulationSettings
from src.utils.exceptions import DataError


def _spec(**overrides) -> GeneratorSpec:
    params = dict(
        seed=5,
        n_scans=4,
        n_landmarks=2,
        n_raters=7,
        landmark_models=(LandmarkModel.from_axes(100.0, 120.0, 2.0, 1.0, 20.0),),
    )
    params.update(overrides)
    return GeneratorSpec(**params)


# ---------------------------------------------------------------- models / specs

def test_landmark_model_validation():
    with pytest.raises(DataError):
        LandmarkModel(np.array([0.0, 0.0]), np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(DataError):
        LandmarkModel(np.array([0.0, 0.0]), np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(DataError):
        LandmarkModel.from_axes(0.0, 0.0, -1.0, 1.0)
    zero = LandmarkModel.from_axes(10.0, 10.0, 0.0, 0.0)
    np.testing.assert_array_equal(zero.covariance_mm2, np.zeros((2, 2)))


def test_spec_broadcasts_single_model_and_validates():
    spec = _spec(n_landmarks=3)
    assert len(spec.landmark_models) == 3
    with pytest.raises(DataError):
        _spec(n_landmarks=3, landmark_models=(spec.landmark_models[0],) * 2)
    with pytest.raises(DataError):
        _spec(n_raters=0)
    with pytest.raises(DataError):
        _spec(scan_scale_range=(2.0, 1.0))


def test_spec_ids_and_sample_counts():
    spec = _spec(n_scans=12, n_raters=11)
    assert spec.scan_ids()[:2] == ["scan_000", "scan_001"]
    assert spec.rater_ids()[0] == "rater_01"
    assert spec.rater_ids()[-1] == "rater_11"
    assert spec.default_samples(FusionStrategy.from_name("averaging")) == 20
    assert spec.default_samples(FusionStrategy.from_name("deep_ensembles")) == 11
    assert _spec(ensemble_size=5).default_samples(FusionStrategy.from_name("deep_ensembles")) == 5


def test_spec_from_default_settings():
    spec = GeneratorSpec.from_settings(SimulationSettings(), seed=3)
    assert spec.n_scans == 100
    assert len(spec.landmark_models) == 5
    assert spec.confidence_model is ConfidenceModel.SPREAD_COUPLED
    assert spec.ensemble_size == 11
    assert spec.heatmap_sigma_px is None
    scales = spec.scan_scales()
    assert scales.min() >= 0.5 and scales.max() <= 2.0

    settings = SimulationSettings(n_raters=4, ensemble_size=None)
    assert GeneratorSpec.from_settings(settings, seed=3, heatmap_sigma_px=2.0).ensemble_size == 4


# ---------------------------------------------------------------- draws

def test_gaussian_draws_recover_covariance(rng):
    covariance = np.array([[4.0, 1.5], [1.5, 2.0]])
    draws = gaussian_draws(rng, np.array([10.0, -3.0]), covariance, 10000)
    assert draws.shape == (10000, 2)
    empirical = np.cov(draws.T, bias=True)
    assert np.linalg.norm(empirical - covariance) <= 0.05 * np.linalg.norm(covariance)
    np.testing.assert_allclose(draws.mean(axis=0), [10.0, -3.0], atol=0.1)


def test_zero_covariance_places_every_rater_on_the_center():
    spec = _spec(n_scans=2, n_landmarks=1, landmark_models=(LandmarkModel.from_axes(50.0, 60.0, 0.0, 0.0),))
    corpus = generate_annotations(spec)
    for annotation_set in corpus:
        mm = points_to_mm(annotation_set.points)
        np.testing.assert_allclose(mm, np.tile([50.0, 60.0], (spec.n_raters, 1)), atol=1e-9)
        metrics = landmark_metrics(annotation_set_to_samples(annotation_set))
        assert metrics.cvar_mm == pytest.approx(0.0, abs=1e-9)
        assert metrics.psv_mm == pytest.approx(0.0, abs=1e-6)


def test_many_raters_recover_the_rater_gaussian():
    spec = _spec(n_scans=1, n_landmarks=1, n_raters=10000,
                 landmark_models=(LandmarkModel.from_axes(90.0, 110.0, 3.0, 1.0, 0.0),))
    annotation_set = next(iter(generate_annotations(spec)))
    metrics = landmark_metrics(annotation_set_to_samples(annotation_set))
    assert 2.85 <= metrics.psv_mm <= 3.15
    assert 2.7 <= metrics.anisotropy <= 3.3


# ---------------------------------------------------------------- corpora

def test_annotation_corpus_layout():
    spec = _spec()
    corpus = generate_annotations(spec)
    assert corpus.summary()["scans"] == 4
    assert corpus.summary()["annotation_sets"] == 8
    assert corpus.n_records == 4 * 2 * 7
    assert corpus.rater_ids() == spec.rater_ids()


def test_same_seed_gives_identical_files(tmp_path):
    first = write_simulated_corpus(_spec(), tmp_path / "a")
    second = write_simulated_corpus(_spec(), tmp_path / "b")
    assert set(first) == {"annotations", "averaging", "random_sampling", "deep_ensembles"}
    for key in first:
        assert first[key].read_bytes() == second[key].read_bytes()
    third = write_simulated_corpus(_spec(seed=6), tmp_path / "c")
    assert third["annotations"].read_bytes() != first["annotations"].read_bytes()


def test_prediction_samples_provenance_and_size():
    spec = _spec()
    annotations = generate_annotations(spec)
    mc = generate_prediction_samples(spec, FusionStrategy.from_name("random_sampling"), annotations=annotations)
    ensemble = generate_prediction_samples(spec, FusionStrategy.from_name("deep_ensembles"), annotations=annotations)
    assert mc.keys() == annotations.keys()
    assert all(s.provenance is Provenance.MC_DROPOUT and s.T == 20 for s in mc)
    assert all(s.provenance is Provenance.ENSEMBLE and s.T == 7 for s in ensemble)
    assert mc.strategy == "random_sampling"
    with pytest.raises(DataError):
        generate_prediction_samples(spec, FusionStrategy.from_name("averaging"), T=0, annotations=annotations)


def test_single_sample_has_zero_wcvar():
    spec = _spec()
    samples = generate_prediction_samples(spec, FusionStrategy.from_name("averaging"), T=1)
    assert all(wcvar(s) == 0.0 for s in samples)


def test_constant_confidence_makes_wcvar_equal_cvar():
    spec = _spec(confidence_model=ConfidenceModel.CONSTANT)
    samples = generate_prediction_samples(spec, FusionStrategy.from_name("random_sampling"))
    for sample_set in samples:
        np.testing.assert_array_equal(sample_set.heatmap_maxima(), np.ones(sample_set.T))
        reference = cvar(PointCloud.from_points(sample_set.points))
        assert wcvar(sample_set) == pytest.approx(reference, rel=1e-12)


def test_spread_coupled_confidence_peaks_at_the_true_center():
    spec = _spec(n_scans=2)
    annotations = generate_annotations(spec)
    samples = generate_prediction_samples(spec, FusionStrategy.from_name("random_sampling"), annotations=annotations)
    for sample_set in samples:
        values = sample_set.heatmap_maxima()
        assert np.all((values > 0.0) & (values <= 1.0))
        center = spec.landmark_models[sample_set.landmark_id].center_mm
        distances = np.linalg.norm(points_to_mm(sample_set.points) - center, axis=1)
        assert int(np.argmax(values)) == int(np.argmin(distances))


def test_heatmap_decoding_snaps_samples_to_pixels():
    coarse = derive_space(ISBI_ORIGINAL, 194, 240, "isbi_coarse")
    spec = _spec(n_scans=2, n_landmarks=1, space=coarse, heatmap_sigma_px=1.5)
    annotations = generate_annotations(spec)
    assert all(a.space == coarse for a in annotations)
    samples = generate_prediction_samples(spec, FusionStrategy.from_name("deep_ensembles"), annotations=annotations)
    for sample_set in samples:
        assert sample_set.space == coarse
        for point, value in sample_set.samples:
            assert point.x == int(point.x) and point.y == int(point.y)
            assert 0.0 <= value <= 1.0
