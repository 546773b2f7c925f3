"""
Tests for CVar, PSV, Anisotropy and WCVar
"""

import math

import numpy as np
import pandas as pd
import pytest

from src.geometry.covariance import PointCloud
from src.metrics.variability import (
    METRIC_COLUMNS,
    MetricConfig,
    aggregate_metrics,
    anisotropy,
    confidence_weights,
    cvar,
    landmark_metrics,
    metrics_table,
    psv,
    wcvar,
)
from src.utils.exceptions import ConfigError, DataError, EmptyCloudError


def _rotation(angle_deg: float) -> np.ndarray:
    a = math.radians(angle_deg)
    return np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])


# ---------------------------------------------------------------- CVar / PSV / Anisotropy

def test_cvar_examples():
    assert cvar(PointCloud.from_vectors([[0.0, 0.0], [2.0, 0.0]])) == pytest.approx(1.0)
    assert cvar(PointCloud.from_vectors([[5.0, 5.0]])) == 0.0

    triangle = [(0.0, 0.0), (4.0, 0.0), (0.0, 3.0)]
    cx, cy = 4.0 / 3.0, 1.0
    expected = sum(math.hypot(x - cx, y - cy) for x, y in triangle) / 3.0
    assert cvar(PointCloud.from_vectors(triangle)) == pytest.approx(expected, rel=1e-12)


def test_psv_and_anisotropy_examples():
    pair = PointCloud.from_vectors([[-1.0, 0.0], [1.0, 0.0]])
    assert psv(pair) == pytest.approx(1.0)
    assert anisotropy(pair) == pytest.approx(1.0 / 1e-6, rel=1e-9)

    single = PointCloud.from_vectors([[3.0, 3.0]])
    assert psv(single) == 0.0
    assert anisotropy(single) == 0.0

    square = PointCloud.from_vectors([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])
    assert anisotropy(square) == pytest.approx(1.0, rel=1e-5)


def test_psv_bounded_by_largest_deviation(rng):
    for _ in range(200):
        points = rng.normal(size=(int(rng.integers(2, 20)), 2)) * rng.uniform(0.1, 5.0)
        cloud = PointCloud(points)
        max_deviation = float(np.max(np.linalg.norm(points - points.mean(axis=0), axis=1)))
        assert psv(cloud) <= max_deviation + 1e-12
        assert cvar(cloud) <= max_deviation + 1e-12


def test_gaussian_recovery_axis_aligned_and_rotated(rng):
    base = rng.normal(size=(10000, 2)) * np.array([3.0, 1.0])
    for angle in (0.0, 30.0):
        cloud = PointCloud(base @ _rotation(angle).T)
        assert 2.85 <= psv(cloud) <= 3.15
        assert 2.7 <= anisotropy(cloud) <= 3.3


def test_metrics_invariant_under_rigid_motion(rng):
    for _ in range(100):
        cloud = PointCloud(rng.normal(size=(int(rng.integers(5, 30)), 2)) * rng.uniform(0.5, 3.0))
        moved = cloud.transformed(_rotation(rng.uniform(0, 360)), rng.uniform(-50, 50, size=2))
        assert cvar(moved) == pytest.approx(cvar(cloud), rel=1e-9)
        assert psv(moved) == pytest.approx(psv(cloud), rel=1e-9)
        assert anisotropy(moved) == pytest.approx(anisotropy(cloud), rel=1e-9)


def test_metrics_scale_linearly(rng, make_samples):
    points = rng.normal(size=(15, 2)) * 2.0 + 100.0
    heatmap = rng.uniform(0.2, 1.0, size=15)
    centered = points - points.mean(axis=0)
    for s in (0.5, 2.0, 7.0):
        scaled = points.mean(axis=0) + s * centered
        assert cvar(PointCloud(scaled)) == pytest.approx(s * cvar(PointCloud(points)), rel=1e-9)
        assert psv(PointCloud(scaled)) == pytest.approx(s * psv(PointCloud(points)), rel=1e-9)
        assert anisotropy(PointCloud(scaled)) == pytest.approx(anisotropy(PointCloud(points)), rel=1e-5)
        assert wcvar(make_samples(scaled, heatmap)) == pytest.approx(s * wcvar(make_samples(points, heatmap)), rel=1e-9)


def test_metrics_permutation_invariant(rng, make_samples):
    points = rng.normal(size=(12, 2)) * 3.0 + 50.0
    heatmap = rng.uniform(0.1, 1.0, size=12)
    order = rng.permutation(12)
    original = landmark_metrics(make_samples(points, heatmap))
    shuffled = landmark_metrics(make_samples(points[order], heatmap[order]))
    for column in METRIC_COLUMNS:
        assert getattr(shuffled, column) == pytest.approx(getattr(original, column), rel=1e-12)


# ---------------------------------------------------------------- WCVar

def test_confidence_weights():
    weights = confidence_weights(np.array([1.0, 0.25]), 2, 1e-6)
    assert weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(weights, [0.2, 0.8], rtol=1e-5)
    np.testing.assert_allclose(confidence_weights(None, 4, 1e-6), [0.25] * 4)

    with pytest.raises(DataError):
        confidence_weights(np.array([0.5, -0.1]), 2, 1e-6)
    with pytest.raises(DataError):
        confidence_weights(np.array([0.5]), 2, 1e-6)
    with pytest.raises(EmptyCloudError):
        confidence_weights(None, 0, 1e-6)


def test_wcvar_examples(make_samples):
    assert wcvar(make_samples([(0.0, 0.0), (2.0, 0.0)], [1.0, 0.25])) == pytest.approx(1.0, rel=1e-9)
    assert wcvar(make_samples([(0.0, 0.0), (4.0, 0.0)], [1.0, 0.25])) == pytest.approx(2.0, rel=1e-9)
    assert wcvar(make_samples([(10.0, 10.0)], [0.9])) == 0.0


def test_wcvar_without_heatmap_equals_cvar(make_samples):
    samples = make_samples([(0.0, 0.0), (3.0, 1.0), (1.0, 4.0)])
    assert wcvar(samples) == cvar(PointCloud.from_points(samples.points))


def test_wcvar_with_uniform_confidence_equals_cvar(rng, make_samples):
    for _ in range(1000):
        P = int(rng.integers(5, 30))
        points = rng.normal(size=(P, 2)) * rng.uniform(0.5, 4.0) + rng.uniform(20, 150, size=2)
        samples = make_samples(points, [0.7] * P)
        reference = cvar(PointCloud.from_points(samples.points))
        assert abs(wcvar(samples) - reference) <= 1e-12 * reference


def test_low_confidence_samples_weigh_more(make_samples):
    points = [(0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (6.0, 0.0)]
    trusted_outlier = wcvar(make_samples(points, [0.1, 0.1, 0.1, 1.0]))
    doubted_outlier = wcvar(make_samples(points, [1.0, 1.0, 1.0, 0.1]))
    assert doubted_outlier > trusted_outlier


def test_metric_config_validation():
    with pytest.raises(ConfigError):
        MetricConfig(epsilon_aniso=0.0)
    with pytest.raises(ConfigError):
        MetricConfig(epsilon_wcvar=-1.0)


# ---------------------------------------------------------------- tables

def test_metrics_table_sorted_and_aggregated(make_samples):
    sets = [
        make_samples([(0.0, 0.0), (2.0, 0.0)], scan_id="b", landmark_id=0),
        make_samples([(0.0, 0.0), (4.0, 0.0)], scan_id="a", landmark_id=1),
        make_samples([(0.0, 0.0), (6.0, 0.0)], scan_id="a", landmark_id=0),
    ]
    table = metrics_table(sets)
    assert list(table.columns) == ["scan_id", "landmark_id", "n_points"] + METRIC_COLUMNS
    assert list(zip(table["scan_id"], table["landmark_id"])) == [("a", 0), ("a", 1), ("b", 0)]
    np.testing.assert_allclose(table["cvar_mm"], [3.0, 2.0, 1.0], rtol=1e-9)

    summary = aggregate_metrics(table)
    assert summary["cvar_mm"] == pytest.approx(2.0, rel=1e-9)
    assert set(summary) == set(METRIC_COLUMNS)


def test_aggregate_empty_table_raises():
    with pytest.raises(EmptyCloudError):
        aggregate_metrics(pd.DataFrame(columns=METRIC_COLUMNS))
