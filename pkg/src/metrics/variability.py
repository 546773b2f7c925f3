"""
Variability and Uncertainty Metrics
CVar, PSV, Anisotropy and WCVar over annotation clouds (inter-rater
variability) or prediction sample sets (model uncertainty). All distances are
in mm of the canonical space.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Optional

import numpy as np
import pandas as pd

from src.annotation_model.coordinates import CANONICAL_SPACE
from src.annotation_model.schemas import CoordinateSpace, SampleSet
from src.geometry.covariance import PointCloud, centroid, summarize
from src.utils.exceptions import ConfigError, DataError, EmptyCloudError

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["cvar_mm", "psv_mm", "anisotropy", "wcvar_mm"]


@dataclass(frozen=True)
class MetricConfig:
    """Regularisation constants of the anisotropy ratio and the WCVar weights"""
    epsilon_aniso: float = 1e-6
    epsilon_wcvar: float = 1e-6

    def __post_init__(self):
        if not (self.epsilon_aniso > 0 and self.epsilon_wcvar > 0):
            raise ConfigError(
                f"Epsilons must be > 0, got aniso={self.epsilon_aniso}, wcvar={self.epsilon_wcvar}"
            )


@dataclass(frozen=True)
class LandmarkMetrics:
    cvar_mm: float
    psv_mm: float
    anisotropy: float
    wcvar_mm: float

    def __post_init__(self):
        for name, value in asdict(self).items():
            if not (np.isfinite(value) and value >= 0):
                raise DataError(f"{name} must be finite and >= 0, got {value}")

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def _deviations(cloud: PointCloud) -> np.ndarray:
    return np.linalg.norm(cloud.points - centroid(cloud.points), axis=1)


def cvar(cloud: PointCloud) -> float:
    """Mean Euclidean distance of the points to their centroid"""
    return float(np.mean(_deviations(cloud)))


def psv(cloud: PointCloud) -> float:
    """Square root of the largest covariance eigenvalue"""
    return float(np.sqrt(summarize(cloud).lambda_max))


def anisotropy(cloud: PointCloud, cfg: MetricConfig = MetricConfig()) -> float:
    summary = summarize(cloud)
    return float(np.sqrt(summary.lambda_max) / (np.sqrt(summary.lambda_min) + cfg.epsilon_aniso))


def confidence_weights(heatmap_max: Optional[np.ndarray], T: int, epsilon: float) -> np.ndarray:
    """
    Normalised inverse-confidence weights; equal weights when no heatmap values exist

    Args:
        heatmap_max: per-sample heatmap maxima or None
        T: number of samples
        epsilon: regulariser added to every maximum
    """
    if T < 1:
        raise EmptyCloudError("Cannot weight an empty sample set")
    if heatmap_max is None:
        return np.full(T, 1.0 / T)
    heatmap_max = np.asarray(heatmap_max, dtype=float)
    if heatmap_max.shape != (T,):
        raise DataError(f"Expected {T} heatmap maxima, got shape {heatmap_max.shape}")
    if np.any(heatmap_max < 0) or not np.all(np.isfinite(heatmap_max)):
        raise DataError("heatmap_max values must be finite and non-negative")
    inverse = 1.0 / (heatmap_max + epsilon)
    return inverse / np.sum(inverse)


def weighted_cvar(cloud: PointCloud, heatmap_max: Optional[np.ndarray], epsilon: float) -> float:
    """Weighted distances to the unweighted centroid"""
    weights = confidence_weights(heatmap_max, cloud.P, epsilon)
    if heatmap_max is None:
        return cvar(cloud)
    return float(np.dot(weights, _deviations(cloud)))


def wcvar(
    samples: SampleSet,
    cfg: MetricConfig = MetricConfig(),
    canonical: CoordinateSpace = CANONICAL_SPACE,
) -> float:
    """Weighted Coordinate Variance of a sample set"""
    cloud = PointCloud.from_points(samples.points, canonical)
    return weighted_cvar(cloud, samples.heatmap_maxima(), cfg.epsilon_wcvar)


def landmark_metrics(
    samples: SampleSet,
    cfg: MetricConfig = MetricConfig(),
    canonical: CoordinateSpace = CANONICAL_SPACE,
) -> LandmarkMetrics:
    cloud = PointCloud.from_points(samples.points, canonical)
    summary = summarize(cloud)
    sqrt_max = float(np.sqrt(summary.lambda_max))
    sqrt_min = float(np.sqrt(summary.lambda_min))
    return LandmarkMetrics(
        cvar_mm=cvar(cloud),
        psv_mm=sqrt_max,
        anisotropy=sqrt_max / (sqrt_min + cfg.epsilon_aniso),
        wcvar_mm=weighted_cvar(cloud, samples.heatmap_maxima(), cfg.epsilon_wcvar),
    )


def metrics_table(
    sample_sets: Iterable[SampleSet],
    cfg: MetricConfig = MetricConfig(),
    canonical: CoordinateSpace = CANONICAL_SPACE,
) -> pd.DataFrame:
    """One row per (scan_id, landmark_id) with the four metrics, sorted by key"""
    rows: List[Dict[str, object]] = []
    for sample_set in sample_sets:
        row: Dict[str, object] = {
            "scan_id": sample_set.scan_id,
            "landmark_id": int(sample_set.landmark_id),
            "n_points": sample_set.T,
        }
        row.update(landmark_metrics(sample_set, cfg, canonical).to_dict())
        rows.append(row)

    table = pd.DataFrame(rows, columns=["scan_id", "landmark_id", "n_points"] + METRIC_COLUMNS)
    table = table.sort_values(["scan_id", "landmark_id"], kind="mergesort").reset_index(drop=True)
    logger.debug(f"Computed metrics for {len(table)} landmark clouds")
    return table


def aggregate_metrics(table: pd.DataFrame) -> Dict[str, float]:
    """Corpus-level means with uniform weight per (scan, landmark) pair"""
    if table.empty:
        raise EmptyCloudError("Cannot aggregate an empty metrics table")
    return {column: float(table[column].mean()) for column in METRIC_COLUMNS}
