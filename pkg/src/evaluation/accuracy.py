"""
Detection accuracy: radial errors, MRE and SDR
Errors are Euclidean distances in mm of the canonical space between the fused
prediction and the (silver) ground truth of each landmark.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.annotation_model.coordinates import CANONICAL_SPACE, points_to_mm
from src.annotation_model.schemas import AnnotationCorpus, CoordinateSpace, LandmarkKey, LandmarkPoint, SampleCorpus
from src.evaluation.folds import FoldSplit
from src.fusion.strategies import FusionStrategy, average_annotations, fused_prediction
from src.utils.exceptions import DataError, EmptyCloudError, KeyAlignmentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SdrThresholds:
    thresholds_mm: Tuple[float, ...] = (2.0, 2.5, 3.0, 4.0)

    def __post_init__(self):
        values = tuple(float(t) for t in self.thresholds_mm)
        if any(t <= 0 for t in values):
            raise DataError(f"SDR thresholds must be > 0: {values}")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise DataError(f"SDR thresholds must be strictly ascending: {values}")
        object.__setattr__(self, "thresholds_mm", values)

    def column_names(self) -> List[str]:
        return [f"sdr_{t:g}mm" for t in self.thresholds_mm]


def radial_errors(
    predictions: Sequence[LandmarkPoint],
    ground_truth: Sequence[LandmarkPoint],
    canonical: CoordinateSpace = CANONICAL_SPACE,
) -> np.ndarray:
    """Per-pair Euclidean error in mm"""
    if len(predictions) != len(ground_truth):
        raise DataError(f"{len(predictions)} predictions but {len(ground_truth)} ground-truth points")
    if not predictions:
        raise EmptyCloudError("No prediction / ground-truth pairs")
    return np.linalg.norm(points_to_mm(predictions, canonical) - points_to_mm(ground_truth, canonical), axis=1)


def mre(
    predictions: Sequence[LandmarkPoint],
    ground_truth: Sequence[LandmarkPoint],
    canonical: CoordinateSpace = CANONICAL_SPACE,
) -> float:
    return float(np.mean(radial_errors(predictions, ground_truth, canonical)))


def sdr_from_errors(errors: np.ndarray, thresholds: SdrThresholds = SdrThresholds()) -> List[float]:
    """Percentage of errors at or below each threshold"""
    errors = np.asarray(errors, dtype=float)
    if errors.size == 0:
        raise EmptyCloudError("No errors to rate")
    return [100.0 * float(np.count_nonzero(errors <= t)) / errors.size for t in thresholds.thresholds_mm]


def sdr(
    predictions: Sequence[LandmarkPoint],
    ground_truth: Sequence[LandmarkPoint],
    thresholds: SdrThresholds = SdrThresholds(),
    canonical: CoordinateSpace = CANONICAL_SPACE,
) -> List[float]:
    return sdr_from_errors(radial_errors(predictions, ground_truth, canonical), thresholds)


def silver_ground_truth(corpus: AnnotationCorpus, gt_rater: Optional[str] = None) -> Dict[LandmarkKey, LandmarkPoint]:
    """Averaged multi-rater annotation per landmark, or one named rater's points"""
    if gt_rater is None:
        return {annotation_set.key: average_annotations(annotation_set) for annotation_set in corpus}
    return {annotation_set.key: annotation_set.point_for(gt_rater) for annotation_set in corpus}


def check_alignment(expected: Sequence[LandmarkKey], provided: Sequence[LandmarkKey], context: str) -> None:
    missing = set(expected) ^ set(provided)
    if missing:
        raise KeyAlignmentError(f"{context}: (scan_id, landmark_id) keys do not match", missing)


def strategy_errors(
    samples: SampleCorpus,
    strategy: FusionStrategy,
    ground_truth: Mapping[LandmarkKey, LandmarkPoint],
    canonical: CoordinateSpace = CANONICAL_SPACE,
) -> pd.DataFrame:
    """Error of the fused prediction of every landmark against its ground truth"""
    check_alignment(sorted(ground_truth), samples.keys(), f"samples of '{strategy.name}' vs ground truth")
    keys = samples.keys()
    predictions = [fused_prediction(strategy, samples.sets[key]) for key in keys]
    errors = radial_errors(predictions, [ground_truth[key] for key in keys], canonical)
    return pd.DataFrame({
        "scan_id": [scan for scan, _ in keys],
        "landmark_id": [int(lm) for _, lm in keys],
        "error_mm": errors,
    })


def _accuracy_row(errors: np.ndarray, thresholds: SdrThresholds) -> Dict[str, float]:
    row = {"mre_mm": float(np.mean(errors)), "n_landmarks": int(errors.size)}
    row.update(dict(zip(thresholds.column_names(), sdr_from_errors(errors, thresholds))))
    return row


def accuracy_table(
    errors_by_strategy: Mapping[str, pd.DataFrame],
    folds: FoldSplit,
    thresholds: SdrThresholds = SdrThresholds(),
) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    MRE / SDR per strategy, pooled over all test folds, plus a per-fold breakdown

    Pooling every landmark with equal weight gives every scan the same weight
    since all scans carry the same landmarks.

    Returns:
        (summary with one row per strategy, per-fold table)
    """
    summary_rows = []
    fold_rows = []
    for strategy_name, errors in errors_by_strategy.items():
        unknown = set(errors["scan_id"]) - set(folds.assignments)
        if unknown:
            raise DataError(f"Scans without a fold assignment: {sorted(unknown)[:10]}")
        summary_rows.append({"strategy": strategy_name, **_accuracy_row(errors["error_mm"].to_numpy(), thresholds)})
        fold_index = errors["scan_id"].map(folds.assignments)
        for fold in range(folds.n_folds):
            fold_errors = errors.loc[fold_index == fold, "error_mm"].to_numpy()
            if fold_errors.size == 0:
                continue
            fold_rows.append({"strategy": strategy_name, "fold": fold, **_accuracy_row(fold_errors, thresholds)})

    columns = ["mre_mm"] + thresholds.column_names() + ["n_landmarks"]
    summary = pd.DataFrame(summary_rows, columns=["strategy"] + columns)
    per_fold = pd.DataFrame(fold_rows, columns=["strategy", "fold"] + columns)
    return summary, per_fold
