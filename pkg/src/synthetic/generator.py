"""
Synthetic Annotation and Prediction Generator
Ground-truth-controlled corpora: rater annotations drawn from per-landmark
Gaussians (scaled per scan), and per-strategy prediction samples whose spread
is either widened-base (averaging) or coupled to the observed rater cloud
(random sampling, deep ensembles).
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from src.annotation_model.coordinates import CANONICAL_SPACE, convert_space, mm_to_point, points_to_mm
from src.annotation_model.corpus_io import write_corpus, write_samples
from src.annotation_model.schemas import (
    AnnotationCorpus,
    AnnotationSet,
    CoordinateSpace,
    LandmarkPoint,
    Provenance,
    SampleCorpus,
    SampleSet,
    default_landmark_definitions,
)
from src.fusion.strategies import FusionKind, FusionStrategy
from src.geometry.covariance import centroid, population_covariance, symmetric_eigen
from src.heatmap.gaussian import decode_argmax, render_sample_heatmaps
from src.utils.config import SimulationSettings
from src.utils.exceptions import ConsistencyError, DataError

logger = logging.getLogger(__name__)

# Independent random streams per concern, appended to the run seed
_SCALE_STREAM = 0
_ANNOTATION_STREAM = 1
_STRATEGY_STREAMS = {
    FusionKind.AVERAGING: 2,
    FusionKind.RANDOM_SAMPLING: 3,
    FusionKind.DEEP_ENSEMBLES: 4,
}

DEFAULT_SPREAD_FACTORS = {"averaging": 1.5, "random_sampling": 0.7, "deep_ensembles": 0.5}


class ConfidenceModel(Enum):
    CONSTANT = "constant"
    SPREAD_COUPLED = "spread_coupled"


@dataclass(frozen=True)
class LandmarkModel:
    """True landmark location and rater covariance, both in mm"""
    center_mm: np.ndarray
    covariance_mm2: np.ndarray

    def __post_init__(self):
        center = np.asarray(self.center_mm, dtype=float)
        covariance = np.asarray(self.covariance_mm2, dtype=float)
        if center.shape != (2,) or covariance.shape != (2, 2):
            raise DataError("Landmark model needs a 2-vector center and a 2x2 covariance")
        if not (np.all(np.isfinite(center)) and np.all(np.isfinite(covariance))):
            raise DataError("Landmark model values must be finite")
        if abs(covariance[0, 1] - covariance[1, 0]) > 1e-12 * max(1.0, float(np.max(np.abs(covariance)))):
            raise DataError(f"Landmark covariance is not symmetric: {covariance.tolist()}")
        try:
            symmetric_eigen(covariance)
        except ConsistencyError as e:
            raise DataError(f"Landmark covariance is not positive semi-definite: {covariance.tolist()}") from e
        object.__setattr__(self, "center_mm", center)
        object.__setattr__(self, "covariance_mm2", covariance)

    @classmethod
    def from_axes(cls, center_x_mm: float, center_y_mm: float, sigma_major_mm: float,
                  sigma_minor_mm: float, rotation_deg: float = 0.0) -> "LandmarkModel":
        if sigma_major_mm < 0 or sigma_minor_mm < 0:
            raise DataError("Landmark sigmas must be >= 0")
        theta = math.radians(rotation_deg)
        rotation = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
        covariance = rotation @ np.diag([sigma_major_mm ** 2, sigma_minor_mm ** 2]) @ rotation.T
        return cls(np.array([center_x_mm, center_y_mm]), 0.5 * (covariance + covariance.T))


@dataclass(frozen=True)
class GeneratorSpec:
    seed: int
    n_scans: int
    n_landmarks: int
    n_raters: int
    landmark_models: Tuple[LandmarkModel, ...]
    confidence_model: ConfidenceModel = ConfidenceModel.SPREAD_COUPLED
    scan_scale_range: Tuple[float, float] = (1.0, 1.0)
    space: CoordinateSpace = CANONICAL_SPACE
    spread_factors: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_SPREAD_FACTORS))
    mc_samples: int = 20
    ensemble_size: Optional[int] = None
    heatmap_sigma_px: Optional[float] = None

    def __post_init__(self):
        for name in ("n_scans", "n_landmarks", "n_raters", "mc_samples"):
            if int(getattr(self, name)) < 1:
                raise DataError(f"{name} must be >= 1, got {getattr(self, name)}")
        models = tuple(self.landmark_models)
        if len(models) == 1:
            models = models * self.n_landmarks
        if len(models) != self.n_landmarks:
            raise DataError(f"Expected 1 or {self.n_landmarks} landmark models, got {len(models)}")
        object.__setattr__(self, "landmark_models", models)
        object.__setattr__(self, "confidence_model", ConfidenceModel(self.confidence_model))
        lo, hi = self.scan_scale_range
        if not 0 < lo <= hi:
            raise DataError(f"scan_scale_range must satisfy 0 < lo <= hi, got {self.scan_scale_range}")
        factors = dict(DEFAULT_SPREAD_FACTORS)
        factors.update(self.spread_factors)
        if any(v < 0 for v in factors.values()):
            raise DataError(f"Spread factors must be >= 0: {factors}")
        object.__setattr__(self, "spread_factors", factors)

    @classmethod
    def from_settings(cls, settings: SimulationSettings, seed: int, space: CoordinateSpace = CANONICAL_SPACE,
                      heatmap_sigma_px: Optional[float] = None) -> "GeneratorSpec":
        # configured rows are reused cyclically when more landmarks are requested
        rows = settings.landmark_models
        models = tuple(LandmarkModel.from_axes(*rows[i % len(rows)]) for i in range(settings.n_landmarks))
        return cls(
            seed=seed,
            n_scans=settings.n_scans,
            n_landmarks=settings.n_landmarks,
            n_raters=settings.n_raters,
            landmark_models=models,
            confidence_model=ConfidenceModel(settings.confidence_model),
            scan_scale_range=tuple(settings.scan_scale_range),
            space=space,
            spread_factors=dict(settings.spread_factors),
            mc_samples=settings.mc_samples,
            ensemble_size=settings.resolved_ensemble_size,
            heatmap_sigma_px=heatmap_sigma_px,
        )

    def scan_ids(self) -> List[str]:
        width = max(3, len(str(self.n_scans - 1)))
        return [f"scan_{i:0{width}d}" for i in range(self.n_scans)]

    def rater_ids(self) -> List[str]:
        width = max(2, len(str(self.n_raters)))
        return [f"rater_{i + 1:0{width}d}" for i in range(self.n_raters)]

    def scan_scales(self) -> np.ndarray:
        lo, hi = self.scan_scale_range
        return np.random.default_rng([self.seed, _SCALE_STREAM]).uniform(lo, hi, size=self.n_scans)

    def default_samples(self, strategy: FusionStrategy) -> int:
        if strategy.kind is FusionKind.DEEP_ENSEMBLES:
            return self.ensemble_size or self.n_raters
        return self.mc_samples


def _color_matrix(covariance: np.ndarray) -> np.ndarray:
    """Square root L with L L^T = covariance; eigen fallback for singular matrices"""
    try:
        return np.linalg.cholesky(covariance)
    except np.linalg.LinAlgError:
        values, vectors = symmetric_eigen(covariance)
        return vectors @ np.diag(np.sqrt(values))


def gaussian_draws(rng: np.random.Generator, mean: np.ndarray, covariance: np.ndarray, count: int) -> np.ndarray:
    """Box-Muller standard normals colored by the covariance square root, shape (count, 2)"""
    u1 = 1.0 - rng.random(count)
    u2 = rng.random(count)
    radius = np.sqrt(-2.0 * np.log(u1))
    standard = np.column_stack([radius * np.cos(2.0 * np.pi * u2), radius * np.sin(2.0 * np.pi * u2)])
    return np.asarray(mean, dtype=float) + standard @ _color_matrix(np.asarray(covariance, dtype=float)).T


def _to_points(points_mm: np.ndarray, space: CoordinateSpace) -> List[LandmarkPoint]:
    # draws are in canonical mm; express them in pixels of the output space
    return [convert_space(mm_to_point(float(x), float(y), CANONICAL_SPACE), space) for x, y in points_mm]


def generate_annotations(spec: GeneratorSpec) -> AnnotationCorpus:
    """Rater points from each landmark's Gaussian, covariance scaled by s^2 per scan"""
    rng = np.random.default_rng([spec.seed, _ANNOTATION_STREAM])
    scales = spec.scan_scales()
    rater_ids = spec.rater_ids()

    sets = []
    for scan_index, scan_id in enumerate(spec.scan_ids()):
        for landmark_id, model in enumerate(spec.landmark_models):
            covariance = scales[scan_index] ** 2 * model.covariance_mm2
            draws = gaussian_draws(rng, model.center_mm, covariance, spec.n_raters)
            points = _to_points(draws, spec.space)
            sets.append(AnnotationSet(scan_id, landmark_id, tuple(zip(rater_ids, points))))

    corpus = AnnotationCorpus.from_sets(sets, default_landmark_definitions(spec.n_landmarks))
    logger.info(f"Generated synthetic annotations: {corpus.summary()}")
    return corpus


def _strategy_covariance(
    strategy: FusionStrategy,
    spec: GeneratorSpec,
    rater_mm: np.ndarray,
    base_covariance: np.ndarray,
) -> np.ndarray:
    factor = spec.spread_factors[strategy.name]
    if strategy.kind is FusionKind.AVERAGING:
        # trained on the averaged target: spread follows the population model, not this scan's raters
        return factor ** 2 * base_covariance
    return factor ** 2 * population_covariance(rater_mm, centroid(rater_mm))


def _confidences(spec: GeneratorSpec, draws: np.ndarray, center: np.ndarray, covariance: np.ndarray) -> np.ndarray:
    if spec.confidence_model is ConfidenceModel.CONSTANT:
        return np.ones(draws.shape[0])
    sigma_ref = math.sqrt(symmetric_eigen(covariance)[0][0])
    if sigma_ref == 0.0:
        return np.ones(draws.shape[0])
    squared = np.sum((draws - center) ** 2, axis=1)
    return np.exp(-squared / (2.0 * sigma_ref ** 2))


def _decode_through_heatmaps(points: List[LandmarkPoint], confidences: np.ndarray,
                             spec: GeneratorSpec) -> Tuple[List[LandmarkPoint], List[float]]:
    heatmaps = render_sample_heatmaps(points, confidences, spec.heatmap_sigma_px, spec.space)
    decoded = [decode_argmax(h) for h in heatmaps]
    return [p for p, _ in decoded], [v for _, v in decoded]


def generate_prediction_samples(
    spec: GeneratorSpec,
    strategy: FusionStrategy,
    T: Optional[int] = None,
    annotations: Optional[AnnotationCorpus] = None,
) -> SampleCorpus:
    """
    Prediction samples of one fusion strategy around each true landmark center

    Args:
        spec: generator parameters
        strategy: fusion strategy whose test-time samples are simulated
        T: samples per landmark; defaults to mc_samples, or the ensemble size
        annotations: the corpus from generate_annotations(spec); regenerated if omitted
    """
    T = spec.default_samples(strategy) if T is None else T
    if T < 1:
        raise DataError(f"T must be >= 1, got {T}")
    annotations = annotations if annotations is not None else generate_annotations(spec)
    provenance = Provenance.ENSEMBLE if strategy.kind is FusionKind.DEEP_ENSEMBLES else Provenance.MC_DROPOUT
    rng = np.random.default_rng([spec.seed, _STRATEGY_STREAMS[strategy.kind]])
    scales = dict(zip(spec.scan_ids(), spec.scan_scales()))

    sets = []
    for annotation_set in annotations:
        rater_mm = points_to_mm(annotation_set.points)
        model = spec.landmark_models[annotation_set.landmark_id]
        center = model.center_mm
        base_covariance = scales[annotation_set.scan_id] ** 2 * model.covariance_mm2
        covariance = _strategy_covariance(strategy, spec, rater_mm, base_covariance)
        draws = gaussian_draws(rng, center, covariance, T)
        confidences = _confidences(spec, draws, center, covariance)
        points = _to_points(draws, spec.space)
        if spec.heatmap_sigma_px is not None:
            points, values = _decode_through_heatmaps(points, confidences, spec)
            confidences = np.asarray(values)
        samples = tuple((p, float(h)) for p, h in zip(points, confidences))
        sets.append(SampleSet(annotation_set.scan_id, annotation_set.landmark_id, provenance, samples))

    corpus = SampleCorpus.from_sets(sets, strategy.name)
    logger.info(f"Generated {len(corpus)} sample sets for '{strategy.name}' (T={T})")
    return corpus


def write_simulated_corpus(
    spec: GeneratorSpec,
    output_dir: Union[str, Path],
    strategies: Sequence[str] = tuple(DEFAULT_SPREAD_FACTORS),
) -> Dict[str, Path]:
    """Write annotations.jsonl plus samples_<strategy>.jsonl for each strategy"""
    output_dir = Path(output_dir)
    annotations = generate_annotations(spec)
    paths = {"annotations": write_corpus(annotations, output_dir / "annotations.jsonl")}
    for name in strategies:
        strategy = FusionStrategy.from_name(name)
        samples = generate_prediction_samples(spec, strategy, annotations=annotations)
        paths[name] = write_samples(samples, output_dir / f"samples_{name}.jsonl")
    return paths
