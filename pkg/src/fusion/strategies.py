"""
Annotation Fusion Strategies
Averaging, Random Sampling and Deep Ensembles as data-level operations:
rater-coordinate averaging, seeded rater-sampling schedules for an external
trainer, and aggregation of ensemble / MC-dropout outputs into the single
evaluated prediction per landmark.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.annotation_model.schemas import (
    AnnotationCorpus,
    AnnotationSet,
    LandmarkPoint,
    Provenance,
    SampleCorpus,
    SampleSet,
)
from src.geometry.covariance import centroid
from src.utils.exceptions import ConfigError, DataError, EmptyCloudError, ProvenanceError

logger = logging.getLogger(__name__)

SCHEDULE_BLOCK_SIZE = 1024

SeedLike = Union[int, Sequence[int]]


class FusionKind(Enum):
    AVERAGING = "averaging"
    RANDOM_SAMPLING = "random_sampling"
    DEEP_ENSEMBLES = "deep_ensembles"


# Sample provenance each strategy's models produce at test time
EXPECTED_PROVENANCE: Dict[FusionKind, Provenance] = {
    FusionKind.AVERAGING: Provenance.MC_DROPOUT,
    FusionKind.RANDOM_SAMPLING: Provenance.MC_DROPOUT,
    FusionKind.DEEP_ENSEMBLES: Provenance.ENSEMBLE,
}


@dataclass(frozen=True)
class FusionStrategy:
    kind: FusionKind

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", FusionKind(self.kind))
        except ValueError as e:
            raise ConfigError(f"Unknown fusion strategy '{self.kind}'") from e

    @classmethod
    def from_name(cls, name: str) -> "FusionStrategy":
        return cls(name)

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def expected_provenance(self) -> Provenance:
        return EXPECTED_PROVENANCE[self.kind]


def _mean_point(points: Sequence[LandmarkPoint]) -> LandmarkPoint:
    if not points:
        raise EmptyCloudError("Cannot average an empty point list")
    mean = centroid(np.array([p.as_array() for p in points]))
    return LandmarkPoint(float(mean[0]), float(mean[1]), points[0].space)


def average_annotations(annotation_set: AnnotationSet) -> LandmarkPoint:
    """Componentwise mean of the rater coordinates, in the set's own space"""
    return _mean_point(annotation_set.points)


@dataclass(frozen=True)
class SamplingSchedule:
    """
    Seeded stream of rater indices

    Draws are produced in fixed-size blocks from one generator, so any
    schedule is a prefix of every longer schedule with the same seed.
    """
    seed: SeedLike
    n_raters: int
    _cache: List[int] = field(default_factory=list, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.n_raters < 1:
            raise DataError(f"n_raters must be >= 1, got {self.n_raters}")
        seed = self.seed if isinstance(self.seed, int) else tuple(int(s) for s in self.seed)
        object.__setattr__(self, "seed", seed)
        object.__setattr__(self, "_rng", np.random.default_rng(list(seed) if isinstance(seed, tuple) else seed))

    def _extend(self, n_draws: int) -> None:
        while len(self._cache) < n_draws:
            block = self._rng.integers(0, self.n_raters, size=SCHEDULE_BLOCK_SIZE)
            self._cache.extend(int(i) for i in block)

    def draws(self, n_draws: int) -> List[int]:
        if n_draws < 0:
            raise DataError(f"n_draws must be >= 0, got {n_draws}")
        self._extend(n_draws)
        return list(self._cache[:n_draws])

    def __iter__(self) -> Iterator[int]:
        position = 0
        while True:
            self._extend(position + 1)
            yield self._cache[position]
            position += 1


def sampling_schedule(seed: SeedLike, n_raters: int, n_draws: int) -> List[int]:
    """n_draws rater indices, uniform over [0, n_raters) and reproducible from seed"""
    return SamplingSchedule(seed, n_raters).draws(n_draws)


def build_training_schedule(
    corpus: AnnotationCorpus,
    seed: int,
    n_iterations: int,
    exclude_scans: Optional[Iterable[str]] = None,
) -> List[Dict[str, object]]:
    """
    Random Sampling schedule for a trainer: which rater's annotation every
    (scan, landmark) uses at every iteration.

    Each annotation set draws from its own sub-stream [seed, set_index], where
    set_index is the position in the full corpus, so excluding a test fold
    leaves the remaining sets' draws unchanged.
    """
    if n_iterations < 1:
        raise DataError(f"n_iterations must be >= 1, got {n_iterations}")
    excluded = set(exclude_scans or ())

    per_set = []
    for set_index, annotation_set in enumerate(corpus):
        if annotation_set.scan_id in excluded:
            continue
        indices = sampling_schedule([seed, set_index], annotation_set.n_raters, n_iterations)
        per_set.append((annotation_set, indices))

    records: List[Dict[str, object]] = []
    for iteration in range(n_iterations):
        for annotation_set, indices in per_set:
            records.append({
                "iteration": iteration,
                "scan_id": annotation_set.scan_id,
                "landmark_id": int(annotation_set.landmark_id),
                "rater_id": annotation_set.rater_ids[indices[iteration]],
            })
    logger.info(f"Built sampling schedule: {n_iterations} iterations x {len(per_set)} annotation sets")
    return records


def aggregate_ensemble(samples: SampleSet) -> LandmarkPoint:
    """Average the outputs of the rater-specific models"""
    if samples.provenance is not Provenance.ENSEMBLE:
        raise ProvenanceError(
            f"aggregate_ensemble needs ensemble samples, got '{samples.provenance.value}' for {samples.key}"
        )
    return _mean_point(samples.points)


def fused_prediction(strategy: FusionStrategy, samples: SampleSet) -> LandmarkPoint:
    """The single evaluated prediction: the mean of the strategy's test-time samples"""
    if samples.provenance is not strategy.expected_provenance:
        raise ProvenanceError(
            f"Strategy '{strategy.name}' expects {strategy.expected_provenance.value} samples, "
            f"got {samples.provenance.value} for {samples.key}"
        )
    if strategy.kind is FusionKind.DEEP_ENSEMBLES:
        return aggregate_ensemble(samples)
    return _mean_point(samples.points)


def final_prediction_table(samples: SampleCorpus, strategy: FusionStrategy) -> pd.DataFrame:
    """One fused prediction per (scan_id, landmark_id), in the samples' space"""
    rows = []
    for sample_set in samples:
        point = fused_prediction(strategy, sample_set)
        rows.append({
            "scan_id": sample_set.scan_id,
            "landmark_id": int(sample_set.landmark_id),
            "x_px": point.x,
            "y_px": point.y,
            "space_id": point.space.space_id,
            "n_samples": sample_set.T,
        })
    return pd.DataFrame(rows, columns=["scan_id", "landmark_id", "x_px", "y_px", "space_id", "n_samples"])
