"""
Annotation Model Schemas
Core domain types for multi-rater landmark annotations and prediction samples.
All types are immutable after construction and validate their invariants in
__post_init__.
"""

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from src.utils.exceptions import DataError, EmptyCloudError, SpaceMismatchError

LandmarkKey = Tuple[str, int]


class Provenance(Enum):
    """Where the samples of a SampleSet come from"""
    RATERS = "raters"
    MC_DROPOUT = "mc_dropout"
    ENSEMBLE = "ensemble"


@dataclass(frozen=True)
class CoordinateSpace:
    """Pixel grid plus per-axis millimetre scale"""
    width_px: int
    height_px: int
    mm_per_px_x: float
    mm_per_px_y: float
    space_id: str

    def __post_init__(self):
        if int(self.width_px) <= 0 or int(self.height_px) <= 0:
            raise DataError(f"Space '{self.space_id}' needs positive dimensions, got {self.width_px}x{self.height_px}")
        if not (self.mm_per_px_x > 0 and self.mm_per_px_y > 0):
            raise DataError(f"Space '{self.space_id}' needs positive mm scales")
        if not self.space_id:
            raise DataError("space_id must be a non-empty label")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "space_id": self.space_id,
            "width_px": int(self.width_px),
            "height_px": int(self.height_px),
            "mm_per_px_x": float(self.mm_per_px_x),
            "mm_per_px_y": float(self.mm_per_px_y),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CoordinateSpace":
        return cls(
            width_px=int(data["width_px"]),
            height_px=int(data["height_px"]),
            mm_per_px_x=float(data["mm_per_px_x"]),
            mm_per_px_y=float(data["mm_per_px_y"]),
            space_id=str(data["space_id"]),
        )


@dataclass(frozen=True)
class LandmarkPoint:
    """A 2D point in pixels of a declared space"""
    x: float
    y: float
    space: CoordinateSpace

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise DataError(f"Landmark coordinates must be finite, got ({self.x}, {self.y})")

    @property
    def in_bounds(self) -> bool:
        """Inside the pixel grid 0..width-1 x 0..height-1"""
        return 0.0 <= self.x <= self.space.width_px - 1 and 0.0 <= self.y <= self.space.height_px - 1

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


def _shared_space(points: Sequence[LandmarkPoint], context: str) -> CoordinateSpace:
    space = points[0].space
    for point in points[1:]:
        if point.space != space:
            raise SpaceMismatchError(
                f"{context}: points mix spaces '{space.space_id}' and '{point.space.space_id}'"
            )
    return space


@dataclass(frozen=True)
class AnnotationSet:
    """Annotations of one landmark on one scan from every rater"""
    scan_id: str
    landmark_id: int
    rater_points: Tuple[Tuple[str, LandmarkPoint], ...]

    def __post_init__(self):
        object.__setattr__(self, "rater_points", tuple((str(r), p) for r, p in self.rater_points))
        if not self.rater_points:
            raise EmptyCloudError(f"Annotation set ({self.scan_id}, {self.landmark_id}) has no raters")
        rater_ids = [r for r, _ in self.rater_points]
        if len(set(rater_ids)) != len(rater_ids):
            raise DataError(f"Duplicate rater ids in annotation set ({self.scan_id}, {self.landmark_id})")
        _shared_space([p for _, p in self.rater_points], f"annotation set ({self.scan_id}, {self.landmark_id})")

    @property
    def key(self) -> LandmarkKey:
        return (self.scan_id, self.landmark_id)

    @property
    def n_raters(self) -> int:
        return len(self.rater_points)

    @property
    def rater_ids(self) -> List[str]:
        return [r for r, _ in self.rater_points]

    @property
    def points(self) -> List[LandmarkPoint]:
        return [p for _, p in self.rater_points]

    @property
    def space(self) -> CoordinateSpace:
        return self.rater_points[0][1].space

    def point_for(self, rater_id: str) -> LandmarkPoint:
        for rater, point in self.rater_points:
            if rater == rater_id:
                return point
        raise DataError(f"Rater '{rater_id}' did not annotate ({self.scan_id}, {self.landmark_id})")


@dataclass(frozen=True)
class SampleSet:
    """T prediction samples for one landmark, with optional heatmap maxima"""
    scan_id: str
    landmark_id: int
    provenance: Provenance
    samples: Tuple[Tuple[LandmarkPoint, Optional[float]], ...]

    def __post_init__(self):
        object.__setattr__(self, "provenance", Provenance(self.provenance))
        object.__setattr__(
            self, "samples",
            tuple((p, None if h is None else float(h)) for p, h in self.samples),
        )
        if not self.samples:
            raise EmptyCloudError(f"Sample set ({self.scan_id}, {self.landmark_id}) is empty")
        present = [h is not None for _, h in self.samples]
        if any(present) and not all(present):
            raise DataError(
                f"Sample set ({self.scan_id}, {self.landmark_id}): heatmap_max must be given for all samples or none"
            )
        for _, h in self.samples:
            if h is not None and not (math.isfinite(h) and h >= 0):
                raise DataError(f"Sample set ({self.scan_id}, {self.landmark_id}): heatmap_max must be finite and >= 0, got {h}")
        _shared_space([p for p, _ in self.samples], f"sample set ({self.scan_id}, {self.landmark_id})")

    @property
    def key(self) -> LandmarkKey:
        return (self.scan_id, self.landmark_id)

    @property
    def T(self) -> int:
        return len(self.samples)

    @property
    def points(self) -> List[LandmarkPoint]:
        return [p for p, _ in self.samples]

    @property
    def space(self) -> CoordinateSpace:
        return self.samples[0][0].space

    @property
    def has_heatmap_max(self) -> bool:
        return self.samples[0][1] is not None

    def heatmap_maxima(self) -> Optional[np.ndarray]:
        if not self.has_heatmap_max:
            return None
        return np.array([h for _, h in self.samples], dtype=float)


def annotation_set_to_samples(annotation_set: AnnotationSet) -> SampleSet:
    """Treat the rater annotations as a sample cloud (no heatmap values)"""
    return SampleSet(
        scan_id=annotation_set.scan_id,
        landmark_id=annotation_set.landmark_id,
        provenance=Provenance.RATERS,
        samples=tuple((p, None) for p in annotation_set.points),
    )


@dataclass(frozen=True)
class LandmarkDefinition:
    landmark_id: int
    name: str

    def to_dict(self) -> Dict[str, Any]:
        return {"landmark_id": int(self.landmark_id), "name": self.name}


def validate_landmark_definitions(definitions: Sequence[LandmarkDefinition]) -> Tuple[LandmarkDefinition, ...]:
    """Check ids are contiguous from 0 and names unique; returns them sorted by id"""
    ordered = tuple(sorted(definitions, key=lambda d: d.landmark_id))
    ids = [d.landmark_id for d in ordered]
    if ids != list(range(len(ordered))):
        raise DataError(f"Landmark ids must be contiguous from 0, got {ids}")
    names = [d.name for d in ordered]
    if len(set(names)) != len(names):
        raise DataError(f"Landmark names must be unique, got {names}")
    return ordered


def default_landmark_definitions(n_landmarks: int, names: Optional[Sequence[str]] = None) -> Tuple[LandmarkDefinition, ...]:
    names = list(names or [])
    definitions = [
        LandmarkDefinition(i, names[i] if i < len(names) else f"landmark_{i}")
        for i in range(n_landmarks)
    ]
    return validate_landmark_definitions(definitions)


@dataclass
class AnnotationCorpus:
    """All annotation sets of a study, keyed by (scan_id, landmark_id)"""
    sets: Dict[LandmarkKey, AnnotationSet]
    landmarks: Tuple[LandmarkDefinition, ...] = ()
    flagged_out_of_bounds: List[Tuple[str, int, str]] = field(default_factory=list)

    def __post_init__(self):
        if not self.landmarks:
            n = max((lm for _, lm in self.sets), default=-1) + 1
            self.landmarks = default_landmark_definitions(n)
        else:
            self.landmarks = validate_landmark_definitions(self.landmarks)
        for scan_id, landmark_id in self.sets:
            if not 0 <= landmark_id < len(self.landmarks):
                raise DataError(f"Landmark id {landmark_id} of scan {scan_id} outside [0, {len(self.landmarks)})")

    @classmethod
    def from_sets(cls, sets: Sequence[AnnotationSet], landmarks: Sequence[LandmarkDefinition] = ()) -> "AnnotationCorpus":
        keyed: Dict[LandmarkKey, AnnotationSet] = {}
        for annotation_set in sets:
            if annotation_set.key in keyed:
                raise DataError(f"Duplicate annotation set for {annotation_set.key}")
            keyed[annotation_set.key] = annotation_set
        flagged = [
            (s.scan_id, s.landmark_id, rater)
            for s in sets for rater, point in s.rater_points if not point.in_bounds
        ]
        return cls(sets=keyed, landmarks=tuple(landmarks), flagged_out_of_bounds=flagged)

    def keys(self) -> List[LandmarkKey]:
        return sorted(self.sets)

    def __iter__(self) -> Iterator[AnnotationSet]:
        for key in self.keys():
            yield self.sets[key]

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def spaces(self) -> Dict[str, CoordinateSpace]:
        spaces: Dict[str, CoordinateSpace] = {}
        for annotation_set in self.sets.values():
            space = annotation_set.space
            existing = spaces.get(space.space_id)
            if existing is not None and existing != space:
                raise SpaceMismatchError(f"Two different spaces share the id '{space.space_id}'")
            spaces[space.space_id] = space
        return spaces

    def scan_ids(self) -> List[str]:
        return sorted({scan for scan, _ in self.sets})

    def rater_ids(self) -> List[str]:
        return sorted({r for s in self.sets.values() for r in s.rater_ids})

    @property
    def n_records(self) -> int:
        return sum(s.n_raters for s in self.sets.values())

    def summary(self) -> Dict[str, int]:
        return {
            "scans": len(self.scan_ids()),
            "landmarks": len(self.landmarks),
            "raters": len(self.rater_ids()),
            "annotation_sets": len(self.sets),
            "records": self.n_records,
            "out_of_bounds": len(self.flagged_out_of_bounds),
        }


@dataclass
class SampleCorpus:
    """Prediction samples of one fusion strategy, keyed by (scan_id, landmark_id)"""
    sets: Dict[LandmarkKey, SampleSet]
    strategy: Optional[str] = None

    @classmethod
    def from_sets(cls, sets: Sequence[SampleSet], strategy: Optional[str] = None) -> "SampleCorpus":
        keyed: Dict[LandmarkKey, SampleSet] = {}
        for sample_set in sets:
            if sample_set.key in keyed:
                raise DataError(f"Duplicate sample set for {sample_set.key}")
            keyed[sample_set.key] = sample_set
        return cls(sets=keyed, strategy=strategy)

    def keys(self) -> List[LandmarkKey]:
        return sorted(self.sets)

    def __iter__(self) -> Iterator[SampleSet]:
        for key in self.keys():
            yield self.sets[key]

    def __len__(self) -> int:
        return len(self.sets)

    @property
    def space(self) -> Optional[CoordinateSpace]:
        spaces = {s.space for s in self.sets.values()}
        if len(spaces) > 1:
            raise SpaceMismatchError(f"Sample corpus '{self.strategy}' mixes {len(spaces)} coordinate spaces")
        return next(iter(spaces), None)
