"""
Shared fixtures for the landmark variability test suites
"""

import sys
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pytest

# Setup paths
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from src.annotation_model.coordinates import ISBI_ORIGINAL, mm_to_point  # noqa: E402
from src.annotation_model.schemas import (  # noqa: E402
    AnnotationCorpus,
    AnnotationSet,
    CoordinateSpace,
    LandmarkPoint,
    Provenance,
    SampleSet,
)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def unit_space() -> CoordinateSpace:
    """1 mm per pixel, so pixel and mm values coincide when used as canonical space"""
    return CoordinateSpace(width_px=500, height_px=400, mm_per_px_x=1.0, mm_per_px_y=1.0, space_id="unit")


@pytest.fixture
def make_samples() -> Callable[..., SampleSet]:
    """Build a SampleSet from mm coordinates in the original ISBI space"""
    def _make(
        points_mm: Sequence[Tuple[float, float]],
        heatmap_max: Optional[Sequence[float]] = None,
        provenance: Provenance = Provenance.MC_DROPOUT,
        scan_id: str = "scan_a",
        landmark_id: int = 0,
    ) -> SampleSet:
        points = [mm_to_point(x, y, ISBI_ORIGINAL) for x, y in points_mm]
        values = list(heatmap_max) if heatmap_max is not None else [None] * len(points)
        return SampleSet(scan_id, landmark_id, provenance, tuple(zip(points, values)))
    return _make


@pytest.fixture
def small_corpus() -> AnnotationCorpus:
    """4 scans x 2 landmarks x 3 raters, hand-placed pixel coordinates"""
    sets = []
    for scan_index in range(4):
        for landmark_id in range(2):
            base_x = 400.0 + 100.0 * landmark_id
            base_y = 600.0 + 50.0 * scan_index
            raters = (
                ("r1", LandmarkPoint(base_x, base_y, ISBI_ORIGINAL)),
                ("r2", LandmarkPoint(base_x + 10.0 * (scan_index + 1), base_y, ISBI_ORIGINAL)),
                ("r3", LandmarkPoint(base_x, base_y + 5.0 * (landmark_id + 1), ISBI_ORIGINAL)),
            )
            sets.append(AnnotationSet(f"scan_{scan_index}", landmark_id, raters))
    return AnnotationCorpus.from_sets(sets)
