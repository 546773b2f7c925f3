"""
Coordinate spaces and pixel <-> millimetre conversion
Metrics are computed in mm after mapping points into the original-resolution
space, whatever space the annotations arrive in.
"""

from typing import Dict, Sequence, Tuple

import numpy as np

from src.annotation_model.schemas import CoordinateSpace, LandmarkPoint
from src.utils.exceptions import DataError


def derive_space(base: CoordinateSpace, width_px: int, height_px: int, space_id: str) -> CoordinateSpace:
    """Resampled grid covering the same field of view as `base`, with per-axis mm scale"""
    return CoordinateSpace(
        width_px=width_px,
        height_px=height_px,
        mm_per_px_x=base.mm_per_px_x * base.width_px / width_px,
        mm_per_px_y=base.mm_per_px_y * base.height_px / height_px,
        space_id=space_id,
    )


ISBI_ORIGINAL = CoordinateSpace(width_px=1935, height_px=2400, mm_per_px_x=0.1, mm_per_px_y=0.1, space_id="isbi_original")
# Portrait originals, so the 800 px side is the height.
ISBI_DOWNSAMPLED = derive_space(ISBI_ORIGINAL, width_px=640, height_px=800, space_id="isbi_downsampled")

KNOWN_SPACES: Dict[str, CoordinateSpace] = {
    ISBI_ORIGINAL.space_id: ISBI_ORIGINAL,
    ISBI_DOWNSAMPLED.space_id: ISBI_DOWNSAMPLED,
}

CANONICAL_SPACE = ISBI_ORIGINAL


def resolve_space(space_id: str) -> CoordinateSpace:
    try:
        return KNOWN_SPACES[space_id]
    except KeyError:
        raise DataError(f"Unknown coordinate space '{space_id}'; known: {sorted(KNOWN_SPACES)}") from None


def convert_space(p: LandmarkPoint, target: CoordinateSpace) -> LandmarkPoint:
    """Rescale a point from its own grid to `target`"""
    if p.space == target:
        return p
    source = p.space
    return LandmarkPoint(
        x=p.x * (target.width_px / source.width_px),
        y=p.y * (target.height_px / source.height_px),
        space=target,
    )


def to_mm(p: LandmarkPoint) -> Tuple[float, float]:
    return (p.x * p.space.mm_per_px_x, p.y * p.space.mm_per_px_y)


def to_canonical_mm(p: LandmarkPoint, canonical: CoordinateSpace = CANONICAL_SPACE) -> Tuple[float, float]:
    return to_mm(convert_space(p, canonical))


def points_to_mm(points: Sequence[LandmarkPoint], canonical: CoordinateSpace = CANONICAL_SPACE) -> np.ndarray:
    """(P, 2) array of mm coordinates in the canonical space"""
    if not points:
        return np.empty((0, 2), dtype=float)
    return np.array([to_canonical_mm(p, canonical) for p in points], dtype=float)


def mm_to_point(x_mm: float, y_mm: float, space: CoordinateSpace) -> LandmarkPoint:
    return LandmarkPoint(x=x_mm / space.mm_per_px_x, y=y_mm / space.mm_per_px_y, space=space)
