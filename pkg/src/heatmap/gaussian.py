"""
Gaussian heatmaps
Peak-1 isotropic Gaussian targets, argmax decoding and the max-value
pseudo-confidence consumed by WCVar. Grids are (height_px, width_px),
row -> y and column -> x.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np

from src.annotation_model.coordinates import convert_space
from src.annotation_model.schemas import CoordinateSpace, LandmarkPoint
from src.utils.exceptions import DataError, EmptyCloudError
from src.utils.io_utils import atomic_write_bytes

logger = logging.getLogger(__name__)

_HEADER_DTYPE = np.dtype("<u4")
_VALUE_DTYPE = np.dtype("<f4")


@dataclass(frozen=True)
class Heatmap:
    grid: np.ndarray
    space: CoordinateSpace

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 2:
            raise DataError(f"Heatmap grid must be 2D, got shape {grid.shape}")
        if grid.size == 0:
            raise EmptyCloudError("Heatmap grid is empty")
        expected = (self.space.height_px, self.space.width_px)
        if grid.shape != expected:
            raise DataError(f"Heatmap grid {grid.shape} does not match space '{self.space.space_id}' {expected}")
        if not np.all(np.isfinite(grid)) or np.any(grid < 0):
            raise DataError("Heatmap values must be finite and >= 0")
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)

    def scaled(self, factor: float) -> "Heatmap":
        return Heatmap(self.grid * factor, self.space)


def render_gaussian(center: LandmarkPoint, sigma_px: float, space: CoordinateSpace, amplitude: float = 1.0) -> Heatmap:
    """grid[r][c] = amplitude * exp(-((c - x)^2 + (r - y)^2) / (2 sigma^2))"""
    if not sigma_px > 0:
        raise DataError(f"sigma_px must be > 0, got {sigma_px}")
    if not amplitude >= 0:
        raise DataError(f"amplitude must be >= 0, got {amplitude}")
    center = convert_space(center, space)
    columns = np.arange(space.width_px, dtype=float)
    rows = np.arange(space.height_px, dtype=float)
    # separable: outer product of the two 1D profiles
    profile_x = np.exp(-((columns - center.x) ** 2) / (2.0 * sigma_px ** 2))
    profile_y = np.exp(-((rows - center.y) ** 2) / (2.0 * sigma_px ** 2))
    return Heatmap(amplitude * np.outer(profile_y, profile_x), space)


def decode_argmax(heatmap: Heatmap) -> Tuple[LandmarkPoint, float]:
    """Integer pixel of the maximum; ties go to the smallest row, then column"""
    flat_index = int(np.argmax(heatmap.grid))
    row, column = divmod(flat_index, heatmap.space.width_px)
    value = float(heatmap.grid[row, column])
    return LandmarkPoint(float(column), float(row), heatmap.space), value


def pseudo_confidence(heatmap: Heatmap) -> float:
    return decode_argmax(heatmap)[1]


def render_sample_heatmaps(
    centers: Sequence[LandmarkPoint],
    amplitudes: Sequence[float],
    sigma_px: float,
    space: CoordinateSpace,
) -> List[Heatmap]:
    """One amplitude-scaled Gaussian per prediction sample"""
    if len(centers) != len(amplitudes):
        raise DataError(f"{len(centers)} centers but {len(amplitudes)} amplitudes")
    return [render_gaussian(c, sigma_px, space, amplitude=float(a)) for c, a in zip(centers, amplitudes)]


def write_heatmap(path: Union[str, Path], heatmap: Heatmap) -> Path:
    """Binary dump: uint32 LE height, width, then float32 LE values, row-major"""
    header = np.array([heatmap.space.height_px, heatmap.space.width_px], dtype=_HEADER_DTYPE)
    payload = header.tobytes() + np.ascontiguousarray(heatmap.grid, dtype=_VALUE_DTYPE).tobytes()
    return atomic_write_bytes(path, payload)


def read_heatmap(path: Union[str, Path], space: CoordinateSpace) -> Heatmap:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Heatmap file not found: {path}")
    raw = path.read_bytes()
    header_size = 2 * _HEADER_DTYPE.itemsize
    if len(raw) < header_size:
        raise DataError(f"{path}: truncated heatmap header")
    height, width = (int(v) for v in np.frombuffer(raw[:header_size], dtype=_HEADER_DTYPE))
    expected = header_size + height * width * _VALUE_DTYPE.itemsize
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes for a {height}x{width} heatmap, got {len(raw)}")
    grid = np.frombuffer(raw[header_size:], dtype=_VALUE_DTYPE).reshape(height, width).astype(float)
    return Heatmap(grid, space)
