"""
Point-cloud statistics
Mean, population covariance and closed-form eigen-decomposition of the small
(2x2 / 3x3) symmetric matrices that describe an annotation or sample cloud,
plus the Gaussian ellipse derived from them.
"""

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.annotation_model.coordinates import CANONICAL_SPACE, points_to_mm
from src.annotation_model.schemas import CoordinateSpace, LandmarkPoint
from src.utils.exceptions import ConsistencyError, DataError, EmptyCloudError, UnsupportedDimensionError

NEGATIVE_EIGENVALUE_TOLERANCE = 1e-12


@dataclass(frozen=True)
class PointCloud:
    """P points of dimension n (2 or 3), in mm"""
    points: np.ndarray

    def __post_init__(self):
        array = np.asarray(self.points, dtype=float)
        if array.ndim != 2:
            raise DataError(f"Point cloud must be a (P, n) array, got shape {array.shape}")
        if array.shape[0] == 0:
            raise EmptyCloudError("Point cloud has no points")
        if array.shape[1] not in (2, 3):
            raise UnsupportedDimensionError(f"Point dimension must be 2 or 3, got {array.shape[1]}")
        if not np.all(np.isfinite(array)):
            raise DataError("Point cloud contains non-finite coordinates")
        array.setflags(write=False)
        object.__setattr__(self, "points", array)

    @classmethod
    def from_vectors(cls, vectors: Sequence[Sequence[float]]) -> "PointCloud":
        if len(vectors) == 0:
            raise EmptyCloudError("Point cloud has no points")
        dims = {len(v) for v in vectors}
        if len(dims) != 1:
            raise DataError(f"Point cloud mixes dimensions {sorted(dims)}")
        return cls(np.array(vectors, dtype=float))

    @classmethod
    def from_points(cls, points: Sequence[LandmarkPoint], canonical: CoordinateSpace = CANONICAL_SPACE) -> "PointCloud":
        if len(points) == 0:
            raise EmptyCloudError("Point cloud has no points")
        return cls(points_to_mm(points, canonical))

    @property
    def P(self) -> int:
        return int(self.points.shape[0])

    @property
    def n(self) -> int:
        return int(self.points.shape[1])

    def transformed(self, matrix: np.ndarray, offset: np.ndarray) -> "PointCloud":
        return PointCloud(self.points @ np.asarray(matrix, dtype=float).T + np.asarray(offset, dtype=float))


@dataclass(frozen=True)
class CovarianceSummary:
    mean: np.ndarray
    covariance: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return int(self.mean.shape[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[-1])


def centroid(points: np.ndarray) -> np.ndarray:
    """Arithmetic mean of the rows; the one mean shared by CVar, covariance and fusion"""
    return np.mean(np.asarray(points, dtype=float), axis=0)


def population_covariance(points: np.ndarray, mean: np.ndarray) -> np.ndarray:
    centered = np.asarray(points, dtype=float) - mean
    covariance = centered.T @ centered / centered.shape[0]
    return 0.5 * (covariance + covariance.T)


def _eigh_2x2(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    a, b, d = matrix[0, 0], matrix[0, 1], matrix[1, 1]
    half_trace = 0.5 * (a + d)
    radius = math.hypot(0.5 * (a - d), b)
    values = np.array([half_trace + radius, half_trace - radius])
    theta = 0.5 * math.atan2(2.0 * b, a - d)
    vectors = np.array([
        [math.cos(theta), -math.sin(theta)],
        [math.sin(theta), math.cos(theta)],
    ])
    return values, vectors


def _eigvals_3x3(matrix: np.ndarray) -> np.ndarray:
    """Trigonometric closed form for a symmetric 3x3 matrix, descending"""
    off_diagonal = matrix[0, 1] ** 2 + matrix[0, 2] ** 2 + matrix[1, 2] ** 2
    if off_diagonal == 0.0:
        return np.sort(np.diag(matrix))[::-1].astype(float)
    q = np.trace(matrix) / 3.0
    diag_shift = np.diag(matrix) - q
    p2 = float(np.sum(diag_shift ** 2) + 2.0 * off_diagonal)
    p = math.sqrt(p2 / 6.0)
    b = (matrix - q * np.eye(3)) / p
    r = float(np.clip(np.linalg.det(b) / 2.0, -1.0, 1.0))
    phi = math.acos(r) / 3.0
    largest = q + 2.0 * p * math.cos(phi)
    smallest = q + 2.0 * p * math.cos(phi + 2.0 * math.pi / 3.0)
    middle = 3.0 * q - largest - smallest
    return np.array([largest, middle, smallest])


def _eigenvector_3x3(matrix: np.ndarray, value: float) -> np.ndarray:
    shifted = matrix - value * np.eye(3)
    candidates = [
        np.cross(shifted[0], shifted[1]),
        np.cross(shifted[0], shifted[2]),
        np.cross(shifted[1], shifted[2]),
    ]
    best = max(candidates, key=lambda v: float(np.dot(v, v)))
    norm = np.linalg.norm(best)
    if norm == 0.0:
        raise ConsistencyError("Eigenvector of an isolated eigenvalue could not be determined")
    return best / norm


def _orthonormal_complement(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    helper = np.eye(3)[int(np.argmin(np.abs(u)))]
    s = np.cross(u, helper)
    s /= np.linalg.norm(s)
    t = np.cross(u, s)
    return s, t


def _eigh_3x3(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    values = _eigvals_3x3(matrix)
    scale = max(abs(values[0]), abs(values[2]), 1e-300)
    if values[0] - values[2] <= 1e-14 * scale:
        return values, np.eye(3)

    # Solve the most isolated eigenvalue directly, the other two inside its complement.
    isolated = 0 if values[0] - values[1] >= values[1] - values[2] else 2
    u = _eigenvector_3x3(matrix, values[isolated])
    s, t = _orthonormal_complement(u)
    basis = np.column_stack([s, t])
    reduced = basis.T @ matrix @ basis
    _, sub_vectors = _eigh_2x2(0.5 * (reduced + reduced.T))
    pair = basis @ sub_vectors

    vectors = np.empty((3, 3))
    if isolated == 0:
        vectors[:, 0] = u
        vectors[:, 1] = pair[:, 0]
        vectors[:, 2] = pair[:, 1]
    else:
        vectors[:, 0] = pair[:, 0]
        vectors[:, 1] = pair[:, 1]
        vectors[:, 2] = u
    return values, vectors


def symmetric_eigen(matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form eigen-decomposition of a symmetric PSD 2x2 or 3x3 matrix

    Returns:
        (eigenvalues descending and clamped at 0, eigenvectors as columns)
    """
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape == (2, 2):
        values, vectors = _eigh_2x2(matrix)
    elif matrix.shape == (3, 3):
        values, vectors = _eigh_3x3(matrix)
    else:
        raise UnsupportedDimensionError(f"Only 2x2 and 3x3 matrices are supported, got {matrix.shape}")

    tolerance = NEGATIVE_EIGENVALUE_TOLERANCE * max(1.0, float(np.max(np.abs(values))))
    if np.any(values < -tolerance):
        raise ConsistencyError(f"Covariance has a negative eigenvalue {values.min():.3e}")
    return np.maximum(values, 0.0), vectors


def summarize(cloud: PointCloud) -> CovarianceSummary:
    """Mean, population covariance (1/P) and descending eigenpairs of a cloud"""
    mean = centroid(cloud.points)
    covariance = population_covariance(cloud.points, mean)
    eigenvalues, eigenvectors = symmetric_eigen(covariance)
    return CovarianceSummary(mean=mean, covariance=covariance, eigenvalues=eigenvalues, eigenvectors=eigenvectors)


@dataclass(frozen=True)
class EllipseParams:
    center: np.ndarray
    semi_axes: np.ndarray
    orientation: np.ndarray

    @property
    def angle_deg(self) -> float:
        """Direction of the major axis, in degrees within [0, 180)"""
        major = self.orientation[:, 0]
        return math.degrees(math.atan2(major[1], major[0])) % 180.0

    @property
    def is_degenerate(self) -> bool:
        return bool(np.any(self.semi_axes == 0.0))


def ellipse_params(summary: CovarianceSummary, k_sigma: float) -> EllipseParams:
    """k-sigma ellipse of a 2D Gaussian fit: semi-axes k*sqrt(lambda_i)"""
    if summary.n != 2:
        raise UnsupportedDimensionError(f"Ellipse parameters need a 2D summary, got n={summary.n}")
    if not k_sigma > 0:
        raise DataError(f"k_sigma must be positive, got {k_sigma}")
    return EllipseParams(
        center=summary.mean.copy(),
        semi_axes=k_sigma * np.sqrt(summary.eigenvalues),
        orientation=summary.eigenvectors.copy(),
    )
