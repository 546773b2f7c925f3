"""
Exception hierarchy for the landmark variability toolkit
Each family maps to one CLI exit code (usage=1, data=2, consistency=3).
"""

from typing import Iterable, List, Optional, Tuple


class LandmarkAnalysisError(Exception):
    """Base class for every error raised by the toolkit"""

    exit_code = 3


class ConfigError(LandmarkAnalysisError, ValueError):
    """Invalid run configuration or command-line usage"""

    exit_code = 1


class DataError(LandmarkAnalysisError, ValueError):
    """Input data is malformed, inconsistent or insufficient"""

    exit_code = 2


class AnnotationParseError(DataError):
    """A corpus or annotation file could not be parsed"""

    def __init__(self, message: str, path: Optional[str] = None, line_number: Optional[int] = None):
        self.path = path
        self.line_number = line_number
        location = ""
        if path is not None:
            location = f"{path}"
        if line_number is not None:
            location = f"{location}:{line_number}" if location else f"line {line_number}"
        super().__init__(f"{location}: {message}" if location else message)


class SpaceMismatchError(DataError):
    """Points from different coordinate spaces were mixed"""


class EmptyCloudError(DataError):
    """A point cloud, annotation set or sample set has no points"""


class UnsupportedDimensionError(DataError):
    """Operation requested for a dimension it does not handle"""


class ProvenanceError(DataError):
    """Sample provenance does not match the requested fusion strategy"""


class KeyAlignmentError(DataError):
    """Two keyed tables do not cover the same (scan_id, landmark_id) pairs"""

    def __init__(self, message: str, missing: Iterable[Tuple[str, int]] = ()):
        self.missing: List[Tuple[str, int]] = sorted(missing)
        preview = ", ".join(f"({scan}, {lm})" for scan, lm in self.missing[:10])
        if len(self.missing) > 10:
            preview += f", ... ({len(self.missing)} total)"
        super().__init__(f"{message}: {preview}" if self.missing else message)


class UndefinedCorrelationError(LandmarkAnalysisError, ArithmeticError):
    """Pearson correlation is undefined (zero variance or too few pairs)"""

    exit_code = 2


class ConsistencyError(LandmarkAnalysisError, RuntimeError):
    """An internal numerical invariant was violated"""

    exit_code = 3
