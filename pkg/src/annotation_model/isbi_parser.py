"""
ISBI-style annotation file ingestion
One "x,y" pair per line for the leading landmark lines; anything after the
coordinate block (e.g. stage labels without a comma) is ignored, but a
coordinate line after it means the block was broken and is a parse error.
Directory layout for bulk import: <root>/<rater_id>/<scan_id>.txt
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union

from src.annotation_model.schemas import (
    AnnotationCorpus,
    AnnotationSet,
    CoordinateSpace,
    LandmarkPoint,
    default_landmark_definitions,
)
from src.utils.exceptions import AnnotationParseError, DataError

logger = logging.getLogger(__name__)

_DECIMAL = r"[-+]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][-+]?\d+)?"
_COORDINATE_LINE = re.compile(rf"^\s*({_DECIMAL})\s*,\s*({_DECIMAL})\s*$")


def parse_isbi_annotation_file(
    text: Union[bytes, str],
    space: CoordinateSpace,
    rater_id: str,
    source: Optional[str] = None,
) -> List[LandmarkPoint]:
    """
    Parse an ISBI-style landmark file

    Args:
        text: raw file content (UTF-8 bytes or str)
        space: coordinate space the pixels refer to
        rater_id: rater the file belongs to, used in diagnostics
        source: file name for error messages

    Returns:
        One LandmarkPoint per leading coordinate line, in file order
    """
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8-sig")
        except UnicodeDecodeError as e:
            raise AnnotationParseError(f"not valid UTF-8 ({e})", path=source) from e

    if not text.strip():
        raise AnnotationParseError("empty file", path=source)

    points: List[LandmarkPoint] = []
    block_end: Optional[int] = None
    block_end_line = ""
    for line_number, line in enumerate(text.splitlines(), start=1):
        match = _COORDINATE_LINE.match(line)
        if block_end is not None:
            if match:
                raise AnnotationParseError(
                    f"malformed coordinate line {block_end_line.strip()!r} inside the coordinate block (rater {rater_id})",
                    path=source,
                    line_number=block_end,
                )
            continue
        if match:
            points.append(LandmarkPoint(float(match.group(1)), float(match.group(2)), space))
            continue
        if not points and not line.strip():
            continue
        if "," in line or not points:
            raise AnnotationParseError(
                f"malformed coordinate line {line.strip()!r} (rater {rater_id})",
                path=source,
                line_number=line_number,
            )
        # first non-coordinate line closes the block; no coordinates may follow it
        block_end = line_number
        block_end_line = line

    out_of_bounds = sum(1 for p in points if not p.in_bounds)
    if out_of_bounds:
        logger.warning(f"{source or rater_id}: {out_of_bounds} point(s) outside the {space.space_id} grid (kept)")
    return points


def serialize_isbi_points(points: Sequence[LandmarkPoint]) -> str:
    return "".join(f"{p.x!r},{p.y!r}\n" for p in points)


def _select_landmarks(points: List[LandmarkPoint], subset: Optional[Sequence[int]], source: str) -> List[LandmarkPoint]:
    if subset is None:
        return points
    if len(points) > max(subset):
        return [points[i] for i in subset]
    if len(points) == len(subset):
        # file already holds only the selected landmarks
        return points
    raise DataError(
        f"{source}: {len(points)} landmarks cannot be reduced to subset {list(subset)}"
    )


def load_isbi_directory(
    root: Union[str, Path],
    space: CoordinateSpace,
    landmark_subset: Optional[Sequence[int]] = None,
    landmark_names: Optional[Sequence[str]] = None,
) -> AnnotationCorpus:
    """
    Load every <rater_id>/<scan_id>.txt below `root` into an AnnotationCorpus

    Args:
        root: directory with one sub-directory per rater
        space: coordinate space of all files
        landmark_subset: optional ISBI landmark indices to keep, re-indexed 0..K-1
        landmark_names: optional names for the kept landmarks
    """
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"Annotation directory not found: {root}")

    files = sorted(root.glob("*/*.txt"))
    if not files:
        raise DataError(f"No annotation files found under {root}")

    by_key: Dict[tuple, List[tuple]] = {}
    n_landmarks: Optional[int] = None
    for path in files:
        rater_id = path.parent.name
        scan_id = path.stem
        points = parse_isbi_annotation_file(path.read_bytes(), space, rater_id, source=str(path))
        points = _select_landmarks(points, landmark_subset, str(path))
        if n_landmarks is None:
            n_landmarks = len(points)
        elif len(points) != n_landmarks:
            raise DataError(f"{path}: expected {n_landmarks} landmarks, found {len(points)}")
        for landmark_id, point in enumerate(points):
            by_key.setdefault((scan_id, landmark_id), []).append((rater_id, point))

    sets = [AnnotationSet(scan, lm, tuple(raters)) for (scan, lm), raters in sorted(by_key.items())]
    corpus = AnnotationCorpus.from_sets(sets, default_landmark_definitions(n_landmarks or 0, landmark_names))
    logger.info(f"Loaded {len(files)} ISBI files from {root}: {corpus.summary()}")
    return corpus
