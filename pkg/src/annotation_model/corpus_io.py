"""
Native JSON-lines corpora
Annotation corpus: a header record declaring spaces and landmarks, then one
record per (scan, landmark, rater). Prediction samples: a header declaring the
space and strategy, then one record per (scan, landmark) with its samples.
Records are validated with jsonschema and written with sorted keys.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import jsonschema

from src.annotation_model.schemas import (
    AnnotationCorpus,
    AnnotationSet,
    CoordinateSpace,
    LandmarkDefinition,
    LandmarkPoint,
    Provenance,
    SampleCorpus,
    SampleSet,
)
from src.utils.exceptions import AnnotationParseError, DataError
from src.utils.io_utils import atomic_write_text, to_jsonl_text

logger = logging.getLogger(__name__)

ANNOTATION_FORMAT = "landmark-annotations"
SAMPLE_FORMAT = "landmark-samples"
FORMAT_VERSION = 1

_SPACE_SCHEMA = {
    "type": "object",
    "required": ["space_id", "width_px", "height_px", "mm_per_px_x", "mm_per_px_y"],
    "properties": {
        "space_id": {"type": "string", "minLength": 1},
        "width_px": {"type": "integer", "minimum": 1},
        "height_px": {"type": "integer", "minimum": 1},
        "mm_per_px_x": {"type": "number", "exclusiveMinimum": 0},
        "mm_per_px_y": {"type": "number", "exclusiveMinimum": 0},
    },
}

ANNOTATION_HEADER_SCHEMA = {
    "type": "object",
    "required": ["record_type", "format", "version", "spaces", "landmarks"],
    "properties": {
        "record_type": {"const": "header"},
        "format": {"const": ANNOTATION_FORMAT},
        "version": {"const": FORMAT_VERSION},
        "spaces": {"type": "array", "minItems": 1, "items": _SPACE_SCHEMA},
        "landmarks": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["landmark_id", "name"],
                "properties": {
                    "landmark_id": {"type": "integer", "minimum": 0},
                    "name": {"type": "string"},
                },
            },
        },
    },
}

ANNOTATION_RECORD_SCHEMA = {
    "type": "object",
    "required": ["scan_id", "landmark_id", "rater_id", "x", "y", "space_id"],
    "additionalProperties": False,
    "properties": {
        "scan_id": {"type": "string", "minLength": 1},
        "landmark_id": {"type": "integer", "minimum": 0},
        "rater_id": {"type": "string", "minLength": 1},
        "x": {"type": "number"},
        "y": {"type": "number"},
        "space_id": {"type": "string", "minLength": 1},
    },
}

SAMPLE_HEADER_SCHEMA = {
    "type": "object",
    "required": ["record_type", "format", "version", "space"],
    "properties": {
        "record_type": {"const": "header"},
        "format": {"const": SAMPLE_FORMAT},
        "version": {"const": FORMAT_VERSION},
        "space": _SPACE_SCHEMA,
        "strategy": {"type": ["string", "null"]},
    },
}

SAMPLE_RECORD_SCHEMA = {
    "type": "object",
    "required": ["scan_id", "landmark_id", "provenance", "samples"],
    "additionalProperties": False,
    "properties": {
        "scan_id": {"type": "string", "minLength": 1},
        "landmark_id": {"type": "integer", "minimum": 0},
        "provenance": {"enum": [p.value for p in Provenance]},
        "samples": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["x", "y"],
                "additionalProperties": False,
                "properties": {
                    "x": {"type": "number"},
                    "y": {"type": "number"},
                    "heatmap_max": {"type": "number", "minimum": 0},
                },
            },
        },
    },
}


def _iter_records(path: Path) -> Iterator[Tuple[int, Dict[str, Any]]]:
    if not path.exists():
        raise DataError(f"File not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        for line_number, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise AnnotationParseError(f"invalid JSON ({e.msg})", path=str(path), line_number=line_number) from e
            if not isinstance(record, dict):
                raise AnnotationParseError("record must be a JSON object", path=str(path), line_number=line_number)
            yield line_number, record


_ANNOTATION_HEADER_VALIDATOR = jsonschema.Draft7Validator(ANNOTATION_HEADER_SCHEMA)
_ANNOTATION_RECORD_VALIDATOR = jsonschema.Draft7Validator(ANNOTATION_RECORD_SCHEMA)
_SAMPLE_HEADER_VALIDATOR = jsonschema.Draft7Validator(SAMPLE_HEADER_SCHEMA)
_SAMPLE_RECORD_VALIDATOR = jsonschema.Draft7Validator(SAMPLE_RECORD_SCHEMA)


def _validate(record: Dict[str, Any], validator: jsonschema.Draft7Validator, path: Path, line_number: int) -> None:
    try:
        validator.validate(record)
    except jsonschema.ValidationError as e:
        raise AnnotationParseError(f"schema validation failed: {e.message}", path=str(path), line_number=line_number) from e


# ---------------------------------------------------------------- annotations

def annotation_records(corpus: AnnotationCorpus) -> List[Dict[str, Any]]:
    header = {
        "record_type": "header",
        "format": ANNOTATION_FORMAT,
        "version": FORMAT_VERSION,
        "spaces": [space.to_dict() for _, space in sorted(corpus.spaces.items())],
        "landmarks": [definition.to_dict() for definition in corpus.landmarks],
    }
    records: List[Dict[str, Any]] = [header]
    for annotation_set in corpus:
        for rater_id, point in annotation_set.rater_points:
            records.append({
                "scan_id": annotation_set.scan_id,
                "landmark_id": int(annotation_set.landmark_id),
                "rater_id": rater_id,
                "x": float(point.x),
                "y": float(point.y),
                "space_id": point.space.space_id,
            })
    return records


def write_corpus(corpus: AnnotationCorpus, path: Union[str, Path]) -> Path:
    target = atomic_write_text(path, to_jsonl_text(annotation_records(corpus)))
    logger.info(f"Wrote annotation corpus with {corpus.n_records} records to {target}")
    return target


def read_corpus(path: Union[str, Path]) -> AnnotationCorpus:
    """Read a native JSON-lines annotation corpus"""
    path = Path(path)
    spaces: Optional[Dict[str, CoordinateSpace]] = None
    landmarks: Tuple[LandmarkDefinition, ...] = ()
    grouped: Dict[Tuple[str, int], List[Tuple[str, LandmarkPoint]]] = {}

    for line_number, record in _iter_records(path):
        if spaces is None:
            _validate(record, _ANNOTATION_HEADER_VALIDATOR, path, line_number)
            spaces = {}
            for space_data in record["spaces"]:
                space = CoordinateSpace.from_dict(space_data)
                spaces[space.space_id] = space
            landmarks = tuple(LandmarkDefinition(int(d["landmark_id"]), d["name"]) for d in record["landmarks"])
            continue
        _validate(record, _ANNOTATION_RECORD_VALIDATOR, path, line_number)
        space = spaces.get(record["space_id"])
        if space is None:
            raise AnnotationParseError(f"undeclared space '{record['space_id']}'", path=str(path), line_number=line_number)
        point = LandmarkPoint(float(record["x"]), float(record["y"]), space)
        grouped.setdefault((record["scan_id"], int(record["landmark_id"])), []).append((record["rater_id"], point))

    if spaces is None:
        raise AnnotationParseError("empty file", path=str(path))
    if not grouped:
        raise DataError(f"{path}: corpus holds no annotation records")

    sets = [AnnotationSet(scan, lm, tuple(raters)) for (scan, lm), raters in grouped.items()]
    corpus = AnnotationCorpus.from_sets(sets, landmarks)
    if corpus.flagged_out_of_bounds:
        logger.warning(f"{path}: {len(corpus.flagged_out_of_bounds)} annotation(s) fall outside their grid (kept)")
    logger.info(f"Read annotation corpus {path}: {corpus.summary()}")
    return corpus


# ------------------------------------------------------------ sample sets

def sample_records(corpus: SampleCorpus) -> List[Dict[str, Any]]:
    space = corpus.space
    if space is None:
        raise DataError("Cannot write an empty sample corpus")
    records: List[Dict[str, Any]] = [{
        "record_type": "header",
        "format": SAMPLE_FORMAT,
        "version": FORMAT_VERSION,
        "space": space.to_dict(),
        "strategy": corpus.strategy,
    }]
    for sample_set in corpus:
        samples = []
        for point, heatmap_max in sample_set.samples:
            entry: Dict[str, Any] = {"x": float(point.x), "y": float(point.y)}
            if heatmap_max is not None:
                entry["heatmap_max"] = float(heatmap_max)
            samples.append(entry)
        records.append({
            "scan_id": sample_set.scan_id,
            "landmark_id": int(sample_set.landmark_id),
            "provenance": sample_set.provenance.value,
            "samples": samples,
        })
    return records


def write_samples(corpus: SampleCorpus, path: Union[str, Path]) -> Path:
    target = atomic_write_text(path, to_jsonl_text(sample_records(corpus)))
    logger.info(f"Wrote {len(corpus)} sample sets ({corpus.strategy}) to {target}")
    return target


def read_samples(path: Union[str, Path], strategy: Optional[str] = None) -> SampleCorpus:
    """
    Read a prediction-sample file

    Args:
        path: JSON-lines file with a header record
        strategy: overrides the strategy declared in the header
    """
    path = Path(path)
    space: Optional[CoordinateSpace] = None
    declared_strategy: Optional[str] = None
    sets: List[SampleSet] = []

    for line_number, record in _iter_records(path):
        if space is None:
            _validate(record, _SAMPLE_HEADER_VALIDATOR, path, line_number)
            space = CoordinateSpace.from_dict(record["space"])
            declared_strategy = record.get("strategy")
            continue
        _validate(record, _SAMPLE_RECORD_VALIDATOR, path, line_number)
        samples = tuple(
            (LandmarkPoint(float(s["x"]), float(s["y"]), space), s.get("heatmap_max"))
            for s in record["samples"]
        )
        try:
            sets.append(SampleSet(record["scan_id"], int(record["landmark_id"]), Provenance(record["provenance"]), samples))
        except DataError as e:
            raise AnnotationParseError(str(e), path=str(path), line_number=line_number) from e

    if space is None:
        raise AnnotationParseError("empty file", path=str(path))
    if not sets:
        raise DataError(f"{path}: no sample records")

    corpus = SampleCorpus.from_sets(sets, strategy or declared_strategy)
    logger.info(f"Read {len(corpus)} sample sets for strategy '{corpus.strategy}' from {path}")
    return corpus
