"""
File output helpers
Reports, corpora and plots are written atomically: temp file + rename.
"""

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Iterable, Mapping, Union

PathLike = Union[str, Path]


def atomic_write_bytes(path: PathLike, payload: bytes) -> Path:
    """Write bytes to `path` so readers see either the old or the new file"""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{target.name}.", suffix=".tmp", dir=target.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(payload)
        os.replace(tmp_name, target)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise
    return target


def atomic_write_text(path: PathLike, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def to_json_text(payload: Any) -> str:
    """Deterministic JSON: sorted keys, fixed indent, trailing newline"""
    return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def to_jsonl_text(records: Iterable[Mapping[str, Any]]) -> str:
    lines = [json.dumps(record, sort_keys=True, ensure_ascii=False, allow_nan=False) for record in records]
    return "\n".join(lines) + ("\n" if lines else "")
