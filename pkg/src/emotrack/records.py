"""Line-record artifact I/O.

Every persisted artifact (corpus, roles, scores, thresholds, predictions,
reports) is a UTF-8 text file with one JSON object per line.  The first
line may be a header record (``kind == "header"``) carrying the tool
version and a hash of the effective configuration; all body records carry
a ``kind`` discriminator.  Serialization is canonical (sorted keys,
compact separators) so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Any, Iterable

from . import __version__


class RecordError(ValueError):
    """A record file is malformed; carries the path and line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def dumps_record(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    """Stable short hash of a configuration mapping."""
    blob = dumps_record(_jsonable(config)).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


def _jsonable(value: Any) -> Any:
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(str(v) for v in value)
    if isinstance(value, Path):
        return str(value)
    return value


def make_header(artifact: str, config: dict | None = None, **extra) -> dict:
    header = {
        "kind": "header",
        "artifact": artifact,
        "tool": "emotrack",
        "tool_version": __version__,
    }
    if config is not None:
        header["config_hash"] = config_hash(config)
    header.update(_jsonable(extra))
    return header


def write_records(path, records: Iterable[dict], header: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        if header is not None:
            fh.write(dumps_record(header) + "\n")
        for rec in records:
            fh.write(dumps_record(rec) + "\n")


def read_records(path) -> tuple[dict | None, list[dict]]:
    """Read a record file, returning ``(header_or_None, body_records)``."""
    path = Path(path)
    header = None
    body: list[dict] = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise RecordError(path, line_no, f"invalid JSON: {exc}") from exc
            if not isinstance(rec, dict) or "kind" not in rec:
                raise RecordError(path, line_no, "record must be an object with a 'kind' field")
            if rec["kind"] == "header" and line_no == 1:
                header = rec
            else:
                body.append(rec)
    return header, body
