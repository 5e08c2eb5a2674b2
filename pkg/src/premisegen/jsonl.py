"""Line-delimited JSON helpers used by every file interface in the pipeline."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Iterable, Iterator

from .errors import DataError


def iter_jsonl(path: Path | str) -> Iterator[tuple[int, Any]]:
    """Yield (1-based line number, parsed object) for every non-blank line.

    Raises DataError if the path cannot be read; malformed lines raise
    json.JSONDecodeError for the caller to decide whether that is fatal.
    """
    path = Path(path)
    try:
        handle = path.open("r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    with handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            yield lineno, json.loads(line)


def read_jsonl(path: Path | str) -> list[Any]:
    return [obj for _, obj in iter_jsonl(path)]


def dump_line(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_jsonl(path: Path | str, objects: Iterable[Any]) -> int:
    """Write objects one per line; returns the number of lines written."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as handle:
        for obj in objects:
            handle.write(dump_line(obj) + "\n")
            count += 1
    return count
