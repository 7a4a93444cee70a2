"""JSONL corpus files and atomic JSON checkpoint persistence.

Corpus files are append-only, one UTF-8 JSON object per line, single
writer per file. Each append is a single positional write of the full
line including its newline, so a crash can only ever leave one torn
line at the very end of a file; readers treat such a tail as crash
residue and resume truncates it before appending further records.
"""

from __future__ import annotations

import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Iterator, Optional

from .models import GoldenTriplet

logger = logging.getLogger(__name__)


class CorpusReadError(Exception):
    """A corpus line failed to parse; carries the 1-based line number."""

    def __init__(self, path: Path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = path
        self.line_no = line_no


def dump_json_line(obj: dict[str, Any]) -> str:
    return json.dumps(obj, ensure_ascii=False)


def append_jsonl(path: Path, obj: dict[str, Any], fsync: bool = False) -> None:
    """Append one record; the line and its newline go down in one write."""
    path = Path(path)
    data = (dump_json_line(obj) + "\n").encode("utf-8")
    path.parent.mkdir(parents=True, exist_ok=True)
    fd = os.open(path, os.O_WRONLY | os.O_APPEND | os.O_CREAT, 0o644)
    try:
        os.write(fd, data)
        if fsync:
            os.fsync(fd)
    finally:
        os.close(fd)


def iter_jsonl(path: Path, tolerant: bool = False) -> Iterator[tuple[int, dict[str, Any]]]:
    """Yield (line_no, object) pairs in file order.

    A trailing line without a terminating newline that does not parse is
    crash residue from an interrupted append: it is skipped with a warning
    in both modes. Any other malformed line raises CorpusReadError, or is
    skipped with a warning when tolerant is set.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw:
        return
    ends_with_newline = raw.endswith(b"\n")
    lines = raw.decode("utf-8").split("\n")
    if ends_with_newline:
        lines = lines[:-1]
    for i, line in enumerate(lines, start=1):
        is_last = i == len(lines)
        stripped = line.strip()
        if not stripped:
            continue
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            if is_last and not ends_with_newline:
                logger.warning("%s:%d: ignoring torn trailing line from interrupted append", path, i)
                return
            if tolerant:
                logger.warning("%s:%d: skipping malformed line: %s", path, i, exc)
                continue
            raise CorpusReadError(path, i, f"invalid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            if tolerant:
                logger.warning("%s:%d: skipping non-object line", path, i)
                continue
            raise CorpusReadError(path, i, "line is not a JSON object")
        yield i, obj


def repair_jsonl_tail(path: Path) -> bool:
    """Truncate a torn trailing line, returning True if bytes were removed."""
    path = Path(path)
    if not path.exists():
        return False
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw or raw.endswith(b"\n"):
        return False
    cut = raw.rfind(b"\n") + 1
    with open(path, "r+b") as fh:
        fh.truncate(cut)
    logger.warning("%s: truncated %d bytes of torn trailing data", path, len(raw) - cut)
    return True


def read_corpus(path: Path, tolerant: bool = False) -> Iterator[GoldenTriplet]:
    """Stream GoldenTriplet records from a corpus file, preserving order."""
    for line_no, obj in iter_jsonl(path, tolerant=tolerant):
        try:
            yield GoldenTriplet.from_dict(obj)
        except (KeyError, ValueError, TypeError) as exc:
            if tolerant:
                logger.warning("%s:%d: skipping unparseable record: %s", path, line_no, exc)
                continue
            raise CorpusReadError(path, line_no, f"unparseable record: {exc}") from exc


def append_corpus(path: Path, record: GoldenTriplet, fsync: bool = False) -> None:
    append_jsonl(path, record.to_dict(), fsync=fsync)


def corpus_ids(path: Path) -> set[str]:
    """triplet_ids already present in a corpus file (empty if absent)."""
    path = Path(path)
    if not path.exists():
        return set()
    return {obj["triplet_id"] for _, obj in iter_jsonl(path, tolerant=True) if "triplet_id" in obj}


def write_json_atomic(path: Path, obj: Any) -> None:
    """Write JSON via temp-file-and-rename so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(obj, fh, ensure_ascii=False, indent=2)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_json(path: Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def read_json_optional(path: Path) -> Optional[Any]:
    if not Path(path).exists():
        return None
    return read_json(path)
