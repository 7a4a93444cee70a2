"""Knowledge-base construction: walk a source tree, narrate, embed, index.

Folder-level metadata lives in ``_folder_info.json`` files and inherits
root-to-leaf, at most three folder levels deep; the deepest setting wins.
Each source file is chunked or narrated per its kind, embedded, and added
to the vector index, with a checkpoint written after every file so an
interrupted run resumes without reprocessing or duplicating anything.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from .chunking import (
    AGGREGATE_BUDGET,
    Chunk,
    ChunkMetadata,
    EmptyDocumentError,
    IngestConfigError,
    PROSE_KINDS,
    SourceKind,
    chunk_document,
    schema_from_header,
    serialize_aggregate,
    serialize_record,
)
from .jsonl import read_json_optional, write_json_atomic
from .vecstore import EmbeddingProvider, HashingEmbedder, VectorIndex

logger = logging.getLogger(__name__)

FOLDER_INFO_NAME = "_folder_info.json"
INDEX_FILENAME = "vector_index.json"
CHECKPOINT_FILENAME = "ingest_checkpoint.json"
MAX_FOLDER_DEPTH = 3

_FOLDER_INFO_KEYS = frozenset(
    {"kind", "source_type", "data_category", "stroke_type", "complexity_level"}
)

# (source_type, data_category) defaults per source kind.
_KIND_DEFAULTS: dict[SourceKind, tuple[str, str]] = {
    SourceKind.DRILL_MANUAL: ("Unstructured", "Unstructured"),
    SourceKind.PHYSIOLOGY_HANDBOOK: ("Unstructured", "Unstructured"),
    SourceKind.TABULAR_PHYSIOLOGICAL: ("Physiological", "Physiological"),
    SourceKind.COMPETITION_RESULTS: ("Performance", "Performance"),
}

_TABULAR_EXTENSIONS = {".csv", ".tsv"}


@dataclass(frozen=True)
class FolderInfo:
    folder: str
    values: dict[str, str]


def load_folder_info(folder: Path) -> Optional[FolderInfo]:
    path = folder / FOLDER_INFO_NAME
    if not path.is_file():
        return None
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise IngestConfigError(f"{folder}: malformed {FOLDER_INFO_NAME}: {exc}") from exc
    if not isinstance(raw, dict):
        raise IngestConfigError(f"{folder}: {FOLDER_INFO_NAME} must hold a JSON object")
    unknown = set(raw) - _FOLDER_INFO_KEYS
    if unknown:
        raise IngestConfigError(f"{folder}: unknown folder info keys {sorted(unknown)}")
    values: dict[str, str] = {}
    for key, value in raw.items():
        if not isinstance(value, str) or not value.strip():
            raise IngestConfigError(
                f"{folder}: folder info key {key!r} must be a non-empty string"
            )
        values[key] = value.strip()
    if "kind" in values:
        try:
            SourceKind(values["kind"])
        except ValueError as exc:
            raise IngestConfigError(
                f"{folder}: unknown source kind {values['kind']!r}"
            ) from exc
    return FolderInfo(folder=str(folder), values=values)


def metadata_chain(source_root: Path, file_path: Path) -> list[FolderInfo]:
    """Folder info from the source root down to the file's own folder."""
    rel = file_path.parent.relative_to(source_root)
    folders = [source_root]
    for part in rel.parts:
        folders.append(folders[-1] / part)
    if len(folders) > MAX_FOLDER_DEPTH:
        raise IngestConfigError(
            f"{file_path}: nested {len(folders)} folder levels deep; "
            f"the inheritance chain allows at most {MAX_FOLDER_DEPTH}"
        )
    chain = []
    for folder in folders:
        info = load_folder_info(folder)
        if info is not None:
            chain.append(info)
    return chain


def _default_kind(file_path: Path) -> SourceKind:
    if file_path.suffix.lower() in _TABULAR_EXTENSIONS:
        return SourceKind.TABULAR_PHYSIOLOGICAL
    return SourceKind.PHYSIOLOGY_HANDBOOK


def resolve_metadata(file_path: Path,
                     chain: list[FolderInfo]) -> tuple[SourceKind, ChunkMetadata]:
    """Merge the inheritance chain into a source kind plus chunk metadata.

    Later (deeper) folder settings override earlier ones; unset fields fall
    back to kind defaults, with stroke "General" and complexity "Medium".
    The document name is always the file's base name.
    """
    merged: dict[str, str] = {}
    for info in chain:
        merged.update(info.values)
    kind = SourceKind(merged["kind"]) if "kind" in merged else _default_kind(file_path)
    default_source, default_category = _KIND_DEFAULTS[kind]
    metadata = ChunkMetadata(
        source_type=merged.get("source_type", default_source),
        data_category=merged.get("data_category", default_category),
        stroke_type=merged.get("stroke_type", "General"),
        document_name=file_path.name,
        complexity_level=merged.get("complexity_level", "Medium"),
    )
    return kind, metadata


# --- per-file processing ------------------------------------------------------

def _read_rows(file_path: Path) -> tuple[list[str], list[dict[str, str]]]:
    delimiter = "\t" if file_path.suffix.lower() == ".tsv" else ","
    with file_path.open("r", encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle, delimiter=delimiter)
        header = list(reader.fieldnames or [])
        rows = [dict(row) for row in reader]
    return header, rows


def _tertile_groups(rows: list[dict[str, str]],
                    column: str) -> list[tuple[str, list[dict[str, str]]]]:
    valued = []
    for row in rows:
        cell = (row.get(column) or "").strip()
        try:
            valued.append((float(cell), row))
        except ValueError:
            continue
    if len(valued) < 3:
        return []
    valued.sort(key=lambda pair: pair[0])
    n = len(valued)
    cuts = [n // 3, (2 * n) // 3]
    names = ("lower tertile", "middle tertile", "upper tertile")
    groups = [valued[:cuts[0]], valued[cuts[0]:cuts[1]], valued[cuts[1]:]]
    return [(f"the {name} of {column}", [r for _, r in grp])
            for name, grp in zip(names, groups) if grp]


def chunks_for_table(file_path: Path, metadata: ChunkMetadata) -> list[Chunk]:
    """Row-level narration plus subgroup aggregates for one delimited file."""
    header, rows = _read_rows(file_path)
    if not header or not rows:
        raise EmptyDocumentError(f"{file_path.name}: no tabular content")
    schema = schema_from_header(file_path.stem, header, rows[0])

    chunks: list[Chunk] = []
    for i, row in enumerate(rows):
        chunk = serialize_record(row, schema, metadata, i)
        if chunk is not None:
            chunks.append(chunk)

    ordinal = 0
    for stratum_column in (schema.stroke_column, schema.phase_column):
        if not stratum_column:
            continue
        groups: dict[str, list[dict[str, str]]] = {}
        for row in rows:
            value = (row.get(stratum_column) or "").strip()
            if value:
                groups.setdefault(value, []).append(row)
        for value in sorted(groups):
            chunks.append(
                serialize_aggregate(groups[value], stratum_column, value, schema,
                                    metadata, ordinal)
            )
            ordinal += 1
    if schema.performance_column:
        for label, group in _tertile_groups(rows, schema.performance_column):
            chunks.append(
                serialize_aggregate(group, "performance band", label, schema,
                                    metadata, ordinal)
            )
            ordinal += 1
    return chunks


def chunks_for_file(file_path: Path, kind: SourceKind,
                    metadata: ChunkMetadata) -> list[Chunk]:
    if kind in PROSE_KINDS:
        text = file_path.read_text(encoding="utf-8")
        return chunk_document(text, kind, metadata)
    return chunks_for_table(file_path, metadata)


# --- the ingest runner --------------------------------------------------------

@dataclass
class IngestSummary:
    files_processed: list[str] = field(default_factory=list)
    files_skipped: dict[str, str] = field(default_factory=dict)
    chunks_by_category: dict[str, int] = field(default_factory=dict)
    total_chunks: int = 0
    resumed: bool = False
    index_path: str = ""

    def to_dict(self) -> dict:
        return {
            "files_processed": list(self.files_processed),
            "files_skipped": dict(self.files_skipped),
            "chunks_by_category": dict(self.chunks_by_category),
            "total_chunks": self.total_chunks,
            "resumed": self.resumed,
            "index_path": self.index_path,
        }


def discover_source_files(source_root: Path) -> list[Path]:
    files = []
    for path in sorted(source_root.rglob("*")):
        if not path.is_file():
            continue
        if path.name == FOLDER_INFO_NAME or path.name.startswith("."):
            continue
        files.append(path)
    return files


def run_ingest(source_root: str | os.PathLike, out_dir: str | os.PathLike,
               embedder: Optional[EmbeddingProvider] = None,
               on_file: Optional[Callable[[str, int], None]] = None) -> IngestSummary:
    """Build (or resume building) the knowledge index from a source tree.

    After each file the index and a checkpoint naming every processed file
    are written atomically, so a killed run picks up at the next unprocessed
    file and produces byte-identical artifacts to an uninterrupted run.
    """
    root = Path(source_root)
    if not root.is_dir():
        raise IngestConfigError(f"source root {root} is not a directory")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    embedder = embedder or HashingEmbedder()

    index_path = out / INDEX_FILENAME
    checkpoint_path = out / CHECKPOINT_FILENAME

    checkpoint = read_json_optional(str(checkpoint_path))
    summary = IngestSummary(index_path=str(index_path))
    if checkpoint and index_path.is_file():
        index = VectorIndex.load(str(index_path))
        summary.files_processed = list(checkpoint.get("processed", []))
        summary.files_skipped = dict(checkpoint.get("skipped", {}))
        summary.resumed = True
        logger.info("resuming ingest: %d files already processed",
                    len(summary.files_processed))
    else:
        if checkpoint and not index_path.is_file():
            logger.warning("checkpoint exists without an index; starting fresh")
        index = VectorIndex(embedder.dimension)

    done = set(summary.files_processed) | set(summary.files_skipped)
    for file_path in discover_source_files(root):
        rel = file_path.relative_to(root).as_posix()
        if rel in done:
            continue
        chain = metadata_chain(root, file_path)
        kind, metadata = resolve_metadata(file_path, chain)
        try:
            chunks = chunks_for_file(file_path, kind, metadata)
        except EmptyDocumentError as exc:
            logger.warning("skipping %s: %s", rel, exc)
            summary.files_skipped[rel] = str(exc)
            chunks = []
        if chunks:
            vectors = embedder.embed([c.text for c in chunks])
            index.add(c.with_embedding(v) for c, v in zip(chunks, vectors))
            summary.files_processed.append(rel)
        index.save(str(index_path))
        write_json_atomic(str(checkpoint_path), {
            "source_root": str(root),
            "processed": sorted(summary.files_processed),
            "skipped": dict(sorted(summary.files_skipped.items())),
        })
        if on_file is not None:
            on_file(rel, len(chunks))

    summary.files_processed.sort()
    summary.total_chunks = len(index)
    for chunk in index.chunks():
        category = chunk.metadata.data_category
        summary.chunks_by_category[category] = (
            summary.chunks_by_category.get(category, 0) + 1
        )
    return summary
