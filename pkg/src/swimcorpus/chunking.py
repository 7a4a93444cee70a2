"""Source-aware segmentation and two-level narrative serialization.

Prose sources are segmented at the natural semantic unit of their kind
(drill boundaries, concept/protocol boundaries, event blocks) and packed
into kind-specific token budgets. Tabular sources are narrated twice:
once per row as a value-preserving paragraph, and once per subgroup as a
statistical summary paragraph.
"""

from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Optional, Sequence

logger = logging.getLogger(__name__)


class IngestError(Exception):
    pass


class EmptyDocumentError(IngestError):
    pass


class IngestConfigError(IngestError):
    pass


class SourceKind(str, Enum):
    DRILL_MANUAL = "DrillManual"
    PHYSIOLOGY_HANDBOOK = "PhysiologyHandbook"
    TABULAR_PHYSIOLOGICAL = "TabularPhysiological"
    COMPETITION_RESULTS = "CompetitionResults"


PROSE_KINDS = frozenset(
    {SourceKind.DRILL_MANUAL, SourceKind.PHYSIOLOGY_HANDBOOK, SourceKind.COMPETITION_RESULTS}
)

# (min, max) token budgets per semantic unit family.
PROSE_BUDGETS: dict[SourceKind, tuple[int, int]] = {
    SourceKind.DRILL_MANUAL: (300, 600),
    SourceKind.PHYSIOLOGY_HANDBOOK: (400, 800),
    SourceKind.COMPETITION_RESULTS: (150, 250),
}
RECORD_BUDGET = (150, 300)
AGGREGATE_BUDGET = (200, 400)


def approx_token_count(text: str) -> int:
    """Deterministic token approximation: ceil(character_count / 4)."""
    return math.ceil(len(text) / 4)


@dataclass(frozen=True)
class ChunkMetadata:
    """The five metadata fields attached to every indexed chunk."""

    source_type: str
    data_category: str
    stroke_type: str
    document_name: str
    complexity_level: str

    FIELDS = ("source_type", "data_category", "stroke_type", "document_name", "complexity_level")

    def __post_init__(self) -> None:
        for name in self.FIELDS:
            if not getattr(self, name):
                raise ValueError(f"metadata field {name} must be non-empty")

    def to_dict(self) -> dict[str, str]:
        return {name: getattr(self, name) for name in self.FIELDS}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ChunkMetadata":
        extra = set(data) - set(cls.FIELDS)
        if extra:
            raise ValueError(f"unknown metadata keys: {sorted(extra)}")
        return cls(**{name: str(data[name]) for name in cls.FIELDS})


@dataclass(frozen=True)
class Chunk:
    chunk_id: str
    text: str
    token_count: int
    metadata: ChunkMetadata
    embedding: Optional[tuple[float, ...]] = None
    is_remainder: bool = False

    def with_embedding(self, vector: Sequence[float]) -> "Chunk":
        return replace(self, embedding=tuple(float(v) for v in vector))

    def to_dict(self) -> dict[str, Any]:
        return {
            "chunk_id": self.chunk_id,
            "text": self.text,
            "token_count": self.token_count,
            "metadata": self.metadata.to_dict(),
            "embedding": None if self.embedding is None else list(self.embedding),
            "is_remainder": self.is_remainder,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Chunk":
        embedding = data.get("embedding")
        return cls(
            chunk_id=str(data["chunk_id"]),
            text=str(data["text"]),
            token_count=int(data["token_count"]),
            metadata=ChunkMetadata.from_dict(data["metadata"]),
            embedding=None if embedding is None else tuple(float(v) for v in embedding),
            is_remainder=bool(data.get("is_remainder", False)),
        )


def _make_chunk(document_name: str, ordinal: int, text: str, metadata: ChunkMetadata,
                remainder: bool = False, tag: str = "c") -> Chunk:
    return Chunk(
        chunk_id=f"{document_name}#{tag}{ordinal:04d}",
        text=text,
        token_count=approx_token_count(text),
        metadata=metadata,
        is_remainder=remainder,
    )


# --- prose segmentation -----------------------------------------------------

_NUMBERED_HEADING = re.compile(r"^\s*(?:Drill\s+\d+\b|\d+\.)\s*\S?")
_MARKDOWN_HEADING = re.compile(r"^#{1,6}\s+\S")
_ALL_CAPS_TITLE = re.compile(r"^[A-Z0-9][A-Z0-9 \-:'&]{3,}$")
_EVENT_HEADING = re.compile(r"^\s*Event\b", re.IGNORECASE)
_SENTENCE_END = re.compile(r"(?<=[.!?])\s+")


def _is_boundary(kind: SourceKind, lines: list[str], i: int) -> bool:
    line = lines[i]
    nxt_blank = i + 1 >= len(lines) or not lines[i + 1].strip()
    if kind is SourceKind.DRILL_MANUAL:
        if _NUMBERED_HEADING.match(line):
            return True
        return bool(_ALL_CAPS_TITLE.match(line.strip())) and nxt_blank
    if kind is SourceKind.PHYSIOLOGY_HANDBOOK:
        return bool(_MARKDOWN_HEADING.match(line))
    if kind is SourceKind.COMPETITION_RESULTS:
        if _EVENT_HEADING.match(line) or _MARKDOWN_HEADING.match(line):
            return True
        return bool(_ALL_CAPS_TITLE.match(line.strip())) and nxt_blank
    return False


def split_semantic_units(text: str, kind: SourceKind) -> list[str]:
    """Split prose into semantic units at kind-specific boundary markers.

    Handbook text additionally splits on runs of two or more blank lines.
    Returns the units in document order; their concatenation covers the
    whole source text minus boundary whitespace.
    """
    lines = text.split("\n")
    units: list[str] = []
    current: list[str] = []
    blank_run = 0

    def flush() -> None:
        unit = "\n".join(current).strip("\n")
        if unit.strip():
            units.append(unit)
        current.clear()

    for i, line in enumerate(lines):
        if not line.strip():
            blank_run += 1
            current.append(line)
            continue
        gap_boundary = (
            kind is SourceKind.PHYSIOLOGY_HANDBOOK and blank_run >= 2 and current
        )
        if current and (_is_boundary(kind, lines, i) or gap_boundary):
            flush()
        blank_run = 0
        current.append(line)
    flush()
    return units


def _split_to_budget(text: str, max_tokens: int) -> list[str]:
    """Split an oversized block at sentence boundaries, words as last resort."""
    if approx_token_count(text) <= max_tokens:
        return [text]
    pieces: list[str] = []
    current = ""
    for sentence in _SENTENCE_END.split(text):
        if not sentence:
            continue
        candidate = f"{current} {sentence}".strip() if current else sentence
        if approx_token_count(candidate) <= max_tokens:
            current = candidate
            continue
        if current:
            pieces.append(current)
            current = ""
        while approx_token_count(sentence) > max_tokens:
            words = sentence.split(" ")
            head: list[str] = []
            for w in words:
                trial = " ".join(head + [w])
                if head and approx_token_count(trial) > max_tokens:
                    break
                head.append(w)
            pieces.append(" ".join(head))
            sentence = " ".join(words[len(head):]).strip()
            if not sentence:
                break
        if sentence:
            current = sentence
    if current:
        pieces.append(current)
    return pieces


def chunk_document(text: str, kind: SourceKind, metadata: ChunkMetadata) -> list[Chunk]:
    """Segment a prose document into budget-conformant chunks.

    Every chunk lands inside the kind's token budget except a final
    remainder, which may fall below the minimum and is flagged. A document
    shorter than half the minimum budget becomes a single flagged chunk.
    """
    if kind not in PROSE_KINDS:
        raise IngestConfigError(f"{kind.value} is not a prose kind; use the tabular serializers")
    if not text.strip():
        raise EmptyDocumentError(f"{metadata.document_name}: empty after whitespace")

    min_t, max_t = PROSE_BUDGETS[kind]
    total = approx_token_count(text.strip())
    if total < min_t / 2:
        return [_make_chunk(metadata.document_name, 0, text.strip(), metadata, remainder=True)]

    units = split_semantic_units(text, kind)
    if len(units) <= 1 and total > max_t:
        logger.warning(
            "%s: no %s boundary markers found; falling back to fixed-budget splitting",
            metadata.document_name, kind.value,
        )

    chunks: list[Chunk] = []
    current: list[str] = []

    def current_tokens() -> int:
        return approx_token_count("\n\n".join(current))

    def emit(remainder: bool = False) -> None:
        if current:
            chunks.append(
                _make_chunk(metadata.document_name, len(chunks), "\n\n".join(current),
                            metadata, remainder=remainder)
            )
            current.clear()

    pending = [piece for unit in units for piece in _split_to_budget(unit, max_t)]
    for piece in pending:
        if not current:
            current.append(piece)
            continue
        joined = approx_token_count("\n\n".join(current + [piece]))
        if joined <= max_t:
            current.append(piece)
        elif current_tokens() >= min_t:
            emit()
            current.append(piece)
        else:
            # Below minimum but the piece will not fit whole: fill from its
            # sentences up to the ceiling, then continue with the rest.
            remainder_text = piece
            while remainder_text:
                budget_left = max_t - current_tokens()
                fill = _split_to_budget(remainder_text, max(budget_left, 1))
                head = fill[0]
                if approx_token_count("\n\n".join(current + [head])) > max_t:
                    break
                current.append(head)
                remainder_text = " ".join(fill[1:]).strip() if len(fill) > 1 else ""
            emit()
            if remainder_text:
                current.append(remainder_text)
    if current:
        emit(remainder=current_tokens() < min_t)
    return chunks


# --- tabular narration -------------------------------------------------------

@dataclass(frozen=True)
class TableColumn:
    name: str
    phrase: str
    unit: str = ""
    numeric: bool = True
    elaborations: tuple[str, ...] = ()


@dataclass(frozen=True)
class TableSchema:
    name: str
    columns: tuple[TableColumn, ...]
    id_column: str = ""
    stroke_column: str = ""
    phase_column: str = ""
    performance_column: str = ""

    def column(self, name: str) -> Optional[TableColumn]:
        for col in self.columns:
            if col.name == name:
                return col
        return None

    def numeric_columns(self) -> list[TableColumn]:
        return [c for c in self.columns if c.numeric]


# Registry of known columns; phrases and units are digit-free so that every
# numeral in a narrated paragraph traces back to a source cell.
_ELAB = {
    "fatigue_score": (
        "The fatigue reading is weighed against squad-level thresholds whenever the next "
        "session is planned.",
        "Sustained elevation of this marker is treated as a cue to re-examine the load "
        "progression across the week.",
    ),
    "recovery_time_hr": (
        "This recovery window bounds how soon a quality session may be scheduled.",
        "Coaches treat the recovery requirement as a hard constraint rather than a guideline.",
    ),
    "adaptation_pct": (
        "The adaptation response indicates how well recent stimulus is being absorbed.",
        "Read together with fatigue, this value separates productive overreaching from "
        "overtraining risk.",
    ),
    "training_load_au": (
        "Accumulated load is tracked in arbitrary units against a safe accumulation ceiling.",
        "Load spikes without matching recovery are flagged during weekly review.",
    ),
    "vo2max": (
        "Maximal oxygen uptake frames which intensity zones the athlete can productively train.",
        "This aerobic ceiling is re-tested at the start of each macrocycle.",
    ),
    "hrv": (
        "Heart rate variability is monitored for suppression against the athlete's baseline.",
        "Autonomic readiness inferred from this signal gates high-intensity prescriptions.",
    ),
    "hrv_baseline": (
        "The baseline is the reference point for detecting autonomic suppression.",
    ),
    "stroke_prob": (
        "The classifier confidence indicates how closely observed kinematics match the "
        "nominal stroke pattern.",
        "Low confidence is read as stroke deformation rather than sensor noise.",
    ),
    "hydration_level": (
        "Hydration status is logged alongside load to contextualize fatigue markers.",
    ),
    "biomechanical_efficiency": (
        "The efficiency index summarizes propulsion per unit of effort.",
    ),
    "split_time_s": (
        "Split times anchor the performance side of load-performance comparisons.",
    ),
}

_KNOWN_COLUMNS: dict[str, TableColumn] = {
    "athlete_id": TableColumn("athlete_id", "athlete identifier", numeric=False),
    "event": TableColumn("event", "event", numeric=False),
    "swimmer": TableColumn("swimmer", "swimmer", numeric=False),
    "stroke_type": TableColumn("stroke_type", "stroke", numeric=False),
    "training_phase": TableColumn("training_phase", "training phase", numeric=False),
    "fatigue_score": TableColumn(
        "fatigue_score", "fatigue score", "on the ten-point scale",
        elaborations=_ELAB["fatigue_score"]),
    "recovery_time_hr": TableColumn(
        "recovery_time_hr", "required recovery window", "hours",
        elaborations=_ELAB["recovery_time_hr"]),
    "adaptation_pct": TableColumn(
        "adaptation_pct", "adaptation response", "percent",
        elaborations=_ELAB["adaptation_pct"]),
    "training_load_au": TableColumn(
        "training_load_au", "accumulated training load", "arbitrary units",
        elaborations=_ELAB["training_load_au"]),
    "vo2max": TableColumn(
        "vo2max", "maximal oxygen uptake (VO2max)", "ml/kg/min",
        elaborations=_ELAB["vo2max"]),
    "hrv": TableColumn(
        "hrv", "heart rate variability", "ms", elaborations=_ELAB["hrv"]),
    "hrv_baseline": TableColumn(
        "hrv_baseline", "heart rate variability baseline", "ms",
        elaborations=_ELAB["hrv_baseline"]),
    "stroke_prob": TableColumn(
        "stroke_prob", "stroke classification confidence", "",
        elaborations=_ELAB["stroke_prob"]),
    "hydration_level": TableColumn(
        "hydration_level", "hydration level", "percent",
        elaborations=_ELAB["hydration_level"]),
    "biomechanical_efficiency": TableColumn(
        "biomechanical_efficiency", "biomechanical efficiency index", "",
        elaborations=_ELAB["biomechanical_efficiency"]),
    "split_time_s": TableColumn(
        "split_time_s", "split time", "seconds", elaborations=_ELAB["split_time_s"]),
    "rank": TableColumn("rank", "finishing rank", ""),
}

_IMU_COLUMN = re.compile(r"^imu(\d+)_(acc|gyro)_([xyz])$")


def column_for(name: str) -> TableColumn:
    known = _KNOWN_COLUMNS.get(name)
    if known is not None:
        return known
    m = _IMU_COLUMN.match(name)
    if m:
        sensor, kind, axis = m.groups()
        word = {"1": "one", "2": "two", "3": "three", "4": "four", "5": "five",
                "6": "six", "7": "seven", "8": "eight", "9": "nine", "10": "ten"}[sensor]
        signal = "acceleration" if kind == "acc" else "angular velocity"
        unit = "metres per second squared" if kind == "acc" else "degrees per second"
        return TableColumn(
            name, f"sensor {word} {signal} along the {axis} axis", unit,
            elaborations=(
                f"Deviation of this {signal} channel from its baseline profile is what "
                "flags a segment for technical attention.",
            ),
        )
    looks_numeric = True
    return TableColumn(name, name.replace("_", " "), "", numeric=looks_numeric)


def schema_from_header(table_name: str, header: Sequence[str],
                       sample_row: Optional[dict[str, str]] = None) -> TableSchema:
    """Build a TableSchema for a delimited file from its header row."""
    columns = []
    for name in header:
        col = column_for(name)
        if col.name not in _KNOWN_COLUMNS and not _IMU_COLUMN.match(col.name) and sample_row:
            value = (sample_row.get(name) or "").strip()
            if value and not _parses_float(value):
                col = replace(col, numeric=False)
        columns.append(col)
    names = set(header)
    performance = next((c for c in ("split_time_s", "vo2max", "biomechanical_efficiency")
                        if c in names), "")
    return TableSchema(
        name=table_name,
        columns=tuple(columns),
        id_column="athlete_id" if "athlete_id" in names else (header[0] if header else ""),
        stroke_column="stroke_type" if "stroke_type" in names else "",
        phase_column="training_phase" if "training_phase" in names else "",
        performance_column=performance,
    )


def _parses_float(value: str) -> bool:
    try:
        float(value)
        return True
    except ValueError:
        return False


def _fit_budget(tiers: list[str], budget: tuple[int, int]) -> tuple[str, bool]:
    """Pick the first verbosity tier inside the budget.

    Falls back to the longest tier still under the ceiling (flagged as a
    remainder when below the minimum) or, failing even that, the tersest
    tier available, flagged as a remainder since it sits outside the
    budget no matter what.
    """
    min_t, max_t = budget
    for text in tiers:
        if min_t <= approx_token_count(text) <= max_t:
            return text, False
    under = [t for t in tiers if approx_token_count(t) <= max_t]
    if under:
        best = max(under, key=approx_token_count)
        return best, approx_token_count(best) < min_t
    logger.warning("narrated paragraph exceeds its budget ceiling at every tier")
    return min(tiers, key=approx_token_count), True


def serialize_record(row: dict[str, str], schema: TableSchema, metadata: ChunkMetadata,
                     row_index: int) -> Optional[Chunk]:
    """Narrate one table row as a value-preserving paragraph.

    Every non-null cell is named with its value and unit, verbatim; template
    prose contributes no numerals of its own. Returns None for all-null rows.
    """
    populated = [(schema.column(k) or column_for(k), v.strip())
                 for k, v in row.items() if k and v is not None and v.strip()]
    if not populated:
        logger.info("%s row %d: all cells null, skipped", schema.name, row_index)
        return None

    ident = ""
    if schema.id_column:
        ident = (row.get(schema.id_column) or "").strip()
    subject = f"Record {ident}" if ident else f"Row entry in {schema.name}"

    descriptive = [(c, v) for c, v in populated if not c.numeric and c.name != schema.id_column]
    numeric = [(c, v) for c, v in populated if c.numeric]

    intro = subject
    if descriptive:
        intro += " (" + ", ".join(f"{c.phrase} {v}" for c, v in descriptive) + ")"

    terse_facts = ", ".join(
        f"{c.phrase} {v}" + (f" {c.unit}" if c.unit else "") for c, v in numeric
    )
    tier0 = f"{intro}: {terse_facts}." if numeric else f"{intro}."

    sentences = [f"{intro}."]
    for c, v in numeric:
        unit = f" {c.unit}" if c.unit else ""
        sentences.append(f"The recorded {c.phrase} is {v}{unit}.")
    tier1 = " ".join(sentences)

    elab1 = list(sentences)
    elab2 = list(sentences)
    for c, _ in numeric:
        if c.elaborations:
            elab1.append(c.elaborations[0])
            elab2.append(c.elaborations[0])
        if len(c.elaborations) > 1:
            elab2.append(c.elaborations[1])
    tier2 = " ".join(elab1)
    tier3 = " ".join(elab2)

    text, remainder = _fit_budget([tier0, tier1, tier2, tier3], RECORD_BUDGET)
    return _make_chunk(metadata.document_name, row_index, text, metadata,
                       remainder=remainder, tag="r")


def compute_group_stats(values: Sequence[float]) -> dict[str, Optional[float]]:
    """Two-pass mean/std/min/max; std is the sample deviation, None when n=1."""
    n = len(values)
    if n == 0:
        raise ValueError("cannot summarize an empty group")
    mean = sum(values) / n
    std: Optional[float] = None
    if n > 1:
        std = math.sqrt(sum((v - mean) ** 2 for v in values) / (n - 1))
    return {"n": float(n), "mean": mean, "std": std, "min": min(values), "max": max(values)}


def _fmt(value: float) -> str:
    return format(value, ".10g")


def serialize_aggregate(rows: Sequence[dict[str, str]], stratum_key: str, stratum_value: str,
                        schema: TableSchema, metadata: ChunkMetadata,
                        ordinal: int = 0) -> Chunk:
    """Narrate a row subgroup as an analytical statistics paragraph.

    States group size and the mean, standard deviation, minimum, and maximum
    of every numeric column. A single-row group reports its deviation as
    "undefined (n=1)".
    """
    if not rows:
        raise ValueError(f"empty {stratum_key} group for {stratum_value!r}")

    per_column: list[tuple[TableColumn, dict[str, Optional[float]]]] = []
    for col in schema.numeric_columns():
        values = [float(r[col.name]) for r in rows
                  if (r.get(col.name) or "").strip() and _parses_float(r[col.name])]
        if values:
            per_column.append((col, compute_group_stats(values)))

    n = len(rows)
    intro = (
        f"Aggregate summary of {n} rows from {schema.name} where {stratum_key} "
        f"is {stratum_value}."
    )
    stat_sentences = []
    analytic_sentences = []
    for col, stats in per_column:
        unit = f" {col.unit}" if col.unit else ""
        std_text = "undefined (n=1)" if stats["std"] is None else _fmt(stats["std"])
        stat_sentences.append(
            f"For {col.phrase}, the mean is {_fmt(stats['mean'])}{unit} with a standard "
            f"deviation of {std_text}, a minimum of {_fmt(stats['min'])}, and a maximum "
            f"of {_fmt(stats['max'])}."
        )
        if col.elaborations:
            analytic_sentences.append(col.elaborations[0])

    closing = (
        f"These statistics describe the {stratum_value} subgroup as a whole and are "
        "intended as grounding context for comparative reasoning rather than for any "
        "individual athlete."
    )
    tier0 = " ".join([intro] + stat_sentences)
    tier1 = " ".join([intro] + stat_sentences + [closing])
    tier2 = " ".join([intro] + stat_sentences + analytic_sentences + [closing])

    text, remainder = _fit_budget([tier0, tier1, tier2], AGGREGATE_BUDGET)
    safe = re.sub(r"[^A-Za-z0-9]+", "-", f"{stratum_key}-{stratum_value}").strip("-")
    chunk = _make_chunk(metadata.document_name, ordinal, text, metadata,
                        remainder=remainder, tag="g")
    return replace(chunk, chunk_id=f"{metadata.document_name}#g-{safe}")
