"""Record-level schema validation for corpus files."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Iterable, Optional

from .models import (
    DRAFT_SIDECAR_FIELD,
    TRIPLET_FIELDS,
    AnchorType,
    ComplexityLevel,
    CriticVerdict,
    DataCategory,
    FinalStatus,
    Persona,
    PrescriptionAnnotation,
    QueryType,
    StrokeType,
    TrainingPhase,
    assign_complexity,
)

_ENUM_FIELDS = {
    "query_type": QueryType,
    "persona": Persona,
    "complexity_level": ComplexityLevel,
    "anchor_type": AnchorType,
    "stroke_type": StrokeType,
    "training_phase": TrainingPhase,
    "data_category": DataCategory,
    "final_status": FinalStatus,
}

_TEXT_FIELDS = ("anchor_id", "triplet_id", "query", "context", "expected_output")
_LIST_FIELDS = ("anchor_variables", "source_documents")


@dataclass
class SchemaReport:
    """Everything wrong with one record; empty report means valid."""

    missing_fields: list[str] = field(default_factory=list)
    extra_fields: list[str] = field(default_factory=list)
    ill_typed: dict[str, str] = field(default_factory=dict)
    invariant_violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not (
            self.missing_fields or self.extra_fields or self.ill_typed or self.invariant_violations
        )

    def summary(self) -> str:
        if self.ok:
            return "valid"
        parts = []
        if self.missing_fields:
            parts.append(f"missing: {', '.join(self.missing_fields)}")
        if self.extra_fields:
            parts.append(f"extra: {', '.join(self.extra_fields)}")
        for name, msg in self.ill_typed.items():
            parts.append(f"{name}: {msg}")
        parts.extend(self.invariant_violations)
        return "; ".join(parts)


def validate_triplet(
    record: dict[str, Any],
    allowed_statuses: Optional[Iterable[FinalStatus]] = None,
) -> SchemaReport:
    """Validate one parsed corpus record against the 16-field schema.

    The `annotation` sidecar is legal only on Draft records. When
    allowed_statuses is given, a final_status outside it is reported as an
    invariant violation (used to enforce per-file status purity).
    """
    report = SchemaReport()

    present = set(record)
    declared = set(TRIPLET_FIELDS)
    report.missing_fields = [f for f in TRIPLET_FIELDS if f not in present]

    status: Optional[FinalStatus] = None
    raw_status = record.get("final_status")
    if isinstance(raw_status, str):
        try:
            status = FinalStatus(raw_status)
        except ValueError:
            pass

    allowed_extra = {DRAFT_SIDECAR_FIELD} if status is FinalStatus.DRAFT else set()
    report.extra_fields = sorted(present - declared - allowed_extra)

    for name in _TEXT_FIELDS:
        if name in record and not isinstance(record[name], str):
            report.ill_typed[name] = f"expected string, got {type(record[name]).__name__}"

    for name, enum_cls in _ENUM_FIELDS.items():
        if name not in record:
            continue
        value = record[name]
        if not isinstance(value, str):
            report.ill_typed[name] = f"expected string, got {type(value).__name__}"
            continue
        try:
            enum_cls(value)
        except ValueError:
            report.ill_typed[name] = f"unknown {enum_cls.__name__} value {value!r}"

    for name in _LIST_FIELDS:
        if name not in record:
            continue
        value = record[name]
        if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
            report.ill_typed[name] = "expected list of strings"

    if "critic_verdict" in record:
        verdict = record["critic_verdict"]
        if not isinstance(verdict, dict):
            report.ill_typed["critic_verdict"] = "expected object"
        else:
            try:
                CriticVerdict.from_dict(verdict)
            except (KeyError, ValueError, TypeError) as exc:
                report.ill_typed["critic_verdict"] = str(exc)

    if DRAFT_SIDECAR_FIELD in record and status is FinalStatus.DRAFT:
        try:
            PrescriptionAnnotation.from_dict(record[DRAFT_SIDECAR_FIELD])
        except (KeyError, ValueError, TypeError) as exc:
            report.ill_typed[DRAFT_SIDECAR_FIELD] = str(exc)

    _check_invariants(record, status, allowed_statuses, report)
    return report


def _check_invariants(
    record: dict[str, Any],
    status: Optional[FinalStatus],
    allowed_statuses: Optional[Iterable[FinalStatus]],
    report: SchemaReport,
) -> None:
    variables = record.get("anchor_variables")
    if isinstance(variables, list) and not variables:
        report.invariant_violations.append("anchor_variables must be non-empty")

    # Complexity must equal the deterministic rule of (query_type, |variables|).
    if (
        "query_type" not in report.ill_typed
        and "complexity_level" not in report.ill_typed
        and isinstance(record.get("query_type"), str)
        and isinstance(record.get("complexity_level"), str)
        and isinstance(variables, list)
        and variables
    ):
        try:
            expected = assign_complexity(QueryType(record["query_type"]), variables)
        except ValueError:
            expected = None
        if expected is not None and record["complexity_level"] != expected.value:
            report.invariant_violations.append(
                f"complexity mismatch: {record['complexity_level']} stored but "
                f"{expected.value} required for ({record['query_type']}, "
                f"{len(variables)} variables)"
            )

    if allowed_statuses is not None and status is not None:
        allowed = set(allowed_statuses)
        if status not in allowed:
            names = ", ".join(s.value for s in sorted(allowed, key=lambda s: s.value))
            report.invariant_violations.append(
                f"final_status {status.value} not permitted here (allowed: {names})"
            )


def validate_corpus_records(records: Iterable[dict[str, Any]]) -> dict[int, SchemaReport]:
    """Validate a whole corpus stream; adds duplicate-triplet_id detection.

    Returns {0-based record index: report} for invalid records only.
    """
    failures: dict[int, SchemaReport] = {}
    seen: dict[str, int] = {}
    for idx, record in enumerate(records):
        report = validate_triplet(record)
        tid = record.get("triplet_id")
        if isinstance(tid, str):
            if tid in seen:
                report.invariant_violations.append(
                    f"duplicate triplet_id {tid!r} (first at record {seen[tid]})"
                )
            else:
                seen[tid] = idx
        if not report.ok:
            failures[idx] = report
    return failures
