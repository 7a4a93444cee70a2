"""Expert review gate over the validated and escalated corpus files.

Serves the review queue over HTTP, applies Accept/Revise verdicts under a
single-writer lock, and keeps an append-only audit log that is the source
of truth: on startup any logged verdict missing from the corpus files is
replayed, so a crash between the log append and the corpus rewrite never
loses or duplicates a transition.

This module deliberately avoids postponed annotation evaluation: the route
signatures reference models local to create_app, and the HTTP layer needs
real class objects there, not strings, to classify the verdict body.
"""

import logging
import os
import random
import tempfile
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Optional, Union

from .critic import grounding_detail
from .jsonl import (
    append_jsonl,
    dump_json_line,
    iter_jsonl,
    repair_jsonl_tail,
)
from .models import FinalStatus, GoldenTriplet

logger = logging.getLogger(__name__)

REVIEW_SCHEMA_VERSION = 1
REVIEW_LOG_FILENAME = "review_log.jsonl"
DEFAULT_PAGE_SIZE = 20

RUBRIC_AXES = ("physiological_accuracy", "coaching_relevance", "source_fidelity")
DECISIONS = ("Accepted", "Revised")

_DECISION_STATUS = {
    "Accepted": FinalStatus.HITL_ACCEPTED,
    "Revised": FinalStatus.HITL_REVISED,
}


class ReviewNotFoundError(KeyError):
    """The triplet_id is not part of the review queue."""


class ReviewConflictError(Exception):
    """A verdict already exists for this triplet; the first one wins."""

    def __init__(self, triplet_id: str, winning_entry: dict[str, Any]):
        super().__init__(f"verdict already recorded for {triplet_id}")
        self.triplet_id = triplet_id
        self.winning_entry = winning_entry


class ReviewValidationError(ValueError):
    """The verdict payload violates the rubric or decision contract."""


def validate_rubric(rubric: Any) -> dict[str, int]:
    if not isinstance(rubric, dict):
        raise ReviewValidationError("rubric must be an object with three scores")
    unknown = set(rubric) - set(RUBRIC_AXES)
    if unknown:
        raise ReviewValidationError(f"unknown rubric axes: {sorted(unknown)}")
    cleaned: dict[str, int] = {}
    for axis in RUBRIC_AXES:
        if axis not in rubric:
            raise ReviewValidationError(f"rubric missing axis {axis!r}")
        value = rubric[axis]
        if isinstance(value, bool) or not isinstance(value, int):
            raise ReviewValidationError(f"rubric axis {axis!r} must be an integer")
        if not 1 <= value <= 5:
            raise ReviewValidationError(f"rubric axis {axis!r} must be in 1..5")
        cleaned[axis] = value
    return cleaned


def _rewrite_corpus_atomic(path: Path, records: list[GoldenTriplet]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            for record in records:
                fh.write(dump_json_line(record.to_dict()) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class ReviewProgress:
    queue_total: int
    reviewed: int
    remaining: int
    accepted: int
    revised: int

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


class ReviewStore:
    """Queue state and verdict application over the two corpus files.

    The queue is every HITLPending record plus a seeded sample of the
    AutoAccepted ones. Sampling runs over the union of currently accepted
    ids and ids the audit log shows were accepted before review moved
    them, so the selection is stable across restarts and verdicts.
    """

    def __init__(self,
                 validated_path: Union[str, Path],
                 hitl_path: Union[str, Path],
                 log_path: Optional[Union[str, Path]] = None,
                 sample_rate: float = 0.05,
                 sample_seed: int = 2024,
                 grounding_rel_tol: float = 0.005,
                 clock: Optional[Callable[[], str]] = None):
        if not 0.0 <= sample_rate <= 1.0:
            raise ValueError("sample_rate must be within [0, 1]")
        self.validated_path = Path(validated_path)
        self.hitl_path = Path(hitl_path)
        self.log_path = (Path(log_path) if log_path is not None
                         else self.hitl_path.parent / REVIEW_LOG_FILENAME)
        self.sample_rate = sample_rate
        self.sample_seed = sample_seed
        self.grounding_rel_tol = grounding_rel_tol
        self._clock = clock or (lambda: datetime.now(timezone.utc)
                                .isoformat(timespec="seconds"))
        self._lock = threading.Lock()
        self._records: dict[str, GoldenTriplet] = {}
        self._validated_order: list[str] = []
        self._hitl_order: list[str] = []
        self._log_entries: list[dict[str, Any]] = []
        self._verdict_by_id: dict[str, dict[str, Any]] = {}
        self._sampled_ids: list[str] = []
        self._load()

    # --- loading -------------------------------------------------------------

    def _read_file(self, path: Path, order: list[str]) -> None:
        if not path.exists():
            return
        repair_jsonl_tail(path)
        for line_no, obj in iter_jsonl(path, tolerant=True):
            try:
                record = GoldenTriplet.from_dict(obj)
            except (KeyError, ValueError, TypeError) as exc:
                logger.warning("%s:%d: skipping unreadable record: %s",
                               path, line_no, exc)
                continue
            if record.triplet_id in self._records:
                logger.warning("duplicate triplet_id %s; keeping first",
                               record.triplet_id)
                continue
            self._records[record.triplet_id] = record
            order.append(record.triplet_id)

    def _load(self) -> None:
        self._read_file(self.validated_path, self._validated_order)
        self._read_file(self.hitl_path, self._hitl_order)
        if self.log_path.exists():
            repair_jsonl_tail(self.log_path)
            for _, entry in iter_jsonl(self.log_path, tolerant=True):
                self._log_entries.append(entry)
        self._compute_sample()
        dirty = self._reconcile_log()
        if dirty:
            logger.warning("replayed %d audit entries missing from the corpus",
                           dirty)
            self._persist()

    def _compute_sample(self) -> None:
        # Union of accepted ids now and accepted ids already moved by review,
        # in sorted order, so the draw never depends on file layout or on how
        # many verdicts have landed.
        candidates = {
            tid for tid in self._validated_order
            if self._records[tid].final_status is FinalStatus.AUTO_ACCEPTED
        }
        for entry in self._log_entries:
            if entry.get("previous_status") == FinalStatus.AUTO_ACCEPTED.value:
                candidates.add(str(entry.get("triplet_id")))
        ordered = sorted(candidates)
        count = int(round(len(ordered) * self.sample_rate))
        rng = random.Random(self.sample_seed)
        self._sampled_ids = rng.sample(ordered, count) if count else []

    def _reconcile_log(self) -> int:
        replayed = 0
        for entry in self._log_entries:
            tid = str(entry.get("triplet_id", ""))
            if tid in self._verdict_by_id:
                continue  # duplicate entry for one id: the first wins
            self._verdict_by_id[tid] = entry
            record = self._records.get(tid)
            if record is None:
                logger.warning("audit entry for unknown triplet %s", tid)
                continue
            if record.final_status in (FinalStatus.HITL_ACCEPTED,
                                       FinalStatus.HITL_REVISED):
                continue  # already applied
            self._apply_to_memory(record, entry)
            replayed += 1
        return replayed

    def _apply_to_memory(self, record: GoldenTriplet,
                         entry: dict[str, Any]) -> GoldenTriplet:
        decision = str(entry.get("decision"))
        new_status = _DECISION_STATUS[decision]
        expected = record.expected_output
        if decision == "Revised":
            expected = str(entry.get("revised_output") or "")
        updated = replace(record, final_status=new_status,
                          expected_output=expected)
        tid = record.triplet_id
        self._records[tid] = updated
        if tid in self._validated_order:
            self._validated_order.remove(tid)
            self._hitl_order.append(tid)
        return updated

    def _persist(self) -> None:
        _rewrite_corpus_atomic(
            self.validated_path,
            [self._records[tid] for tid in self._validated_order])
        _rewrite_corpus_atomic(
            self.hitl_path,
            [self._records[tid] for tid in self._hitl_order])

    # --- queue views ---------------------------------------------------------

    def pending_ids(self) -> list[str]:
        pending = [tid for tid in self._hitl_order
                   if self._records[tid].final_status is FinalStatus.HITL_PENDING]
        pending.extend(
            tid for tid in self._sampled_ids
            if tid in self._records
            and self._records[tid].final_status is FinalStatus.AUTO_ACCEPTED)
        return pending

    def _summary(self, tid: str) -> dict[str, Any]:
        record = self._records[tid]
        verdict = record.critic_verdict
        return {
            "triplet_id": tid,
            "persona": record.persona.value,
            "query_type": record.query_type.value,
            "stroke_type": record.stroke_type.value,
            "complexity_level": record.complexity_level.value,
            "final_status": record.final_status.value,
            "query": record.query,
            "violation_rules": [v.rule_id.value for v in verdict.violations],
            "iteration_count": verdict.iteration_count,
            "sampled": tid in self._sampled_ids,
        }

    def queue_page(self, page: int = 1,
                   page_size: int = DEFAULT_PAGE_SIZE) -> dict[str, Any]:
        if page < 1:
            raise ReviewValidationError("page must be >= 1")
        if not 1 <= page_size <= 200:
            raise ReviewValidationError("page_size must be in 1..200")
        pending = self.pending_ids()
        total = len(pending)
        start = (page - 1) * page_size
        items = [self._summary(tid) for tid in pending[start:start + page_size]]
        total_pages = (total + page_size - 1) // page_size if total else 0
        return {
            "page": page,
            "page_size": page_size,
            "total_items": total,
            "total_pages": total_pages,
            "items": items,
        }

    def item_detail(self, triplet_id: str) -> dict[str, Any]:
        if triplet_id not in self._records or not self._in_queue_universe(triplet_id):
            raise ReviewNotFoundError(triplet_id)
        record = self._records[triplet_id]
        payload = record.to_dict()
        verdict = record.critic_verdict
        payload["critic_history"] = {
            "passed": verdict.passed,
            "violations": [v.to_dict() for v in verdict.violations],
            "iteration_count": verdict.iteration_count,
            "critic_rejection_reason": verdict.critic_rejection_reason,
        }
        payload["grounding"] = grounding_detail(
            record.expected_output, record.context, self.grounding_rel_tol)
        payload["sampled"] = triplet_id in self._sampled_ids
        return payload

    def _in_queue_universe(self, triplet_id: str) -> bool:
        if triplet_id in self._verdict_by_id:
            return True
        record = self._records.get(triplet_id)
        if record is None:
            return False
        if record.final_status in (FinalStatus.HITL_PENDING,
                                   FinalStatus.HITL_ACCEPTED,
                                   FinalStatus.HITL_REVISED):
            return True
        return triplet_id in self._sampled_ids

    def progress(self) -> ReviewProgress:
        remaining = len(self.pending_ids())
        accepted = sum(1 for e in self._verdict_by_id.values()
                       if e.get("decision") == "Accepted")
        revised = sum(1 for e in self._verdict_by_id.values()
                      if e.get("decision") == "Revised")
        reviewed = accepted + revised
        return ReviewProgress(
            queue_total=remaining + reviewed,
            reviewed=reviewed,
            remaining=remaining,
            accepted=accepted,
            revised=revised,
        )

    # --- verdict application ---------------------------------------------------

    def apply_verdict(self,
                      triplet_id: str,
                      decision: str,
                      rubric: dict[str, Any],
                      revised_output: Optional[str] = None,
                      reviewer_id: str = "anonymous",
                      timestamp: Optional[str] = None) -> dict[str, Any]:
        """Record one verdict: log it, update the record, rewrite the files.

        Raises ReviewNotFoundError for ids outside the queue,
        ReviewConflictError when a verdict already exists (the first wins),
        and ReviewValidationError for contract violations.
        """
        if decision not in DECISIONS:
            raise ReviewValidationError(
                f"decision must be one of {DECISIONS}, got {decision!r}")
        cleaned_rubric = validate_rubric(rubric)
        if decision == "Revised":
            if not isinstance(revised_output, str) or not revised_output.strip():
                raise ReviewValidationError(
                    "Revised verdicts require a non-empty revised_output")
        else:
            revised_output = None

        with self._lock:
            if triplet_id in self._verdict_by_id:
                raise ReviewConflictError(
                    triplet_id, self._verdict_by_id[triplet_id])
            record = self._records.get(triplet_id)
            if record is None or not self._in_queue_universe(triplet_id):
                raise ReviewNotFoundError(triplet_id)

            entry = {
                "schema_version": REVIEW_SCHEMA_VERSION,
                "triplet_id": triplet_id,
                "decision": decision,
                "rubric": cleaned_rubric,
                "revised_output": revised_output,
                "reviewer_id": reviewer_id,
                "timestamp": timestamp or self._clock(),
                "previous_status": record.final_status.value,
                "new_status": _DECISION_STATUS[decision].value,
            }
            append_jsonl(self.log_path, entry, fsync=True)
            self._log_entries.append(entry)
            self._verdict_by_id[triplet_id] = entry
            updated = self._apply_to_memory(record, entry)
            self._persist()

        return {
            "triplet_id": triplet_id,
            "final_status": updated.final_status.value,
            "previous_status": entry["previous_status"],
            "progress": self.progress().to_dict(),
        }


def replay_review_log(validated_path: Union[str, Path],
                      hitl_path: Union[str, Path],
                      log_path: Union[str, Path]) -> dict[str, GoldenTriplet]:
    """Apply a review log to pre-review corpus files, in memory.

    Returns the resulting records keyed by triplet_id; used to check that
    the audit log fully determines the post-review corpus.
    """
    records: dict[str, GoldenTriplet] = {}
    for path in (Path(validated_path), Path(hitl_path)):
        if not path.exists():
            continue
        for _, obj in iter_jsonl(path, tolerant=True):
            record = GoldenTriplet.from_dict(obj)
            records[record.triplet_id] = record
    seen: set[str] = set()
    if Path(log_path).exists():
        for _, entry in iter_jsonl(Path(log_path), tolerant=True):
            tid = str(entry.get("triplet_id", ""))
            if tid in seen or tid not in records:
                continue
            seen.add(tid)
            decision = str(entry.get("decision"))
            status = _DECISION_STATUS[decision]
            expected = records[tid].expected_output
            if decision == "Revised":
                expected = str(entry.get("revised_output") or "")
            records[tid] = replace(records[tid], final_status=status,
                                   expected_output=expected)
    return records


# --- HTTP layer -----------------------------------------------------------------


def create_app(store: ReviewStore, token: Optional[str] = None):
    """Build the review service: queue, item, verdict, and progress routes."""
    from fastapi import Depends, FastAPI, Header, HTTPException
    from fastapi.responses import JSONResponse
    from pydantic import BaseModel, Field

    def require_token(authorization: Optional[str] = Header(default=None)):
        if token and authorization != f"Bearer {token}":
            raise HTTPException(status_code=401,
                                detail="missing or invalid bearer token")

    app = FastAPI(title="corpus review", dependencies=[Depends(require_token)])

    class RubricBody(BaseModel):
        physiological_accuracy: int = Field(ge=1, le=5)
        coaching_relevance: int = Field(ge=1, le=5)
        source_fidelity: int = Field(ge=1, le=5)

    class VerdictBody(BaseModel):
        decision: str
        rubric: RubricBody
        revised_output: Optional[str] = None
        reviewer_id: str = "anonymous"
        timestamp: Optional[str] = None

    def versioned(payload: dict[str, Any], status_code: int = 200) -> JSONResponse:
        payload = {"schema_version": REVIEW_SCHEMA_VERSION, **payload}
        return JSONResponse(status_code=status_code, content=payload)

    @app.get("/review/queue")
    def get_queue(page: int = 1, page_size: int = DEFAULT_PAGE_SIZE):
        try:
            return versioned(store.queue_page(page, page_size))
        except ReviewValidationError as exc:
            return versioned({"detail": str(exc)}, status_code=422)

    @app.get("/review/item/{triplet_id}")
    def get_item(triplet_id: str):
        try:
            return versioned({"item": store.item_detail(triplet_id)})
        except ReviewNotFoundError:
            return versioned({"detail": f"unknown triplet {triplet_id}"},
                             status_code=404)

    @app.post("/review/item/{triplet_id}/verdict")
    def post_verdict(triplet_id: str, body: VerdictBody):
        try:
            result = store.apply_verdict(
                triplet_id=triplet_id,
                decision=body.decision,
                rubric=body.rubric.model_dump()
                if hasattr(body.rubric, "model_dump") else body.rubric.dict(),
                revised_output=body.revised_output,
                reviewer_id=body.reviewer_id,
                timestamp=body.timestamp,
            )
        except ReviewNotFoundError:
            return versioned({"detail": f"unknown triplet {triplet_id}"},
                             status_code=404)
        except ReviewConflictError as exc:
            return versioned({"detail": "verdict already recorded",
                              "winning_verdict": exc.winning_entry},
                             status_code=409)
        except ReviewValidationError as exc:
            return versioned({"detail": str(exc)}, status_code=422)
        return versioned(result)

    @app.get("/review/progress")
    def get_progress():
        return versioned(store.progress().to_dict())

    return app


def serve_review_api(store: ReviewStore,
                     host: str = "127.0.0.1",
                     port: int = 8731,
                     token: Optional[str] = None) -> None:
    import uvicorn

    app = create_app(store, token=token)
    uvicorn.run(app, host=host, port=port, log_level="warning")
