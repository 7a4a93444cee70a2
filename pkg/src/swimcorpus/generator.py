"""Draft triplet synthesis: anchors × personas × query types, grounded.

Each anchor is expanded along a deterministic plan over the persona and
query-type matrix. Every draft's answer is generated against a retrieved
grounding window, never from open-ended completion, and the complexity
label is always assigned algorithmically after the fact.
"""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .chunking import Chunk
from .jsonl import append_corpus, corpus_ids, read_json_optional, repair_jsonl_tail, \
    write_json_atomic
from .models import (
    AnchorType,
    ComplexityLevel,
    CriticVerdict,
    DataCategory,
    FinalStatus,
    GoldenTriplet,
    Persona,
    PerformanceAnchor,
    PrescriptionAnnotation,
    QueryType,
    ThresholdConfig,
    assign_complexity,
    display_label,
)
from .providers import (
    CompletionProvider,
    CompletionRequest,
    DEFAULT_TEMPERATURES,
    ProviderError,
    ProviderRole,
    REQUEST_KEY_MARKER,
)
from .vecstore import EmbeddingProvider, VectorIndex, retrieve, route_category

logger = logging.getLogger(__name__)

DRAFTS_FILENAME = "golden_triplets.jsonl"
CHECKPOINT_FILENAME = "generator_checkpoint.json"

PERSONA_ORDER = [
    Persona.ELITE_COACH,
    Persona.NOVICE_SWIMMER,
    Persona.BIOMETRIC_ANALYST,
    Persona.SPORTS_SCIENTIST,
    Persona.PHYSIOTHERAPIST,
]
QUERY_TYPE_ORDER = [QueryType.SIMPLE, QueryType.REASONING, QueryType.MULTIMODAL]

# Query-type-major combination order keeps persona counts balanced for any
# plan length that is a multiple of the persona count.
BASE_COMBINATIONS: list[tuple[QueryType, Persona]] = [
    (qt, persona) for qt in QUERY_TYPE_ORDER for persona in PERSONA_ORDER
]


@dataclass(frozen=True)
class QueryPlan:
    anchor_id: str
    persona: Persona
    query_type: QueryType
    repeat_index: int = 0

    def __post_init__(self) -> None:
        if self.repeat_index < 0:
            raise ValueError("repeat_index must be >= 0")

    @property
    def triplet_id(self) -> str:
        key = (f"{self.anchor_id}|{self.persona.value}|{self.query_type.value}"
               f"|{self.repeat_index}")
        return "tri-" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:12]


@dataclass(frozen=True)
class GeneratorConfig:
    triplets_per_anchor: int = 10

    def __post_init__(self) -> None:
        if self.triplets_per_anchor < 1:
            raise ValueError("triplets_per_anchor must be >= 1")


def plan_queries(anchor: PerformanceAnchor,
                 config: GeneratorConfig = GeneratorConfig()) -> list[QueryPlan]:
    """Deterministic per-anchor plan over the persona × query-type matrix.

    The first 15 plans cover each combination once (repeat_index 0); any
    further plans cycle the matrix again with an incremented repeat_index.
    """
    plans: list[QueryPlan] = []
    target = config.triplets_per_anchor
    for i in range(target):
        qt, persona = BASE_COMBINATIONS[i % len(BASE_COMBINATIONS)]
        plans.append(QueryPlan(
            anchor_id=anchor.anchor_id,
            persona=persona,
            query_type=qt,
            repeat_index=i // len(BASE_COMBINATIONS),
        ))
    return plans


GENERATOR_SYSTEM_PROMPT = (
    "You write training questions and answers for competitive swimming. Answer "
    "strictly from the supplied context; never introduce values, drill names, or "
    "protocols that the context does not contain. Respond with exactly one JSON "
    "object holding query, expected_output, and annotation."
)

_QUERY_TYPE_INSTRUCTIONS = {
    QueryType.SIMPLE: "Ask one direct factual question answerable from a single source.",
    QueryType.REASONING: (
        "Ask a question that requires chaining at least two facts from the context."
    ),
    QueryType.MULTIMODAL: (
        "Ask a question that fuses body-worn sensor kinematics with physiological state."
    ),
}


def retrieval_query_text(anchor: PerformanceAnchor, query_type: QueryType) -> str:
    parts = [
        display_label(anchor.anchor_type),
        " ".join(anchor.anchor_variables),
        anchor.stroke_type.value,
        anchor.training_phase.value,
        query_type.value,
    ]
    return " ".join(p for p in parts if p and p != "General")


def resolve_data_category(metadata_filter: dict[str, str],
                          chunks: Sequence[Chunk]) -> DataCategory:
    if "data_category" in metadata_filter:
        return DataCategory(metadata_filter["data_category"])
    if metadata_filter.get("source_type") == "Unstructured":
        return DataCategory.UNSTRUCTURED
    counts: dict[str, int] = {}
    for chunk in chunks:
        try:
            category = DataCategory(chunk.metadata.data_category).value
        except ValueError:
            continue
        counts[category] = counts.get(category, 0) + 1
    if not counts:
        return DataCategory.UNSTRUCTURED
    winner = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[0][0]
    return DataCategory(winner)


def assemble_context(chunks: Sequence[Chunk]) -> str:
    blocks = [f"— source: {c.metadata.document_name}\n{c.text}" for c in chunks]
    return "\n\n".join(blocks)


def synthesize_triplet(plan: QueryPlan, anchor: PerformanceAnchor, index: VectorIndex,
                       embedder: EmbeddingProvider, provider: CompletionProvider,
                       thresholds: ThresholdConfig = ThresholdConfig(),
                       ) -> Optional[GoldenTriplet]:
    """Produce one grounded draft, or None when it must be skipped.

    The grounding window comes from category-routed retrieval; an empty
    window means the draft is never generated. The provider supplies query,
    answer, and prescription annotation; the complexity label is computed
    here and any complexity the provider asserts is discarded.
    """
    metadata_filter = route_category(plan.query_type, anchor.anchor_variables)
    hits = retrieve(index, embedder, retrieval_query_text(anchor, plan.query_type),
                    thresholds.retrieval_k, metadata_filter)
    if not hits:
        logger.info("%s: no grounding context (filter=%s); skipped",
                    plan.triplet_id, metadata_filter)
        return None
    chunks = [c for c, _ in hits]
    context = assemble_context(chunks)

    request = CompletionRequest(
        role=ProviderRole.GENERATOR,
        system_prompt=GENERATOR_SYSTEM_PROMPT,
        user_prompt=(
            f"{REQUEST_KEY_MARKER} {plan.triplet_id}\n"
            f"persona: {display_label(plan.persona)}\n"
            f"query_type: {plan.query_type.value}\n"
            f"instruction: {_QUERY_TYPE_INSTRUCTIONS[plan.query_type]}\n"
            f"anchor_type: {anchor.anchor_type.value}\n"
            f"anchor_variables: {' '.join(anchor.anchor_variables)}\n"
            f"stroke_type: {anchor.stroke_type.value}\n"
            f"training_phase: {anchor.training_phase.value}\n"
            f"evidence: {anchor.evidence_summary}\n"
            f"Context:\n{context}"
        ),
        response_schema="TripletDraft",
        temperature=DEFAULT_TEMPERATURES[ProviderRole.GENERATOR],
    )
    response = provider.complete(request)
    if "complexity_level" in response:
        logger.debug("%s: provider-asserted complexity ignored", plan.triplet_id)
    annotation = PrescriptionAnnotation.from_dict(response["annotation"])

    return GoldenTriplet(
        anchor_id=anchor.anchor_id,
        triplet_id=plan.triplet_id,
        query=response["query"],
        query_type=plan.query_type,
        persona=plan.persona,
        complexity_level=assign_complexity(plan.query_type, anchor.anchor_variables),
        context=context,
        expected_output=response["expected_output"],
        anchor_type=anchor.anchor_type,
        anchor_variables=anchor.anchor_variables,
        stroke_type=anchor.stroke_type,
        training_phase=anchor.training_phase,
        data_category=resolve_data_category(metadata_filter, chunks),
        source_documents=tuple(sorted({c.metadata.document_name for c in chunks})),
        critic_verdict=CriticVerdict.pending(),
        final_status=FinalStatus.DRAFT,
        annotation=annotation,
    )


@dataclass
class GeneratorSummary:
    anchors_total: int = 0
    anchors_completed: int = 0
    drafts_total: int = 0
    plans_skipped: dict[str, str] = field(default_factory=dict)
    by_persona: dict[str, int] = field(default_factory=dict)
    by_query_type: dict[str, int] = field(default_factory=dict)
    by_stroke: dict[str, int] = field(default_factory=dict)
    by_anchor_type: dict[str, int] = field(default_factory=dict)
    drafts_path: str = ""
    resumed: bool = False

    def drafts_per_anchor(self) -> float:
        if not self.anchors_completed:
            return 0.0
        return round(self.drafts_total / self.anchors_completed, 1)

    def to_dict(self) -> dict:
        data = dict(self.__dict__)
        data["drafts_per_anchor"] = self.drafts_per_anchor()
        return data


def run_generator(anchors: Sequence[PerformanceAnchor], out_dir: str | os.PathLike,
                  index: VectorIndex, embedder: EmbeddingProvider,
                  provider: CompletionProvider,
                  thresholds: ThresholdConfig = ThresholdConfig(),
                  config: GeneratorConfig = GeneratorConfig(),
                  on_anchor: Optional[Callable[[str], None]] = None) -> GeneratorSummary:
    """Expand every anchor into drafts with per-anchor checkpointing.

    Drafts append to the corpus file as they are produced; the checkpoint
    lists completed anchors. Resume skips completed anchors entirely and,
    within a partially written anchor, skips any triplet id already present
    in the draft file, so a killed run never duplicates a record.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    drafts_path = out / DRAFTS_FILENAME
    checkpoint_path = out / CHECKPOINT_FILENAME

    repair_jsonl_tail(str(drafts_path))
    checkpoint = read_json_optional(str(checkpoint_path)) or {}
    completed: list[str] = list(checkpoint.get("completed_anchor_ids", []))
    existing = corpus_ids(str(drafts_path)) if drafts_path.exists() else set()

    summary = GeneratorSummary(anchors_total=len(anchors), drafts_path=str(drafts_path),
                               resumed=bool(completed or existing))

    for anchor in anchors:
        if anchor.anchor_id not in completed:
            for plan in plan_queries(anchor, config):
                if plan.triplet_id in existing:
                    continue
                try:
                    draft = synthesize_triplet(plan, anchor, index, embedder, provider,
                                               thresholds)
                except ProviderError as exc:
                    logger.warning("%s: synthesis failed (%s)", plan.triplet_id, exc)
                    summary.plans_skipped[plan.triplet_id] = str(exc)
                    continue
                if draft is None:
                    summary.plans_skipped[plan.triplet_id] = "no grounding context"
                    continue
                append_corpus(str(drafts_path), draft)
                existing.add(draft.triplet_id)
            completed.append(anchor.anchor_id)
            write_json_atomic(str(checkpoint_path),
                              {"completed_anchor_ids": completed})
        if on_anchor is not None:
            on_anchor(anchor.anchor_id)

    summary.anchors_completed = len(completed)
    from .jsonl import read_corpus

    for record in read_corpus(str(drafts_path), tolerant=True):
        summary.drafts_total += 1
        for attr, bucket in (
            ("persona", summary.by_persona),
            ("query_type", summary.by_query_type),
            ("stroke_type", summary.by_stroke),
            ("anchor_type", summary.by_anchor_type),
        ):
            key = getattr(record, attr).value
            bucket[key] = bucket.get(key, 0) + 1
    return summary
