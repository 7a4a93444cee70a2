"""Shared record builders for the test suite."""

from __future__ import annotations

from typing import Any, Optional

from swimcorpus.models import (
    AnchorType,
    AthleteStateRecord,
    ComplexityLevel,
    CriticVerdict,
    DataCategory,
    FinalStatus,
    GoldenTriplet,
    IntensityZone,
    Persona,
    PrescriptionAnnotation,
    QueryType,
    RuleId,
    RuleViolation,
    StrokeType,
    TrainingPhase,
    VolumeClass,
    assign_complexity,
)


def make_athlete(**overrides: float) -> AthleteStateRecord:
    """A state record that trips no rule under default thresholds."""
    fields: dict[str, float] = {
        "fatigue_score": 4.0,
        "recovery_time_hr": 24.0,
        "adaptation_pct": 5.0,
        "training_load_au": 500.0,
        "vo2max": 55.0,
        "hrv": 80.0,
        "hrv_baseline": 82.0,
        "stroke_prob": 0.9,
        "hydration_level": 0.8,
        "biomechanical_efficiency": 0.75,
    }
    fields.update(overrides)
    return AthleteStateRecord(**fields)


def make_annotation(zone: IntensityZone = IntensityZone.EASY_AEROBIC,
                    **overrides: Any) -> PrescriptionAnnotation:
    return PrescriptionAnnotation.for_zone(zone, **overrides)


def failing_verdict(*rule_ids: RuleId, iteration_count: int = 0) -> CriticVerdict:
    rules = rule_ids or (RuleId.L1,)
    violations = tuple(RuleViolation(rule_id=r, reason=f"{r.value} planted") for r in rules)
    return CriticVerdict(
        passed=False,
        violations=violations,
        critic_rejection_reason="; ".join(v.reason for v in violations),
        iteration_count=iteration_count,
    )


def make_triplet(triplet_id: str = "tri-test-0001",
                 query_type: QueryType = QueryType.SIMPLE,
                 persona: Persona = Persona.ELITE_COACH,
                 anchor_variables: tuple[str, ...] = ("fatigue_score", "imu3_acc_z"),
                 stroke_type: StrokeType = StrokeType.GENERAL,
                 training_phase: TrainingPhase = TrainingPhase.GENERAL,
                 anchor_type: AnchorType = AnchorType.FATIGUE_KINEMATIC,
                 final_status: FinalStatus = FinalStatus.DRAFT,
                 verdict: Optional[CriticVerdict] = None,
                 annotation: Optional[PrescriptionAnnotation] = None,
                 context: str = "Mean fatigue_score is 4.2 across the squad.",
                 expected_output: str = "Hold easy aerobic work this week.",
                 query: str = "What does the squad's fatigue look like?",
                 ) -> GoldenTriplet:
    if annotation is None and final_status is FinalStatus.DRAFT:
        annotation = make_annotation()
    return GoldenTriplet(
        anchor_id="anc-test000001",
        triplet_id=triplet_id,
        query=query,
        query_type=query_type,
        persona=persona,
        complexity_level=assign_complexity(query_type, anchor_variables),
        context=context,
        expected_output=expected_output,
        anchor_type=anchor_type,
        anchor_variables=anchor_variables,
        stroke_type=stroke_type,
        training_phase=training_phase,
        data_category=DataCategory.PHYSIOLOGICAL,
        source_documents=("handbook.md",),
        critic_verdict=verdict or CriticVerdict.pending(),
        final_status=final_status,
        annotation=annotation if final_status is FinalStatus.DRAFT else None,
    )


def triplet_draft_response(expected_output: str,
                           zone: IntensityZone = IntensityZone.EASY_AEROBIC,
                           query: str = "What should the next session hold?",
                           **annotation_overrides: Any) -> dict:
    """A provider response satisfying the TripletDraft schema."""
    annotation = make_annotation(zone, **annotation_overrides)
    return {
        "query": query,
        "expected_output": expected_output,
        "annotation": annotation.to_dict(),
    }


def revision_response(expected_output: str,
                      zone: IntensityZone = IntensityZone.EASY_AEROBIC,
                      **annotation_overrides: Any) -> dict:
    annotation = make_annotation(zone, **annotation_overrides)
    return {"expected_output": expected_output, "annotation": annotation.to_dict()}


SAFE_VOLUME = VolumeClass.MODERATE
SAFE_CONTEXT = (
    "Squad review for the spring block. Mean fatigue_score is 4.2 with a "
    "maximum of 6.8. Typical recovery_time_hr sits near 24 hours and hrv "
    "averages 80 ms against a baseline of 82 ms. Training load held at 500 au."
)
