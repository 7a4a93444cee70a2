"""Physiological-soundness validation of draft triplets.

Deterministic rejection rules across five domains (fatigue F1-F3, intensity
I1-I3, periodization P1-P3, biomechanics B1-B2, logical consistency L1-L2)
judge every draft; failures enter a bounded regenerate-and-re-evaluate loop
before escalating to human review. Every rule is evaluated on every pass
with no short-circuiting, so a verdict always carries the complete
violation set.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .jsonl import (
    append_corpus,
    append_jsonl,
    corpus_ids,
    iter_jsonl,
    read_corpus,
    repair_jsonl_tail,
    write_json_atomic,
)
from .models import (
    AthleteStateRecord,
    CriticVerdict,
    FinalStatus,
    GoldenTriplet,
    IntensityZone,
    KinematicFrame,
    PrescriptionAnnotation,
    RuleId,
    RuleViolation,
    ThresholdConfig,
    TrainingPhase,
    VolumeClass,
    ZONE_RANK,
)
from .providers import (
    CompletionProvider,
    CompletionRequest,
    DEFAULT_TEMPERATURES,
    ProviderError,
    ProviderRole,
    REQUEST_KEY_MARKER,
)

logger = logging.getLogger(__name__)

VALIDATED_FILENAME = "validated_triplets.jsonl"
HITL_FILENAME = "hitl_triplets.jsonl"
EVENTS_FILENAME = "validation_events.jsonl"
REPORT_FILENAME = "validation_report.json"
CHECKPOINT_FILENAME = "critic_checkpoint.json"


class EvaluationError(Exception):
    """A rule needed a context field that was not supplied."""

    def __init__(self, field_name: str, detail: str = "") -> None:
        self.field_name = field_name
        message = f"rule context missing field: {field_name}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class ContractViolationError(Exception):
    """Regeneration changed a field it is forbidden to touch."""


# Zone bands permitted per aerobic-capacity tertile.
DEFAULT_ZONE_BANDS: dict[str, tuple[IntensityZone, ...]] = {
    "low": (IntensityZone.RECOVERY, IntensityZone.EASY_AEROBIC, IntensityZone.THRESHOLD),
    "mid": (IntensityZone.RECOVERY, IntensityZone.EASY_AEROBIC, IntensityZone.THRESHOLD,
            IntensityZone.VO2MAX, IntensityZone.RACE_PACE),
    "high": tuple(IntensityZone),
}


@dataclass(frozen=True)
class GroundingViolation:
    kind: str  # Number | DrillName | ProtocolName
    value: str
    nearest_context_candidate: Optional[str] = None

    def reason(self) -> str:
        text = f"{self.kind} {self.value!r} absent from the retrieved context"
        if self.nearest_context_candidate is not None:
            text += f" (nearest context value: {self.nearest_context_candidate})"
        return text


@dataclass
class RuleContext:
    """Everything the thirteen rules consult for one draft."""

    athlete: AthleteStateRecord
    phase: TrainingPhase
    annotation: PrescriptionAnnotation
    context_text: str
    answer_text: str
    thresholds: ThresholdConfig = ThresholdConfig()
    vo2max_tertiles: Optional[tuple[float, float]] = None
    adaptation_p75: Optional[float] = None
    zone_bands: dict[str, tuple[IntensityZone, ...]] = field(
        default_factory=lambda: dict(DEFAULT_ZONE_BANDS))
    kinematics: tuple[KinematicFrame, ...] = ()
    channel_baselines: dict[str, tuple[float, float]] = field(default_factory=dict)
    segment_z: Optional[dict[int, float]] = None
    b1_reject_low_confidence: bool = True
    l1_provider: Optional[CompletionProvider] = None
    triplet_id: str = ""

    def allowed_zones(self) -> tuple[IntensityZone, ...]:
        if self.vo2max_tertiles is None:
            raise EvaluationError("vo2max_tertiles")
        q1, q2 = self.vo2max_tertiles
        if self.athlete.vo2max <= q1:
            band = "low"
        elif self.athlete.vo2max <= q2:
            band = "mid"
        else:
            band = "high"
        return self.zone_bands[band]

    def segment_z_scores(self) -> dict[int, float]:
        if self.segment_z is not None:
            return self.segment_z
        if self.kinematics:
            return segment_z_from_frames(self.kinematics, self.channel_baselines)
        raise EvaluationError("segment_z", "no kinematics or precomputed z-scores")


def segment_z_from_frames(frames: Sequence[KinematicFrame],
                          baselines: dict[str, tuple[float, float]]) -> dict[int, float]:
    """Per-segment deviation z: the largest-magnitude channel z among a
    sensor's six channels, computed against per-channel baseline mean/std."""
    by_sensor: dict[int, list[KinematicFrame]] = {}
    for frame in frames:
        by_sensor.setdefault(frame.sensor_id, []).append(frame)
    result: dict[int, float] = {}
    for sensor_id, sensor_frames in by_sensor.items():
        best = 0.0
        for kind in ("acc", "gyro"):
            for axis_i, axis in enumerate("xyz"):
                channel = f"imu{sensor_id}_{kind}_{axis}"
                if channel not in baselines:
                    raise EvaluationError(f"channel_baselines[{channel}]")
                mean, std = baselines[channel]
                if std <= 0:
                    raise EvaluationError(f"channel_baselines[{channel}]",
                                          "non-positive std")
                observed = sum(getattr(f, kind)[axis_i] for f in sensor_frames) / len(
                    sensor_frames)
                z = (observed - mean) / std
                if abs(z) > abs(best):
                    best = z
        result[sensor_id] = best
    return result


# --- grounding (rule L2) --------------------------------------------------------

_NUMBER_RE = re.compile(r"(?<![\w.])(\d+(?:\.\d+)?)(?!\d)")
_UNIT_RE = re.compile(r"\s*(ml/kg/min|[a-zA-Z%][a-zA-Z/%-]*)?")
_NAME_RE = re.compile(
    r"\b([A-Z][a-z]+(?:-[A-Z][a-z]+)*(?:\s+[A-Z][a-z]+(?:-[A-Z][a-z]+)*)+)\b"
)

# Canonical dimension and scale for recognized unit spellings.
_UNIT_CANON: dict[str, tuple[str, float]] = {
    "hr": ("hours", 1.0), "hour": ("hours", 1.0), "hours": ("hours", 1.0),
    "h": ("hours", 1.0),
    "min": ("hours", 1.0 / 60.0), "minute": ("hours", 1.0 / 60.0),
    "minutes": ("hours", 1.0 / 60.0),
    "s": ("hours", 1.0 / 3600.0), "sec": ("hours", 1.0 / 3600.0),
    "second": ("hours", 1.0 / 3600.0), "seconds": ("hours", 1.0 / 3600.0),
    "%": ("percent", 1.0), "percent": ("percent", 1.0),
    "ms": ("milliseconds", 1.0), "millisecond": ("milliseconds", 1.0),
    "milliseconds": ("milliseconds", 1.0),
    "au": ("load", 1.0),
    "ml/kg/min": ("vo2", 1.0),
    "bpm": ("bpm", 1.0),
}

_PROTOCOL_WORDS = {"Protocol", "Test", "Set", "Series", "Ladder"}


def _extract_numbers(text: str) -> list[tuple[str, float, str]]:
    """(literal, canonical value, dimension) for every numeric mention."""
    found = []
    for match in _NUMBER_RE.finditer(text):
        literal = match.group(1)
        value = float(literal)
        unit_match = _UNIT_RE.match(text, match.end())
        token = (unit_match.group(1) or "").lower() if unit_match else ""
        dimension, scale = _UNIT_CANON.get(token, ("", 1.0))
        found.append((literal, value * scale, dimension))
    return found


def _extract_names(text: str) -> list[str]:
    return [m.group(1) for m in _NAME_RE.finditer(text)]


def check_grounding(answer_text: str, context_text: str,
                    rel_tol: float = 0.005) -> list[GroundingViolation]:
    """Find every value or name the answer cites that the context lacks.

    A number is grounded when some context number of a compatible dimension
    matches within the relative tolerance after unit normalization; a
    capitalized multi-word name is grounded by case-insensitive presence.
    """
    violations: list[GroundingViolation] = []
    context_numbers = _extract_numbers(context_text)
    for literal, value, dimension in _extract_numbers(answer_text):
        candidates = [
            (c_literal, c_value) for c_literal, c_value, c_dim in context_numbers
            if dimension == c_dim or dimension == "" or c_dim == ""
        ]
        grounded = any(
            abs(value - c_value) <= rel_tol * max(abs(c_value), 1e-12)
            for _, c_value in candidates
        )
        if not grounded:
            nearest = None
            if candidates:
                nearest = min(
                    candidates,
                    key=lambda c: abs(value - c[1]) / max(abs(c[1]), 1e-12),
                )[0]
            violations.append(GroundingViolation("Number", literal, nearest))
    context_lower = context_text.lower()
    for name in _extract_names(answer_text):
        if name.lower() in context_lower:
            continue
        kind = "ProtocolName" if name.split()[-1] in _PROTOCOL_WORDS else "DrillName"
        violations.append(GroundingViolation(kind, name))
    return violations


def grounding_detail(answer_text: str, context_text: str,
                     rel_tol: float = 0.005) -> dict[str, list[dict]]:
    """Per-reference match results for review display: every number and
    name the answer cites, each flagged grounded or not."""
    ungrounded = {(v.kind, v.value) for v in
                  check_grounding(answer_text, context_text, rel_tol)}
    numbers = [
        {"value": literal, "grounded": ("Number", literal) not in ungrounded}
        for literal, _, _ in _extract_numbers(answer_text)
    ]
    names = []
    for name in _extract_names(answer_text):
        kind = "ProtocolName" if name.split()[-1] in _PROTOCOL_WORDS else "DrillName"
        names.append({"value": name, "kind": kind,
                      "grounded": (kind, name) not in ungrounded})
    return {"numbers": numbers, "names": names}


# --- rule L1: contradictory directives --------------------------------------------

_L1_DIRECTIVE_PAIRS: list[tuple[str, str, str]] = [
    (r"\b(?:increase|raise|push)(?: the)? intensity\b",
     r"\b(?:reduce|lower|cut)(?: the)? intensity\b",
     "intensity raised and lowered in the same prescription"),
    (r"\bcomplete rest\b|\brest completely\b|\bfull rest\b",
     r"\bhard (?:session|interval|set)\b|\bhigh-intensity\b|\bmaximal effort\b",
     "complete rest alongside hard training"),
    (r"\b(?:increase|add)(?: the)? volume\b",
     r"\b(?:reduce|cut)(?: the)? volume\b",
     "volume raised and lowered in the same prescription"),
    (r"\bavoid (?:all )?drills\b",
     r"\bperform (?:the|this|a) drill\b",
     "drill work both forbidden and prescribed"),
]

_L1_HIGH_INTENSITY_TEXT = re.compile(
    r"\bhigh-intensity\b|\bhard (?:session|interval|set)\b|\bmaximal effort\b|\bsprint\b",
    re.IGNORECASE)
_L1_FULL_REST_TEXT = re.compile(
    r"\bcomplete rest\b|\brest completely\b|\bfull rest\b|\btotal rest\b", re.IGNORECASE)


def detect_contradictions(answer_text: str,
                          annotation: PrescriptionAnnotation) -> list[str]:
    """Offline lexicon scan for internally contradictory directives.

    Also spots prose that contradicts the structured annotation, which
    guards against an unsound prescription hiding behind a clean annotation.
    """
    lowered = answer_text.lower()
    reasons = []
    for pattern_a, pattern_b, label in _L1_DIRECTIVE_PAIRS:
        if re.search(pattern_a, lowered) and re.search(pattern_b, lowered):
            reasons.append(label)
    if annotation.prescribes_rest_only and _L1_HIGH_INTENSITY_TEXT.search(answer_text):
        reasons.append("rest-only annotation but the text directs hard training")
    if annotation.is_high_intensity and _L1_FULL_REST_TEXT.search(answer_text):
        reasons.append("high-intensity annotation but the text directs complete rest")
    return reasons


# --- the rejection rules -----------------------------------------------------------

def _rule_f1(rc: RuleContext) -> Optional[str]:
    if rc.annotation.is_high_intensity and rc.athlete.fatigue_score > rc.thresholds.fatigue_high:
        return (f"high-intensity prescription while fatigue_score "
                f"{rc.athlete.fatigue_score} exceeds {rc.thresholds.fatigue_high}")
    return None


def _rule_f2(rc: RuleContext) -> Optional[str]:
    next_in = rc.annotation.next_session_in_hr
    if next_in is not None and next_in < rc.athlete.recovery_time_hr:
        return (f"next session in {next_in} h violates the athlete's "
                f"recovery_time_hr of {rc.athlete.recovery_time_hr} h")
    return None


def _rule_f3(rc: RuleContext) -> Optional[str]:
    if not (rc.athlete.fatigue_score > rc.thresholds.fatigue_high):
        return None
    if rc.adaptation_p75 is None:
        raise EvaluationError("adaptation_p75")
    if (rc.athlete.adaptation_pct >= rc.adaptation_p75
            and rc.annotation.prescribes_rest_only
            and not rc.annotation.acknowledges_adaptation_paradox):
        return ("elevated fatigue with elevated adaptation prescribed rest-only "
                "without acknowledging the adaptation paradox")
    return None


def _rule_i1(rc: RuleContext) -> Optional[str]:
    allowed = rc.allowed_zones()
    if rc.annotation.intensity_zone not in allowed:
        names = "/".join(z.value for z in allowed)
        return (f"zone {rc.annotation.intensity_zone.value} inconsistent with the "
                f"athlete's VO2max profile (permitted: {names})")
    return None


def _rule_i2(rc: RuleContext) -> Optional[str]:
    if (rc.athlete.training_load_au > rc.thresholds.load_safe_max_au
            and not rc.annotation.recommends_deload):
        return (f"training_load_au {rc.athlete.training_load_au} exceeds the safe "
                f"accumulation threshold {rc.thresholds.load_safe_max_au} with no "
                "deload recommended")
    return None


def _rule_i3(rc: RuleContext) -> Optional[str]:
    floor = rc.athlete.hrv_baseline * (1.0 - rc.thresholds.hrv_suppression_pct / 100.0)
    if rc.annotation.is_high_intensity and rc.athlete.hrv < floor:
        return (f"high-intensity prescription while hrv {rc.athlete.hrv} is suppressed "
                f"more than {rc.thresholds.hrv_suppression_pct}% below baseline "
                f"{rc.athlete.hrv_baseline}")
    return None


def _rule_p1(rc: RuleContext) -> Optional[str]:
    if rc.phase is not TrainingPhase.TAPER:
        return None
    if rc.annotation.volume_class is VolumeClass.HIGH:
        return "high-volume prescription during the Taper phase"
    if rc.annotation.prescribes_novel_skill:
        return "novel skill introduced during the Taper phase"
    return None


def _rule_p2(rc: RuleContext) -> Optional[str]:
    if rc.phase is TrainingPhase.BASE and rc.annotation.intensity_zone in {
        IntensityZone.RACE_PACE, IntensityZone.SUPRAMAXIMAL,
    }:
        return (f"zone {rc.annotation.intensity_zone.value} prescribed during the "
                "Base phase")
    return None


def _rule_p3(rc: RuleContext) -> Optional[str]:
    if (rc.phase is TrainingPhase.RECOVERY
            and ZONE_RANK[rc.annotation.intensity_zone]
            > ZONE_RANK[IntensityZone.EASY_AEROBIC]):
        return (f"zone {rc.annotation.intensity_zone.value} during the Recovery phase "
                "is above easy aerobic work")
    return None


def _rule_b1(rc: RuleContext) -> Optional[str]:
    if not rc.annotation.prescribes_drill:
        return None
    threshold = rc.thresholds.stroke_prob_low
    if rc.b1_reject_low_confidence:
        if rc.athlete.stroke_prob < threshold:
            return (f"drill prescribed while stroke_prob {rc.athlete.stroke_prob} "
                    f"falls below {threshold}, indicating fatigue-driven deformation")
    elif rc.athlete.stroke_prob > threshold:
        return (f"drill prescribed while stroke_prob {rc.athlete.stroke_prob} "
                f"is above {threshold}")
    return None


def _rule_b2(rc: RuleContext) -> Optional[str]:
    if not (rc.annotation.prescribes_drill and rc.annotation.targeted_segments):
        return None
    z_scores = rc.segment_z_scores()
    weak = []
    for segment in rc.annotation.targeted_segments:
        if segment not in z_scores:
            raise EvaluationError(f"segment_z[{segment}]")
        if abs(z_scores[segment]) < rc.thresholds.b2_z_threshold:
            weak.append(f"segment {segment} (|z|={abs(z_scores[segment]):.2f})")
    if weak:
        return ("drill targets " + ", ".join(weak)
                + " with no statistically meaningful deviation from baseline")
    return None


def _rule_l1(rc: RuleContext) -> Optional[str]:
    if rc.l1_provider is not None:
        request = CompletionRequest(
            role=ProviderRole.CRITIC,
            system_prompt=("Judge whether the coaching answer contains internally "
                           "contradictory directives. Respond with one JSON object."),
            user_prompt=(f"{REQUEST_KEY_MARKER} {rc.triplet_id or 'l1'}\n"
                         f"Answer:\n{rc.answer_text}"),
            response_schema="CriticJudgment",
            temperature=DEFAULT_TEMPERATURES[ProviderRole.CRITIC],
        )
        response = rc.l1_provider.complete(request)
        if not response["passed"]:
            reasons = [v["reason"] for v in response.get("violations", [])]
            return "; ".join(reasons) or "internally contradictory advice"
        return None
    reasons = detect_contradictions(rc.answer_text, rc.annotation)
    if reasons:
        return "internally contradictory advice: " + "; ".join(reasons)
    return None


def _rule_l2(rc: RuleContext) -> Optional[str]:
    violations = check_grounding(rc.answer_text, rc.context_text,
                                 rc.thresholds.grounding_numeric_rel_tol)
    if violations:
        return "; ".join(v.reason() for v in violations)
    return None


RULE_PREDICATES: list[tuple[RuleId, Callable[[RuleContext], Optional[str]]]] = [
    (RuleId.F1, _rule_f1), (RuleId.F2, _rule_f2), (RuleId.F3, _rule_f3),
    (RuleId.I1, _rule_i1), (RuleId.I2, _rule_i2), (RuleId.I3, _rule_i3),
    (RuleId.P1, _rule_p1), (RuleId.P2, _rule_p2), (RuleId.P3, _rule_p3),
    (RuleId.B1, _rule_b1), (RuleId.B2, _rule_b2),
    (RuleId.L1, _rule_l1), (RuleId.L2, _rule_l2),
]


def evaluate(triplet: GoldenTriplet, rc: RuleContext,
             iteration_count: int = 0) -> CriticVerdict:
    """Judge one draft against the full rejection-rule battery.

    Every rule runs regardless of earlier failures, so the verdict lists
    the complete violation set. Deterministic: identical inputs always
    produce the identical verdict.
    """
    if rc.annotation is None:
        raise EvaluationError("annotation")
    violations: list[RuleViolation] = []
    for rule_id, predicate in RULE_PREDICATES:
        reason = predicate(rc)
        if reason is not None:
            violations.append(RuleViolation(rule_id=rule_id, reason=reason))
    if violations:
        summary = "; ".join(f"{v.rule_id.value}: {v.reason}" for v in violations)
        return CriticVerdict(passed=False, violations=tuple(violations),
                             critic_rejection_reason=summary,
                             iteration_count=iteration_count)
    return CriticVerdict(passed=True, iteration_count=iteration_count)


# --- regeneration ----------------------------------------------------------------

REGENERATOR_SYSTEM_PROMPT = (
    "A reviewer rejected your previous coaching answer. Produce a corrected "
    "expected_output and annotation that resolve every listed problem while "
    "keeping the question and context unchanged. Respond with exactly one JSON "
    "object."
)

_IMMUTABLE_FIELDS = (
    "anchor_id", "triplet_id", "query", "query_type", "persona", "complexity_level",
    "context", "anchor_type", "anchor_variables", "stroke_type", "training_phase",
    "data_category", "source_documents",
)


def regenerate(triplet: GoldenTriplet, verdict: CriticVerdict,
               provider: CompletionProvider,
               thresholds: ThresholdConfig = ThresholdConfig()) -> GoldenTriplet:
    """One corrective call: revised answer and annotation, nothing else.

    The provider may echo immutable fields back; echoing them changed is a
    contract violation. The returned draft carries the incremented
    iteration count and is ready for a fresh evaluation.
    """
    if verdict.passed:
        raise ValueError("regenerate called on a passing verdict")
    if verdict.iteration_count >= thresholds.max_regeneration_cycles:
        raise ValueError("regeneration ceiling already reached")
    request = CompletionRequest(
        role=ProviderRole.REGENERATOR,
        system_prompt=REGENERATOR_SYSTEM_PROMPT,
        user_prompt=(
            f"{REQUEST_KEY_MARKER} {triplet.triplet_id}#regen{verdict.iteration_count + 1}\n"
            f"rejection_reason: {verdict.critic_rejection_reason}\n"
            f"query: {triplet.query}\n"
            f"previous_output: {triplet.expected_output}\n"
            f"Context:\n{triplet.context}"
        ),
        response_schema="RevisedOutput",
        temperature=DEFAULT_TEMPERATURES[ProviderRole.REGENERATOR],
    )
    response = provider.complete(request)

    current = triplet.to_dict()
    for field_name in _IMMUTABLE_FIELDS:
        if field_name in response and response[field_name] != current[field_name]:
            raise ContractViolationError(
                f"regeneration may not change {field_name}"
            )
    annotation = PrescriptionAnnotation.from_dict(response["annotation"])
    carried = CriticVerdict(
        passed=False,
        violations=verdict.violations,
        critic_rejection_reason=verdict.critic_rejection_reason,
        iteration_count=verdict.iteration_count + 1,
    )
    return dataclasses.replace(
        triplet,
        expected_output=response["expected_output"],
        annotation=annotation,
        critic_verdict=carried,
    )


# --- the validation runner --------------------------------------------------------

@dataclass
class ValidationReport:
    total: int = 0
    direct_accepts: int = 0
    regenerated_accepts: int = 0
    hitl_count: int = 0
    rule_counts: dict[str, int] = field(default_factory=dict)
    acceptance_rate_pct: float = 0.0
    recovery_rate_pct: float = 0.0
    resumed: bool = False
    validated_path: str = ""
    hitl_path: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def summarize_counts(direct: int, regenerated: int, hitl: int) -> dict[str, float]:
    """Bookkeeping rates from outcome counts (pure arithmetic)."""
    total = direct + regenerated + hitl
    accepted = direct + regenerated
    initially_rejected = total - direct
    return {
        "total": float(total),
        "accepted": float(accepted),
        "acceptance_rate_pct": round(100.0 * accepted / total, 1) if total else 0.0,
        "recovery_rate_pct": (round(100.0 * regenerated / initially_rejected, 1)
                              if initially_rejected else 0.0),
    }


RuleContextResolver = Callable[[GoldenTriplet], RuleContext]


def validate_one(draft: GoldenTriplet, rc: RuleContext,
                 provider: Optional[CompletionProvider],
                 thresholds: ThresholdConfig) -> tuple[GoldenTriplet, str, CriticVerdict]:
    """Run the judge-regenerate loop for one draft.

    Returns (final record, outcome, initial verdict) where outcome is one
    of "direct", "regenerated", "hitl". The loop regenerates at most
    max_regeneration_cycles times; a draft still failing at the ceiling is
    escalated for human review with its final verdict attached.
    """
    current = draft
    verdict = evaluate(current, rc, iteration_count=0)
    initial = verdict
    if verdict.passed:
        return current.finalized(FinalStatus.AUTO_ACCEPTED, verdict), "direct", initial

    while verdict.iteration_count < thresholds.max_regeneration_cycles:
        if provider is None:
            break
        try:
            current = regenerate(current, verdict, provider, thresholds)
        except (ProviderError, ContractViolationError) as exc:
            logger.warning("%s: regeneration failed (%s)", draft.triplet_id, exc)
            failed = CriticVerdict(
                passed=False, violations=verdict.violations,
                critic_rejection_reason=(f"{verdict.critic_rejection_reason}; "
                                         f"regeneration failed: {exc}"),
                iteration_count=verdict.iteration_count,
            )
            return current.finalized(FinalStatus.HITL_PENDING, failed), "hitl", initial
        rc = dataclasses.replace(rc, annotation=current.annotation,
                                 answer_text=current.expected_output)
        verdict = evaluate(current, rc,
                           iteration_count=current.critic_verdict.iteration_count)
        if verdict.passed:
            return (current.finalized(FinalStatus.AUTO_ACCEPTED, verdict),
                    "regenerated", initial)
    return current.finalized(FinalStatus.HITL_PENDING, verdict), "hitl", initial


def run_validation(drafts_path: str | os.PathLike, out_dir: str | os.PathLike,
                   rc_resolver: RuleContextResolver,
                   provider: Optional[CompletionProvider] = None,
                   thresholds: ThresholdConfig = ThresholdConfig(),
                   on_item: Optional[Callable[[str], None]] = None) -> ValidationReport:
    """Validate the whole draft corpus with periodic checkpointing.

    Every draft lands in exactly one of the validated or escalation files.
    A per-triplet event line is appended before the output record, and the
    output files are authoritative on resume, so a killed run reproduces
    the uninterrupted byte stream.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    validated_path = out / VALIDATED_FILENAME
    hitl_path = out / HITL_FILENAME
    events_path = out / EVENTS_FILENAME
    checkpoint_path = out / CHECKPOINT_FILENAME

    for path in (validated_path, hitl_path, events_path):
        repair_jsonl_tail(str(path))

    processed = corpus_ids(str(validated_path)) | corpus_ids(str(hitl_path))
    report = ValidationReport(resumed=bool(processed),
                              validated_path=str(validated_path),
                              hitl_path=str(hitl_path))

    completed = len(processed)
    for draft in read_corpus(str(drafts_path), tolerant=True):
        if draft.triplet_id in processed:
            continue
        rc_failure = ""
        try:
            rc = rc_resolver(draft)
            rc = dataclasses.replace(rc, annotation=draft.annotation,
                                     answer_text=draft.expected_output,
                                     context_text=draft.context,
                                     triplet_id=draft.triplet_id)
            final, outcome, initial = validate_one(draft, rc, provider, thresholds)
        except (EvaluationError, ValueError, KeyError) as exc:
            rc_failure = str(exc)
            logger.warning("%s: rule context unavailable (%s); escalated",
                           draft.triplet_id, exc)
            verdict = CriticVerdict(
                passed=False,
                violations=(RuleViolation(RuleId.L1, "context resolution failed"),),
                critic_rejection_reason=f"rule context unavailable: {exc}",
                iteration_count=0,
            )
            final, outcome, initial = (
                draft.finalized(FinalStatus.HITL_PENDING, verdict), "hitl", verdict)

        event = {
            "triplet_id": draft.triplet_id,
            "outcome": outcome,
            "iteration_count": final.critic_verdict.iteration_count,
            "initial_violations": [v.to_dict() for v in initial.violations],
        }
        if rc_failure:
            event["rc_failure"] = rc_failure
        append_jsonl(str(events_path), event)
        target = validated_path if final.final_status is FinalStatus.AUTO_ACCEPTED \
            else hitl_path
        append_corpus(str(target), final)
        processed.add(draft.triplet_id)
        completed += 1
        if completed % thresholds.checkpoint_interval_triplets == 0:
            write_json_atomic(str(checkpoint_path), {"processed_count": completed})
        if on_item is not None:
            on_item(draft.triplet_id)

    write_json_atomic(str(checkpoint_path), {"processed_count": completed})

    # Rebuild tallies from the event log, trusting only ids present in the
    # output files (the event for a torn write is superseded on reprocess).
    last_events: dict[str, dict] = {}
    if events_path.exists():
        for _, event in iter_jsonl(str(events_path), tolerant=True):
            last_events[str(event.get("triplet_id"))] = event
    output_ids = corpus_ids(str(validated_path)) | corpus_ids(str(hitl_path))
    for triplet_id in output_ids:
        event = last_events.get(triplet_id)
        if event is None:
            logger.warning("%s: output present without event record", triplet_id)
            continue
        report.total += 1
        outcome = event["outcome"]
        if outcome == "direct":
            report.direct_accepts += 1
        elif outcome == "regenerated":
            report.regenerated_accepts += 1
        else:
            report.hitl_count += 1
        for violation in event.get("initial_violations", []):
            rid = violation["rule_id"]
            report.rule_counts[rid] = report.rule_counts.get(rid, 0) + 1

    rates = summarize_counts(report.direct_accepts, report.regenerated_accepts,
                             report.hitl_count)
    report.acceptance_rate_pct = rates["acceptance_rate_pct"]
    report.recovery_rate_pct = rates["recovery_rate_pct"]
    write_json_atomic(str(out / REPORT_FILENAME), report.to_dict())
    return report


# --- default rule-context resolution ----------------------------------------------

class TableRuleContextResolver:
    """Maps a triplet to its athlete state and population statistics.

    Athlete rows come from the analysis table; the row for a triplet is a
    stable hash of its id, so validation is deterministic and repeatable.
    Population statistics (VO2max tertiles, adaptation percentile) are
    computed once over the whole table.
    """

    def __init__(self, analysis_csv: str | os.PathLike,
                 baselines_csv: Optional[str | os.PathLike] = None,
                 thresholds: ThresholdConfig = ThresholdConfig(),
                 zone_bands: Optional[dict[str, tuple[IntensityZone, ...]]] = None,
                 b1_reject_low_confidence: bool = True,
                 l1_provider: Optional[CompletionProvider] = None) -> None:
        from .architect import AnalysisTable

        self.table = AnalysisTable.from_csv(analysis_csv)
        self.thresholds = thresholds
        self.zone_bands = dict(zone_bands or DEFAULT_ZONE_BANDS)
        self.b1_reject_low_confidence = b1_reject_low_confidence
        self.l1_provider = l1_provider

        vo2 = [v for v in self.table.columns.get("vo2max", []) if v is not None]
        if not vo2:
            raise ValueError("analysis table lacks vo2max values")
        q1, q2 = np.quantile(np.asarray(vo2, dtype=np.float64), [1.0 / 3.0, 2.0 / 3.0])
        self.vo2max_tertiles = (float(q1), float(q2))

        adaptation = [v for v in self.table.columns.get("adaptation_pct", [])
                      if v is not None]
        if not adaptation:
            raise ValueError("analysis table lacks adaptation_pct values")
        self.adaptation_p75 = float(np.percentile(
            np.asarray(adaptation, dtype=np.float64),
            thresholds.adaptation_elevated_percentile))

        hrv = [v for v in self.table.columns.get("hrv", []) if v is not None]
        self.population_hrv_mean = (sum(hrv) / len(hrv)) if hrv else 0.0

        self.segment_z_by_athlete: dict[str, dict[int, float]] = {}
        if baselines_csv is not None:
            import csv

            with open(baselines_csv, "r", encoding="utf-8", newline="") as handle:
                for row in csv.DictReader(handle):
                    athlete = (row.get("athlete_id") or "").strip()
                    segment = int(row["segment"])
                    z = float(row["z_score"])
                    self.segment_z_by_athlete.setdefault(athlete, {})[segment] = z

    def _row_for(self, triplet_id: str) -> int:
        digest = hashlib.sha1(triplet_id.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "little") % len(self.table)

    def athlete_for_row(self, i: int) -> AthleteStateRecord:
        def value(name: str, default: Optional[float] = None) -> float:
            column = self.table.columns.get(name)
            cell = column[i] if column is not None else None
            if cell is None:
                if default is None:
                    raise EvaluationError(f"athlete.{name}")
                return default
            return cell

        return AthleteStateRecord(
            fatigue_score=value("fatigue_score"),
            recovery_time_hr=value("recovery_time_hr"),
            adaptation_pct=value("adaptation_pct"),
            training_load_au=value("training_load_au"),
            vo2max=value("vo2max"),
            hrv=value("hrv"),
            hrv_baseline=value("hrv_baseline", default=self.population_hrv_mean),
            stroke_prob=value("stroke_prob"),
            hydration_level=value("hydration_level"),
            biomechanical_efficiency=value("biomechanical_efficiency"),
        )

    def __call__(self, triplet: GoldenTriplet) -> RuleContext:
        i = self._row_for(triplet.triplet_id)
        athlete = self.athlete_for_row(i)
        if triplet.training_phase is not TrainingPhase.GENERAL:
            phase = triplet.training_phase
        else:
            try:
                phase = TrainingPhase(self.table.phases[i])
            except ValueError:
                phase = TrainingPhase.GENERAL
        athlete_id = self.table.athlete_ids[i]
        annotation = triplet.annotation or PrescriptionAnnotation.for_zone(
            IntensityZone.EASY_AEROBIC)
        return RuleContext(
            athlete=athlete,
            phase=phase,
            annotation=annotation,
            context_text=triplet.context,
            answer_text=triplet.expected_output,
            thresholds=self.thresholds,
            vo2max_tertiles=self.vo2max_tertiles,
            adaptation_p75=self.adaptation_p75,
            zone_bands=self.zone_bands,
            segment_z=self.segment_z_by_athlete.get(athlete_id, {}),
            b1_reject_low_confidence=self.b1_reject_low_confidence,
            l1_provider=self.l1_provider,
            triplet_id=triplet.triplet_id,
        )
