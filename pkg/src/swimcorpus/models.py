"""Shared domain types, enumerations, and threshold configuration.

Every other module builds on the types here: the 16-field corpus record
(GoldenTriplet), the anchor object bridging stages 2 and 3, the athlete /
kinematic state consumed by the soundness rules, and the checkpointable
pipeline state. All types are immutable values and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Iterable, Optional


class QueryType(str, Enum):
    SIMPLE = "Simple"
    REASONING = "Reasoning"
    MULTIMODAL = "Multimodal"


class Persona(str, Enum):
    ELITE_COACH = "EliteCoach"
    NOVICE_SWIMMER = "NoviceSwimmer"
    BIOMETRIC_ANALYST = "BiometricAnalyst"
    SPORTS_SCIENTIST = "SportsScientist"
    PHYSIOTHERAPIST = "Physiotherapist"


class ComplexityLevel(str, Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


class AnchorType(str, Enum):
    FATIGUE_KINEMATIC = "FatigueKinematic"
    LOAD_PERFORMANCE = "LoadPerformance"
    STROKE_EFFICIENCY = "StrokeEfficiency"


class StrokeType(str, Enum):
    FREESTYLE = "Freestyle"
    BACKSTROKE = "Backstroke"
    BREASTSTROKE = "Breaststroke"
    BUTTERFLY = "Butterfly"
    IM = "IM"
    GENERAL = "General"


class TrainingPhase(str, Enum):
    BASE = "Base"
    BUILD = "Build"
    PEAK = "Peak"
    TAPER = "Taper"
    RECOVERY = "Recovery"
    GENERAL = "General"


class DataCategory(str, Enum):
    PERFORMANCE = "Performance"
    PHYSIOLOGICAL = "Physiological"
    UNSTRUCTURED = "Unstructured"


class FinalStatus(str, Enum):
    DRAFT = "Draft"
    AUTO_ACCEPTED = "AutoAccepted"
    HITL_PENDING = "HITLPending"
    HITL_ACCEPTED = "HITLAccepted"
    HITL_REVISED = "HITLRevised"


class RuleId(str, Enum):
    F1 = "F1"
    F2 = "F2"
    F3 = "F3"
    I1 = "I1"
    I2 = "I2"
    I3 = "I3"
    P1 = "P1"
    P2 = "P2"
    P3 = "P3"
    B1 = "B1"
    B2 = "B2"
    L1 = "L1"
    L2 = "L2"


class Stage(str, Enum):
    INGEST = "Ingest"
    ARCHITECT = "Architect"
    GENERATOR = "Generator"
    CRITIC = "Critic"
    DONE = "Done"


class IntensityZone(str, Enum):
    RECOVERY = "Recovery"
    EASY_AEROBIC = "EasyAerobic"
    THRESHOLD = "Threshold"
    VO2MAX = "VO2max"
    RACE_PACE = "RacePace"
    SUPRAMAXIMAL = "Supramaximal"


class VolumeClass(str, Enum):
    LOW = "Low"
    MODERATE = "Moderate"
    HIGH = "High"


HIGH_INTENSITY_ZONES = frozenset(
    {IntensityZone.VO2MAX, IntensityZone.RACE_PACE, IntensityZone.SUPRAMAXIMAL}
)

# Rank order used by P3 ("above easy aerobic work") and the I1 zone bands.
ZONE_ORDER = [
    IntensityZone.RECOVERY,
    IntensityZone.EASY_AEROBIC,
    IntensityZone.THRESHOLD,
    IntensityZone.VO2MAX,
    IntensityZone.RACE_PACE,
    IntensityZone.SUPRAMAXIMAL,
]
ZONE_RANK = {zone: i for i, zone in enumerate(ZONE_ORDER)}

# Display labels for report rendering; wire format always uses enum values.
DISPLAY_LABELS: dict[Enum, str] = {
    Persona.ELITE_COACH: "Elite Coach",
    Persona.NOVICE_SWIMMER: "Novice Swimmer",
    Persona.BIOMETRIC_ANALYST: "Biometric Analyst",
    Persona.SPORTS_SCIENTIST: "Sports Scientist",
    Persona.PHYSIOTHERAPIST: "Physiotherapist",
    AnchorType.FATIGUE_KINEMATIC: "Fatigue-Kinematic",
    AnchorType.LOAD_PERFORMANCE: "Load-Performance",
    AnchorType.STROKE_EFFICIENCY: "Stroke-Efficiency",
    FinalStatus.AUTO_ACCEPTED: "Auto-Accepted",
    FinalStatus.HITL_PENDING: "HITL-Pending",
    FinalStatus.HITL_ACCEPTED: "HITL-Accepted",
    FinalStatus.HITL_REVISED: "HITL-Revised",
    FinalStatus.DRAFT: "Draft",
}


def display_label(value: Enum) -> str:
    return DISPLAY_LABELS.get(value, value.value)


ATHLETE_STATE_VARIABLES = [
    "fatigue_score",
    "recovery_time_hr",
    "adaptation_pct",
    "training_load_au",
    "vo2max",
    "hrv",
    "hrv_baseline",
    "stroke_prob",
    "hydration_level",
    "biomechanical_efficiency",
]

IMU_SENSOR_IDS = list(range(1, 11))
IMU_AXES = ["x", "y", "z"]

IMU_CHANNELS = [
    f"imu{n}_{kind}_{axis}"
    for n in IMU_SENSOR_IDS
    for kind in ("acc", "gyro")
    for axis in IMU_AXES
]

# Performance metrics the load-performance anchor family correlates against.
PERFORMANCE_VARIABLES = ["split_time_s", "vo2max", "biomechanical_efficiency"]

# Every variable name an anchor may legally reference.
KNOWN_VARIABLES = frozenset(ATHLETE_STATE_VARIABLES + IMU_CHANNELS + ["split_time_s"])


def assign_complexity(query_type: QueryType, anchor_variables: Iterable[str]) -> ComplexityLevel:
    """Deterministic complexity rule applied to every synthesized triplet.

    High iff (Multimodal and >= 3 variables); Low iff (Simple and exactly
    one variable); Medium otherwise. The generator always overrides any
    provider-proposed complexity with this value.
    """
    variables = list(anchor_variables)
    if not variables:
        raise ValueError("anchor_variables must be non-empty")
    n = len(variables)
    if query_type is QueryType.MULTIMODAL and n >= 3:
        return ComplexityLevel.HIGH
    if query_type is QueryType.SIMPLE and n == 1:
        return ComplexityLevel.LOW
    return ComplexityLevel.MEDIUM


@dataclass(frozen=True)
class ThresholdConfig:
    """Population-level thresholds used across the pipeline.

    fatigue_high, stroke_prob_low, hrv_suppression_pct,
    max_regeneration_cycles, and checkpoint_interval_triplets carry the
    published defaults. load_safe_max_au has no published value: the 850 AU
    default is tuned to the synthetic fixture tables and must be reviewed
    for any real dataset.
    """

    fatigue_high: float = 7.0
    stroke_prob_low: float = 0.6
    hrv_suppression_pct: float = 15.0
    load_safe_max_au: float = 850.0
    max_regeneration_cycles: int = 3
    checkpoint_interval_triplets: int = 50
    b2_z_threshold: float = 2.0
    grounding_numeric_rel_tol: float = 0.005
    hitl_sample_rate: float = 0.05
    retrieval_k: int = 5
    anchor_min_abs_r: float = 0.5
    anchor_min_n: int = 20
    adaptation_elevated_percentile: float = 75.0

    def __post_init__(self) -> None:
        for name in (
            "fatigue_high",
            "stroke_prob_low",
            "hrv_suppression_pct",
            "load_safe_max_au",
            "max_regeneration_cycles",
            "checkpoint_interval_triplets",
            "b2_z_threshold",
            "grounding_numeric_rel_tol",
            "hitl_sample_rate",
            "retrieval_k",
            "anchor_min_abs_r",
            "anchor_min_n",
            "adaptation_elevated_percentile",
        ):
            value = getattr(self, name)
            if not value > 0:
                raise ValueError(f"threshold {name} must be strictly positive, got {value!r}")
        if self.max_regeneration_cycles < 1:
            raise ValueError("max_regeneration_cycles must be >= 1")

    def to_dict(self) -> dict[str, Any]:
        return {
            "fatigue_high": self.fatigue_high,
            "stroke_prob_low": self.stroke_prob_low,
            "hrv_suppression_pct": self.hrv_suppression_pct,
            "load_safe_max_au": self.load_safe_max_au,
            "max_regeneration_cycles": self.max_regeneration_cycles,
            "checkpoint_interval_triplets": self.checkpoint_interval_triplets,
            "b2_z_threshold": self.b2_z_threshold,
            "grounding_numeric_rel_tol": self.grounding_numeric_rel_tol,
            "hitl_sample_rate": self.hitl_sample_rate,
            "retrieval_k": self.retrieval_k,
            "anchor_min_abs_r": self.anchor_min_abs_r,
            "anchor_min_n": self.anchor_min_n,
            "adaptation_elevated_percentile": self.adaptation_elevated_percentile,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ThresholdConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**data)


@dataclass(frozen=True)
class RuleViolation:
    rule_id: RuleId
    reason: str

    def to_dict(self) -> dict[str, str]:
        return {"rule_id": self.rule_id.value, "reason": self.reason}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "RuleViolation":
        return cls(rule_id=RuleId(data["rule_id"]), reason=str(data["reason"]))


@dataclass(frozen=True)
class CriticVerdict:
    passed: bool
    violations: tuple[RuleViolation, ...] = ()
    critic_rejection_reason: str = ""
    iteration_count: int = 0

    def __post_init__(self) -> None:
        if self.passed != (len(self.violations) == 0):
            raise ValueError("passed must hold exactly when the violation list is empty")
        if self.passed and self.critic_rejection_reason:
            raise ValueError("critic_rejection_reason must be empty on a passing verdict")
        if not self.passed and not self.critic_rejection_reason:
            raise ValueError("critic_rejection_reason required on a failing verdict")
        if self.iteration_count < 0:
            raise ValueError("iteration_count must be >= 0")

    @classmethod
    def pending(cls) -> "CriticVerdict":
        """Placeholder verdict carried by drafts that have not been evaluated."""
        return cls(passed=True, violations=(), critic_rejection_reason="", iteration_count=0)

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "violations": [v.to_dict() for v in self.violations],
            "critic_rejection_reason": self.critic_rejection_reason,
            "iteration_count": self.iteration_count,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "CriticVerdict":
        return cls(
            passed=bool(data["passed"]),
            violations=tuple(RuleViolation.from_dict(v) for v in data["violations"]),
            critic_rejection_reason=str(data["critic_rejection_reason"]),
            iteration_count=int(data["iteration_count"]),
        )


@dataclass(frozen=True)
class ReferencedValue:
    name: str
    value: float
    unit: str

    def to_dict(self) -> dict[str, Any]:
        return {"name": self.name, "value": self.value, "unit": self.unit}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ReferencedValue":
        return cls(name=str(data["name"]), value=float(data["value"]), unit=str(data["unit"]))


@dataclass(frozen=True)
class PrescriptionAnnotation:
    """Structured sidecar describing a prescription, emitted by the generator.

    The soundness rules evaluate this annotation instead of parsing prose,
    which keeps the whole validation stage deterministic. The L1 lexicon
    check guards against annotations that contradict the answer text.
    """

    intensity_zone: IntensityZone
    volume_class: VolumeClass
    is_high_intensity: bool
    prescribes_drill: bool
    drill_names: tuple[str, ...] = ()
    targeted_segments: tuple[int, ...] = ()
    referenced_values: tuple[ReferencedValue, ...] = ()
    recommends_deload: bool = False
    acknowledges_adaptation_paradox: bool = False
    prescribes_rest_only: bool = False
    prescribes_novel_skill: bool = False
    next_session_in_hr: Optional[float] = None

    def __post_init__(self) -> None:
        expected = self.intensity_zone in HIGH_INTENSITY_ZONES
        if self.is_high_intensity != expected:
            raise ValueError(
                f"is_high_intensity={self.is_high_intensity} inconsistent with "
                f"intensity_zone={self.intensity_zone.value}"
            )
        for seg in self.targeted_segments:
            if not 1 <= seg <= 10:
                raise ValueError(f"targeted segment {seg} outside sensor range 1..10")

    @classmethod
    def for_zone(cls, zone: IntensityZone, **kwargs: Any) -> "PrescriptionAnnotation":
        kwargs.setdefault("volume_class", VolumeClass.MODERATE)
        kwargs.setdefault("prescribes_drill", False)
        return cls(
            intensity_zone=zone,
            is_high_intensity=zone in HIGH_INTENSITY_ZONES,
            **kwargs,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "intensity_zone": self.intensity_zone.value,
            "volume_class": self.volume_class.value,
            "is_high_intensity": self.is_high_intensity,
            "prescribes_drill": self.prescribes_drill,
            "drill_names": list(self.drill_names),
            "targeted_segments": list(self.targeted_segments),
            "referenced_values": [rv.to_dict() for rv in self.referenced_values],
            "recommends_deload": self.recommends_deload,
            "acknowledges_adaptation_paradox": self.acknowledges_adaptation_paradox,
            "prescribes_rest_only": self.prescribes_rest_only,
            "prescribes_novel_skill": self.prescribes_novel_skill,
            "next_session_in_hr": self.next_session_in_hr,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PrescriptionAnnotation":
        next_session = data.get("next_session_in_hr")
        return cls(
            intensity_zone=IntensityZone(data["intensity_zone"]),
            volume_class=VolumeClass(data["volume_class"]),
            is_high_intensity=bool(data["is_high_intensity"]),
            prescribes_drill=bool(data["prescribes_drill"]),
            drill_names=tuple(str(d) for d in data.get("drill_names", [])),
            targeted_segments=tuple(int(s) for s in data.get("targeted_segments", [])),
            referenced_values=tuple(
                ReferencedValue.from_dict(rv) for rv in data.get("referenced_values", [])
            ),
            recommends_deload=bool(data.get("recommends_deload", False)),
            acknowledges_adaptation_paradox=bool(
                data.get("acknowledges_adaptation_paradox", False)
            ),
            prescribes_rest_only=bool(data.get("prescribes_rest_only", False)),
            prescribes_novel_skill=bool(data.get("prescribes_novel_skill", False)),
            next_session_in_hr=None if next_session is None else float(next_session),
        )


# Serialization order for the 16 corpus fields.
TRIPLET_FIELDS = [
    "anchor_id",
    "triplet_id",
    "query",
    "query_type",
    "persona",
    "complexity_level",
    "context",
    "expected_output",
    "anchor_type",
    "anchor_variables",
    "stroke_type",
    "training_phase",
    "data_category",
    "source_documents",
    "critic_verdict",
    "final_status",
]

DRAFT_SIDECAR_FIELD = "annotation"


@dataclass(frozen=True)
class GoldenTriplet:
    """The 16-field question/context/answer record the pipeline produces.

    Draft records (final_status=Draft) additionally carry the
    PrescriptionAnnotation sidecar so the validation rules have structured
    operands; the sidecar is dropped when a record is finalized.
    """

    anchor_id: str
    triplet_id: str
    query: str
    query_type: QueryType
    persona: Persona
    complexity_level: ComplexityLevel
    context: str
    expected_output: str
    anchor_type: AnchorType
    anchor_variables: tuple[str, ...]
    stroke_type: StrokeType
    training_phase: TrainingPhase
    data_category: DataCategory
    source_documents: tuple[str, ...]
    critic_verdict: CriticVerdict
    final_status: FinalStatus
    annotation: Optional[PrescriptionAnnotation] = None

    def to_dict(self) -> dict[str, Any]:
        record: dict[str, Any] = {
            "anchor_id": self.anchor_id,
            "triplet_id": self.triplet_id,
            "query": self.query,
            "query_type": self.query_type.value,
            "persona": self.persona.value,
            "complexity_level": self.complexity_level.value,
            "context": self.context,
            "expected_output": self.expected_output,
            "anchor_type": self.anchor_type.value,
            "anchor_variables": list(self.anchor_variables),
            "stroke_type": self.stroke_type.value,
            "training_phase": self.training_phase.value,
            "data_category": self.data_category.value,
            "source_documents": list(self.source_documents),
            "critic_verdict": self.critic_verdict.to_dict(),
            "final_status": self.final_status.value,
        }
        if self.final_status is FinalStatus.DRAFT and self.annotation is not None:
            record[DRAFT_SIDECAR_FIELD] = self.annotation.to_dict()
        return record

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "GoldenTriplet":
        annotation = None
        if DRAFT_SIDECAR_FIELD in data and data[DRAFT_SIDECAR_FIELD] is not None:
            annotation = PrescriptionAnnotation.from_dict(data[DRAFT_SIDECAR_FIELD])
        return cls(
            anchor_id=str(data["anchor_id"]),
            triplet_id=str(data["triplet_id"]),
            query=str(data["query"]),
            query_type=QueryType(data["query_type"]),
            persona=Persona(data["persona"]),
            complexity_level=ComplexityLevel(data["complexity_level"]),
            context=str(data["context"]),
            expected_output=str(data["expected_output"]),
            anchor_type=AnchorType(data["anchor_type"]),
            anchor_variables=tuple(str(v) for v in data["anchor_variables"]),
            stroke_type=StrokeType(data["stroke_type"]),
            training_phase=TrainingPhase(data["training_phase"]),
            data_category=DataCategory(data["data_category"]),
            source_documents=tuple(str(d) for d in data["source_documents"]),
            critic_verdict=CriticVerdict.from_dict(data["critic_verdict"]),
            final_status=FinalStatus(data["final_status"]),
            annotation=annotation,
        )

    def finalized(self, status: FinalStatus, verdict: CriticVerdict) -> "GoldenTriplet":
        """Copy with a terminal status; drops the draft annotation sidecar."""
        return replace(self, final_status=status, critic_verdict=verdict, annotation=None)


@dataclass(frozen=True)
class PerformanceAnchor:
    """A typed correlation pattern bridging anchor identification and synthesis."""

    anchor_id: str
    anchor_type: AnchorType
    anchor_variables: tuple[str, ...]
    data_category: DataCategory
    stroke_type: StrokeType
    training_phase: TrainingPhase
    evidence_summary: str
    source_documents: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.anchor_variables:
            raise ValueError("anchor_variables must be non-empty")

    def dedup_key(self) -> tuple:
        return (
            self.anchor_type.value,
            tuple(sorted(self.anchor_variables)),
            self.stroke_type.value,
            self.training_phase.value,
        )

    def unknown_variables(self) -> list[str]:
        return [v for v in self.anchor_variables if v not in KNOWN_VARIABLES]

    def to_dict(self) -> dict[str, Any]:
        return {
            "anchor_id": self.anchor_id,
            "anchor_type": self.anchor_type.value,
            "anchor_variables": list(self.anchor_variables),
            "data_category": self.data_category.value,
            "stroke_type": self.stroke_type.value,
            "training_phase": self.training_phase.value,
            "evidence_summary": self.evidence_summary,
            "source_documents": list(self.source_documents),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PerformanceAnchor":
        return cls(
            anchor_id=str(data["anchor_id"]),
            anchor_type=AnchorType(data["anchor_type"]),
            anchor_variables=tuple(str(v) for v in data["anchor_variables"]),
            data_category=DataCategory(data["data_category"]),
            stroke_type=StrokeType(data["stroke_type"]),
            training_phase=TrainingPhase(data["training_phase"]),
            evidence_summary=str(data["evidence_summary"]),
            source_documents=tuple(str(d) for d in data.get("source_documents", [])),
        )


@dataclass(frozen=True)
class AthleteStateRecord:
    fatigue_score: float
    recovery_time_hr: float
    adaptation_pct: float
    training_load_au: float
    vo2max: float
    hrv: float
    hrv_baseline: float
    stroke_prob: float
    hydration_level: float
    biomechanical_efficiency: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.fatigue_score <= 10.0:
            raise ValueError(f"fatigue_score {self.fatigue_score} outside [0, 10]")
        if not 0.0 <= self.stroke_prob <= 1.0:
            raise ValueError(f"stroke_prob {self.stroke_prob} outside [0, 1]")
        if self.vo2max <= 0 or self.hrv <= 0 or self.hrv_baseline <= 0:
            raise ValueError("vo2max, hrv, and hrv_baseline must be positive")
        for name in ("recovery_time_hr", "adaptation_pct", "training_load_au",
                     "hydration_level", "biomechanical_efficiency"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")

    def to_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in ATHLETE_STATE_VARIABLES}

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "AthleteStateRecord":
        return cls(**{name: float(data[name]) for name in ATHLETE_STATE_VARIABLES})


@dataclass(frozen=True)
class KinematicFrame:
    sensor_id: int
    acc: tuple[float, float, float]
    gyro: tuple[float, float, float]
    timestamp: float
    stroke_type: StrokeType

    def __post_init__(self) -> None:
        if not 1 <= self.sensor_id <= 10:
            raise ValueError(f"sensor_id {self.sensor_id} outside [1, 10]")
        for v in (*self.acc, *self.gyro, self.timestamp):
            if not math.isfinite(v):
                raise ValueError("kinematic vectors must be finite")

    def channel_values(self) -> dict[str, float]:
        values = {}
        for axis, v in zip(IMU_AXES, self.acc):
            values[f"imu{self.sensor_id}_acc_{axis}"] = v
        for axis, v in zip(IMU_AXES, self.gyro):
            values[f"imu{self.sensor_id}_gyro_{axis}"] = v
        return values


@dataclass
class PipelineState:
    """Checkpointable progress record; seven fields, persisted as JSON."""

    run_id: str
    stage: Stage
    processed_ids: list[str] = field(default_factory=list)
    last_checkpoint_at: str = ""
    iteration_count: int = 0
    critic_rejection_reason: str = ""
    final_status_counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "stage": self.stage.value,
            "processed_ids": list(self.processed_ids),
            "last_checkpoint_at": self.last_checkpoint_at,
            "iteration_count": self.iteration_count,
            "critic_rejection_reason": self.critic_rejection_reason,
            "final_status_counts": dict(self.final_status_counts),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "PipelineState":
        return cls(
            run_id=str(data["run_id"]),
            stage=Stage(data["stage"]),
            processed_ids=[str(i) for i in data["processed_ids"]],
            last_checkpoint_at=str(data["last_checkpoint_at"]),
            iteration_count=int(data["iteration_count"]),
            critic_rejection_reason=str(data["critic_rejection_reason"]),
            final_status_counts={str(k): int(v) for k, v in data["final_status_counts"].items()},
        )
