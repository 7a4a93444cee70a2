"""Seed library construction and performance-anchor identification.

Anchors are correlation patterns between monitored variables, found either
by a deterministic statistical scan of the athlete analysis table or by a
completion provider reading per-stratum aggregate digests. Every seed is
checkpointed as it completes so an interrupted run resumes exactly where
it stopped.
"""

from __future__ import annotations

import hashlib
import logging
import math
import os
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Optional, Sequence

from .jsonl import read_json_optional, write_json_atomic
from .models import (
    AnchorType,
    ComplexityLevel,
    DataCategory,
    KNOWN_VARIABLES,
    IMU_CHANNELS,
    PerformanceAnchor,
    RuleId,
    StrokeType,
    ThresholdConfig,
    TrainingPhase,
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

ANCHORS_FILENAME = "performance_anchors.json"
CHECKPOINT_FILENAME = "architect_checkpoint.json"


class SeedConfigError(ValueError):
    pass


class SeedKind(str, Enum):
    FACTORIAL = "Factorial"
    RULE_SPECIFIC = "RuleSpecific"
    DATA_TARGETED = "DataTargeted"


FACTORIAL_STROKES = [
    StrokeType.FREESTYLE,
    StrokeType.BACKSTROKE,
    StrokeType.BREASTSTROKE,
    StrokeType.BUTTERFLY,
    StrokeType.IM,
    StrokeType.GENERAL,
]
FACTORIAL_PHASES = [
    TrainingPhase.BASE,
    TrainingPhase.BUILD,
    TrainingPhase.PEAK,
    TrainingPhase.TAPER,
    TrainingPhase.RECOVERY,
]
FACTORIAL_COUNT = len(AnchorType) * len(FACTORIAL_STROKES) * len(FACTORIAL_PHASES) * len(
    ComplexityLevel
)


@dataclass(frozen=True)
class QuerySeed:
    seed_id: str
    seed_kind: SeedKind
    anchor_type: AnchorType
    stroke_type: StrokeType
    training_phase: TrainingPhase
    complexity_level: ComplexityLevel
    target_variables: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "seed_id": self.seed_id,
            "seed_kind": self.seed_kind.value,
            "anchor_type": self.anchor_type.value,
            "stroke_type": self.stroke_type.value,
            "training_phase": self.training_phase.value,
            "complexity_level": self.complexity_level.value,
            "target_variables": list(self.target_variables),
        }


@dataclass(frozen=True)
class AnchorEvidence:
    variable_pair: tuple[str, str]
    correlation: float
    n: int
    condition: str = ""

    def __post_init__(self) -> None:
        if abs(self.correlation) > 1.0 + 1e-12:
            raise ValueError(f"|r| = {abs(self.correlation)} exceeds 1")
        if self.n < 1:
            raise ValueError("sample size must be positive")

    def summary(self) -> str:
        text = (
            f"Pearson r={format(self.correlation, '.12g')} (n={self.n}) between "
            f"{self.variable_pair[0]} and {self.variable_pair[1]}"
        )
        if self.condition:
            text += f"; condition: {self.condition}"
        return text


# Each rule's primary monitored variables, used to spin rule-specific seeds.
RULE_PRIMARY_VARIABLES: dict[RuleId, tuple[str, ...]] = {
    RuleId.F1: ("fatigue_score",),
    RuleId.F2: ("recovery_time_hr",),
    RuleId.F3: ("adaptation_pct", "fatigue_score"),
    RuleId.I1: ("vo2max",),
    RuleId.I2: ("training_load_au",),
    RuleId.I3: ("hrv", "hrv_baseline"),
    RuleId.P1: ("training_load_au",),
    RuleId.P2: ("vo2max",),
    RuleId.P3: ("hrv",),
    RuleId.B1: ("stroke_prob",),
    RuleId.B2: ("imu1_gyro_x",),
    RuleId.L1: ("fatigue_score",),
    RuleId.L2: ("vo2max",),
}

_RULE_ANCHOR_TYPE: dict[str, AnchorType] = {
    "F": AnchorType.FATIGUE_KINEMATIC,
    "I": AnchorType.LOAD_PERFORMANCE,
    "P": AnchorType.LOAD_PERFORMANCE,
    "B": AnchorType.STROKE_EFFICIENCY,
    "L": AnchorType.FATIGUE_KINEMATIC,
}


def _variable_anchor_type(variable: str) -> AnchorType:
    if variable == "stroke_prob" or "gyro" in variable:
        return AnchorType.STROKE_EFFICIENCY
    if variable.startswith("imu") or variable in {"fatigue_score", "hrv", "hrv_baseline",
                                                  "hydration_level"}:
        return AnchorType.FATIGUE_KINEMATIC
    return AnchorType.LOAD_PERFORMANCE


@dataclass(frozen=True)
class SeedLibraryConfig:
    rule_specific_count: int = 66
    data_targeted_count: int = 614

    def __post_init__(self) -> None:
        if self.rule_specific_count < 0 or self.data_targeted_count < 0:
            raise SeedConfigError("seed counts must be non-negative")


def build_seed_library(config: SeedLibraryConfig = SeedLibraryConfig()) -> list[QuerySeed]:
    """Enumerate the deterministic seed library.

    The factorial block covers every (anchor type, stroke, phase, complexity)
    combination exactly once; rule-specific seeds cycle over each rule's
    primary variables; data-targeted seeds cover (variable, stratum) pairs
    in sorted order up to the configured count.
    """
    seeds: list[QuerySeed] = []
    i = 0
    for anchor_type in AnchorType:
        for stroke in FACTORIAL_STROKES:
            for phase in FACTORIAL_PHASES:
                for complexity in ComplexityLevel:
                    i += 1
                    seeds.append(QuerySeed(
                        seed_id=f"seed-f-{i:04d}",
                        seed_kind=SeedKind.FACTORIAL,
                        anchor_type=anchor_type,
                        stroke_type=stroke,
                        training_phase=phase,
                        complexity_level=complexity,
                    ))

    rule_pairs = [(rule, var) for rule in RuleId
                  for var in RULE_PRIMARY_VARIABLES[rule]]
    for j in range(config.rule_specific_count):
        rule, var = rule_pairs[j % len(rule_pairs)]
        seeds.append(QuerySeed(
            seed_id=f"seed-r-{j + 1:04d}",
            seed_kind=SeedKind.RULE_SPECIFIC,
            anchor_type=_RULE_ANCHOR_TYPE[rule.value[0]],
            stroke_type=StrokeType.GENERAL,
            training_phase=TrainingPhase.GENERAL,
            complexity_level=ComplexityLevel.MEDIUM,
            target_variables=(var,),
        ))

    strata: list[tuple[StrokeType, TrainingPhase]] = (
        [(s, TrainingPhase.GENERAL) for s in FACTORIAL_STROKES]
        + [(StrokeType.GENERAL, p) for p in FACTORIAL_PHASES]
    )
    combos = [(var, stroke, phase)
              for var in sorted(KNOWN_VARIABLES)
              for stroke, phase in strata]
    if config.data_targeted_count > len(combos):
        logger.warning("data-targeted count %d exceeds available combinations %d; capping",
                       config.data_targeted_count, len(combos))
    for k, (var, stroke, phase) in enumerate(combos[:config.data_targeted_count]):
        seeds.append(QuerySeed(
            seed_id=f"seed-d-{k + 1:04d}",
            seed_kind=SeedKind.DATA_TARGETED,
            anchor_type=_variable_anchor_type(var),
            stroke_type=stroke,
            training_phase=phase,
            complexity_level=ComplexityLevel.MEDIUM,
            target_variables=(var,),
        ))
    return seeds


# --- the analysis table ---------------------------------------------------------

@dataclass
class AnalysisTable:
    """Column-oriented view of the athlete analysis dataset."""

    columns: dict[str, list[Optional[float]]]
    strokes: list[str]
    phases: list[str]
    athlete_ids: list[str]

    def __len__(self) -> int:
        return len(self.strokes)

    @classmethod
    def from_csv(cls, path: str | os.PathLike) -> "AnalysisTable":
        import csv

        with open(path, "r", encoding="utf-8", newline="") as handle:
            reader = csv.DictReader(handle)
            rows = list(reader)
        if not rows:
            raise ValueError(f"{path}: empty analysis table")
        numeric_names = [name for name in (reader.fieldnames or [])
                         if name not in {"athlete_id", "stroke_type", "training_phase"}]
        columns: dict[str, list[Optional[float]]] = {name: [] for name in numeric_names}
        strokes, phases, ids = [], [], []
        for row in rows:
            strokes.append((row.get("stroke_type") or "General").strip())
            phases.append((row.get("training_phase") or "General").strip())
            ids.append((row.get("athlete_id") or "").strip())
            for name in numeric_names:
                cell = (row.get(name) or "").strip()
                try:
                    columns[name].append(float(cell))
                except ValueError:
                    columns[name].append(None)
        return cls(columns=columns, strokes=strokes, phases=phases, athlete_ids=ids)

    def stratum_rows(self, stroke: StrokeType, phase: TrainingPhase) -> list[int]:
        rows = []
        for i in range(len(self)):
            if stroke is not StrokeType.GENERAL and self.strokes[i] != stroke.value:
                continue
            if phase is not TrainingPhase.GENERAL and self.phases[i] != phase.value:
                continue
            rows.append(i)
        return rows


def pearson_r(xs: Sequence[float], ys: Sequence[float]) -> Optional[float]:
    """Two-pass Pearson correlation; None when either side has no variance."""
    n = len(xs)
    if n != len(ys):
        raise ValueError("series length mismatch")
    if n < 2:
        return None
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    cov = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    var_x = sum((x - mean_x) ** 2 for x in xs)
    var_y = sum((y - mean_y) ** 2 for y in ys)
    if var_x == 0.0 or var_y == 0.0:
        return None
    return cov / math.sqrt(var_x * var_y)


_GYRO_CHANNELS = tuple(c for c in IMU_CHANNELS if "_gyro_" in c)

# Candidate variable pairs per anchor type: (left family, right family).
ANCHOR_VARIABLE_FAMILIES: dict[AnchorType, tuple[tuple[str, ...], tuple[str, ...]]] = {
    AnchorType.FATIGUE_KINEMATIC: (("fatigue_score", "hrv"), tuple(IMU_CHANNELS)),
    AnchorType.LOAD_PERFORMANCE: (
        ("training_load_au", "adaptation_pct"),
        ("split_time_s", "vo2max", "biomechanical_efficiency"),
    ),
    AnchorType.STROKE_EFFICIENCY: (("stroke_prob",), _GYRO_CHANNELS),
}


def candidate_pairs(seed: QuerySeed) -> list[tuple[str, str]]:
    lefts, rights = ANCHOR_VARIABLE_FAMILIES[seed.anchor_type]
    pairs = [(a, b) for a in lefts for b in rights]
    if seed.target_variables:
        targets = set(seed.target_variables)
        filtered = [p for p in pairs if targets & set(p)]
        return filtered
    return pairs


def best_family_correlation(seed: QuerySeed, table: AnalysisTable,
                            thresholds: ThresholdConfig) -> Optional[AnchorEvidence]:
    """Strongest qualifying correlation among the seed's candidate pairs."""
    rows = table.stratum_rows(seed.stroke_type, seed.training_phase)
    best: Optional[AnchorEvidence] = None
    for var_a, var_b in candidate_pairs(seed):
        col_a = table.columns.get(var_a)
        col_b = table.columns.get(var_b)
        if col_a is None or col_b is None:
            logger.debug("%s: variables %s/%s absent from table", seed.seed_id, var_a, var_b)
            continue
        xs, ys = [], []
        for i in rows:
            if col_a[i] is not None and col_b[i] is not None:
                xs.append(col_a[i])
                ys.append(col_b[i])
        if len(xs) < thresholds.anchor_min_n:
            continue
        r = pearson_r(xs, ys)
        if r is None or abs(r) < thresholds.anchor_min_abs_r:
            continue
        if best is None or abs(r) > abs(best.correlation):
            best = AnchorEvidence(variable_pair=(var_a, var_b), correlation=r, n=len(xs))
    return best


def anchor_id_for(anchor_type: AnchorType, variables: Sequence[str],
                  stroke: StrokeType, phase: TrainingPhase) -> str:
    key = f"{anchor_type.value}|{','.join(sorted(variables))}|{stroke.value}|{phase.value}"
    return "anc-" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:10]


def _anchor_data_category(anchor_type: AnchorType) -> DataCategory:
    if anchor_type is AnchorType.LOAD_PERFORMANCE:
        return DataCategory.PERFORMANCE
    return DataCategory.PHYSIOLOGICAL


def detect_anchor_statistical(seed: QuerySeed, table: AnalysisTable,
                              thresholds: ThresholdConfig) -> Optional[PerformanceAnchor]:
    """Deterministic anchor detection for one seed over the analysis table.

    Fires iff some candidate pair in the seed's variable family reaches the
    configured correlation strength and sample size within the stratum
    selected by the seed's stroke and phase.
    """
    evidence = best_family_correlation(seed, table, thresholds)
    if evidence is None:
        return None
    return PerformanceAnchor(
        anchor_id=anchor_id_for(seed.anchor_type, evidence.variable_pair,
                                seed.stroke_type, seed.training_phase),
        anchor_type=seed.anchor_type,
        anchor_variables=tuple(evidence.variable_pair),
        data_category=_anchor_data_category(seed.anchor_type),
        stroke_type=seed.stroke_type,
        training_phase=seed.training_phase,
        evidence_summary=evidence.summary(),
    )


ARCHITECT_SYSTEM_PROMPT = (
    "You analyze summarized swim-training telemetry and identify recurring "
    "correlation patterns between monitored variables. Respond with exactly one "
    "JSON object naming the pattern."
)


def identify_anchor_llm(seed: QuerySeed, data_digest: str,
                        provider: CompletionProvider) -> Optional[PerformanceAnchor]:
    """Provider-driven anchor identification for one seed.

    The response is schema-validated upstream; here every named variable is
    additionally checked against the variable registry, and an anchor naming
    anything unknown is dropped with a log entry.
    """
    lefts, rights = ANCHOR_VARIABLE_FAMILIES[seed.anchor_type]
    request = CompletionRequest(
        role=ProviderRole.ARCHITECT,
        system_prompt=ARCHITECT_SYSTEM_PROMPT,
        user_prompt=(
            f"{REQUEST_KEY_MARKER} {seed.seed_id}\n"
            f"anchor_type: {seed.anchor_type.value}\n"
            f"stroke_type: {seed.stroke_type.value}\n"
            f"training_phase: {seed.training_phase.value}\n"
            f"candidate_variables: {' '.join(list(lefts) + list(rights))}\n"
            f"Digest of the stratum's aggregate statistics follows.\n"
            f"Context:\n{data_digest}"
        ),
        response_schema="AnchorDraft",
        temperature=DEFAULT_TEMPERATURES[ProviderRole.ARCHITECT],
    )
    response = provider.complete(request)
    try:
        anchor_type = AnchorType(response["anchor_type"])
    except ValueError:
        logger.info("%s: unknown anchor_type %r dropped", seed.seed_id,
                    response["anchor_type"])
        return None
    variables = tuple(response["anchor_variables"])
    unknown = [v for v in variables if v not in KNOWN_VARIABLES]
    if unknown:
        logger.info("%s: dropped anchor naming unknown variables %s", seed.seed_id, unknown)
        return None
    condition = response.get("condition") or ""
    summary = response["evidence_summary"]
    if condition:
        summary = f"{summary}; condition: {condition}"
    return PerformanceAnchor(
        anchor_id=anchor_id_for(anchor_type, variables, seed.stroke_type,
                                seed.training_phase),
        anchor_type=anchor_type,
        anchor_variables=variables,
        data_category=_anchor_data_category(anchor_type),
        stroke_type=seed.stroke_type,
        training_phase=seed.training_phase,
        evidence_summary=summary,
    )


def dedupe_anchors(anchors: Sequence[PerformanceAnchor]) -> list[PerformanceAnchor]:
    """Keep the first occurrence per identity key, preserving order."""
    seen: set[tuple] = set()
    unique: list[PerformanceAnchor] = []
    for anchor in anchors:
        key = anchor.dedup_key()
        if key not in seen:
            seen.add(key)
            unique.append(anchor)
    return unique


@dataclass
class ArchitectSummary:
    seeds_total: int = 0
    seeds_processed: int = 0
    seeds_failed: int = 0
    anchors_raw: int = 0
    anchors_unique: int = 0
    conversion_rate_pct: float = 0.0
    anchors_path: str = ""
    resumed: bool = False

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def conversion_rate_pct(unique_anchors: int, seeds: int) -> float:
    return round(100.0 * unique_anchors / seeds, 1) if seeds else 0.0


def run_architect(seeds: Sequence[QuerySeed], out_dir: str | os.PathLike,
                  table: Optional[AnalysisTable] = None,
                  provider: Optional[CompletionProvider] = None,
                  digest_for_seed: Optional[Callable[[QuerySeed], str]] = None,
                  thresholds: ThresholdConfig = ThresholdConfig(),
                  on_seed: Optional[Callable[[str], None]] = None) -> ArchitectSummary:
    """Process the seed library with per-seed checkpointing.

    The statistical path runs whenever a table is supplied; the provider
    path runs additionally when a provider is supplied. A failing seed is
    recorded and never halts the run. The deduplicated anchors land in
    performance_anchors.json once every seed has been processed.
    """
    if table is None and provider is None:
        raise SeedConfigError("need an analysis table, a provider, or both")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checkpoint_path = out / CHECKPOINT_FILENAME
    anchors_path = out / ANCHORS_FILENAME

    checkpoint = read_json_optional(str(checkpoint_path)) or {}
    processed: dict[str, bool] = dict(checkpoint.get("processed", {}))
    raw_anchors: list[dict] = list(checkpoint.get("anchors", []))
    summary = ArchitectSummary(seeds_total=len(seeds), anchors_path=str(anchors_path),
                               resumed=bool(processed))

    for seed in seeds:
        if seed.seed_id in processed:
            continue
        failed = False
        found: list[PerformanceAnchor] = []
        if table is not None:
            anchor = detect_anchor_statistical(seed, table, thresholds)
            if anchor is not None:
                found.append(anchor)
        if provider is not None:
            digest = digest_for_seed(seed) if digest_for_seed else ""
            try:
                anchor = identify_anchor_llm(seed, digest, provider)
                if anchor is not None:
                    found.append(anchor)
            except ProviderError as exc:
                logger.warning("%s: provider path failed (%s); seed skipped",
                               seed.seed_id, exc)
                failed = True
        raw_anchors.extend(a.to_dict() for a in found)
        processed[seed.seed_id] = not failed
        write_json_atomic(str(checkpoint_path), {
            "processed": processed,
            "anchors": raw_anchors,
        })
        if on_seed is not None:
            on_seed(seed.seed_id)

    unique = dedupe_anchors([PerformanceAnchor.from_dict(a) for a in raw_anchors])
    write_json_atomic(str(anchors_path), [a.to_dict() for a in unique])

    summary.seeds_processed = len(processed)
    summary.seeds_failed = sum(1 for ok in processed.values() if not ok)
    summary.anchors_raw = len(raw_anchors)
    summary.anchors_unique = len(unique)
    summary.conversion_rate_pct = conversion_rate_pct(len(unique), len(seeds))
    return summary


def load_anchors(path: str | os.PathLike) -> list[PerformanceAnchor]:
    import json

    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    return [PerformanceAnchor.from_dict(item) for item in data]
