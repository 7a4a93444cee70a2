"""Seed library enumeration and anchor detection, statistical and provider paths."""

from __future__ import annotations

import json
from collections import Counter
from itertools import product
from pathlib import Path

import numpy as np
import pytest

from swimcorpus.architect import (
    ANCHOR_VARIABLE_FAMILIES,
    AnalysisTable,
    AnchorEvidence,
    FACTORIAL_PHASES,
    FACTORIAL_STROKES,
    QuerySeed,
    SeedConfigError,
    SeedKind,
    SeedLibraryConfig,
    anchor_id_for,
    best_family_correlation,
    build_seed_library,
    candidate_pairs,
    conversion_rate_pct,
    dedupe_anchors,
    detect_anchor_statistical,
    identify_anchor_llm,
    load_anchors,
    pearson_r,
    run_architect,
)
from swimcorpus.fixtures import (
    PLANTED_FATIGUE_PAIR,
    PLANTED_STROKE_PAIR,
    write_noise_analysis_table,
)
from swimcorpus.models import (
    AnchorType,
    ComplexityLevel,
    DataCategory,
    KNOWN_VARIABLES,
    PerformanceAnchor,
    StrokeType,
    ThresholdConfig,
    TrainingPhase,
)
from swimcorpus.providers import ScriptedProvider

THRESHOLDS = ThresholdConfig()


def _seed(anchor_type=AnchorType.FATIGUE_KINEMATIC, stroke=StrokeType.GENERAL,
          phase=TrainingPhase.GENERAL, targets=(), seed_id="seed-t-0001") -> QuerySeed:
    return QuerySeed(seed_id=seed_id, seed_kind=SeedKind.DATA_TARGETED,
                     anchor_type=anchor_type, stroke_type=stroke,
                     training_phase=phase, complexity_level=ComplexityLevel.MEDIUM,
                     target_variables=tuple(targets))


def _anchor(variables=("fatigue_score", "imu3_acc_z"),
            anchor_type=AnchorType.FATIGUE_KINEMATIC,
            stroke=StrokeType.GENERAL, phase=TrainingPhase.GENERAL,
            summary="planted") -> PerformanceAnchor:
    return PerformanceAnchor(
        anchor_id=anchor_id_for(anchor_type, variables, stroke, phase),
        anchor_type=anchor_type, anchor_variables=tuple(variables),
        data_category=DataCategory.PHYSIOLOGICAL, stroke_type=stroke,
        training_phase=phase, evidence_summary=summary)


# --- seed library ---------------------------------------------------------------

def test_default_library_has_950_seeds_in_three_blocks():
    seeds = build_seed_library()
    kinds = Counter(s.seed_kind for s in seeds)
    assert len(seeds) == 950
    assert kinds[SeedKind.FACTORIAL] == 270
    assert kinds[SeedKind.RULE_SPECIFIC] == 66
    assert kinds[SeedKind.DATA_TARGETED] == 614
    assert len({s.seed_id for s in seeds}) == 950


def test_factorial_block_covers_the_full_cross_product_exactly_once():
    seeds = [s for s in build_seed_library() if s.seed_kind is SeedKind.FACTORIAL]
    combos = Counter(
        (s.anchor_type, s.stroke_type, s.training_phase, s.complexity_level)
        for s in seeds)
    expected = set(product(AnchorType, FACTORIAL_STROKES, FACTORIAL_PHASES,
                           ComplexityLevel))
    assert set(combos) == expected
    assert all(count == 1 for count in combos.values())
    assert not any(s.target_variables for s in seeds)


def test_rule_seeds_cycle_primary_variables_in_a_general_stratum():
    seeds = [s for s in build_seed_library() if s.seed_kind is SeedKind.RULE_SPECIFIC]
    assert all(s.stroke_type is StrokeType.GENERAL for s in seeds)
    assert all(s.training_phase is TrainingPhase.GENERAL for s in seeds)
    assert all(s.complexity_level is ComplexityLevel.MEDIUM for s in seeds)
    assert all(len(s.target_variables) == 1 for s in seeds)
    # 15 (rule, variable) pairs cycle, so seed j and seed j+15 share a target.
    assert seeds[0].target_variables == seeds[15].target_variables
    assert seeds[0].target_variables == ("fatigue_score",)


def test_data_seeds_walk_sorted_variables_over_the_stratum_grid():
    seeds = [s for s in build_seed_library() if s.seed_kind is SeedKind.DATA_TARGETED]
    first_var = sorted(KNOWN_VARIABLES)[0]
    assert seeds[0].target_variables == (first_var,)
    assert seeds[0].stroke_type is FACTORIAL_STROKES[0]
    assert seeds[0].training_phase is TrainingPhase.GENERAL
    # 11 strata per variable: six per-stroke plus five per-phase.
    assert seeds[10].target_variables == (first_var,)
    assert seeds[11].target_variables != (first_var,)


def test_oversized_data_count_is_capped_at_the_combination_grid():
    grid = len(KNOWN_VARIABLES) * (len(FACTORIAL_STROKES) + len(FACTORIAL_PHASES))
    seeds = build_seed_library(SeedLibraryConfig(data_targeted_count=10_000))
    data = [s for s in seeds if s.seed_kind is SeedKind.DATA_TARGETED]
    assert len(data) == grid


def test_seed_library_is_deterministic():
    assert build_seed_library() == build_seed_library()


def test_negative_seed_counts_are_rejected():
    with pytest.raises(SeedConfigError):
        SeedLibraryConfig(rule_specific_count=-1)


# --- correlation ------------------------------------------------------------------

def test_pearson_matches_numpy_on_random_series():
    rng = np.random.default_rng(11)
    for _ in range(20):
        xs = rng.normal(size=50).tolist()
        ys = (rng.normal(size=50) + 0.4 * np.asarray(xs)).tolist()
        expected = float(np.corrcoef(xs, ys)[0, 1])
        assert pearson_r(xs, ys) == pytest.approx(expected, abs=1e-12)


def test_pearson_degenerate_inputs():
    assert pearson_r([1.0], [2.0]) is None
    assert pearson_r([1.0, 1.0, 1.0], [1.0, 2.0, 3.0]) is None
    assert pearson_r([1.0, 2.0, 3.0], [5.0, 5.0, 5.0]) is None
    with pytest.raises(ValueError):
        pearson_r([1.0, 2.0], [1.0])


def test_anchor_evidence_rejects_impossible_values():
    with pytest.raises(ValueError):
        AnchorEvidence(variable_pair=("a", "b"), correlation=1.2, n=30)
    with pytest.raises(ValueError):
        AnchorEvidence(variable_pair=("a", "b"), correlation=0.8, n=0)
    evidence = AnchorEvidence(variable_pair=("a", "b"), correlation=-0.75, n=30,
                              condition="Freestyle only")
    assert "n=30" in evidence.summary()
    assert "condition: Freestyle only" in evidence.summary()


# --- statistical detection ---------------------------------------------------------

def test_planted_linear_pair_is_the_strongest_fatigue_anchor(fixture_paths):
    table = AnalysisTable.from_csv(fixture_paths.analysis_table)
    evidence = best_family_correlation(_seed(), table, THRESHOLDS)
    assert evidence is not None
    assert evidence.variable_pair == PLANTED_FATIGUE_PAIR
    assert evidence.correlation == pytest.approx(-1.0, abs=1e-9)
    assert evidence.n == len(table)


def test_planted_stroke_pair_fires_only_inside_freestyle(fixture_paths):
    table = AnalysisTable.from_csv(fixture_paths.analysis_table)
    by_stroke = {}
    for stroke in (StrokeType.FREESTYLE, StrokeType.BACKSTROKE,
                   StrokeType.BREASTSTROKE, StrokeType.BUTTERFLY, StrokeType.IM):
        seed = _seed(anchor_type=AnchorType.STROKE_EFFICIENCY, stroke=stroke)
        by_stroke[stroke] = detect_anchor_statistical(seed, table, THRESHOLDS)
    assert by_stroke[StrokeType.FREESTYLE] is not None
    assert by_stroke[StrokeType.FREESTYLE].anchor_variables == PLANTED_STROKE_PAIR
    for stroke, anchor in by_stroke.items():
        if stroke is not StrokeType.FREESTYLE:
            assert anchor is None


def test_noise_table_produces_no_anchors_for_the_full_library(tmp_path):
    table = AnalysisTable.from_csv(write_noise_analysis_table(tmp_path / "noise.csv"))
    fired = [seed.seed_id for seed in build_seed_library()
             if detect_anchor_statistical(seed, table, THRESHOLDS) is not None]
    assert fired == []


def test_detection_requires_the_minimum_sample_size(tmp_path):
    def write_table(path: Path, rows: int) -> AnalysisTable:
        lines = ["athlete_id,stroke_type,training_phase,fatigue_score,imu3_acc_z"]
        for i in range(rows):
            fatigue = 2.0 + (i % 17) * 0.45
            lines.append(f"s{i:03d},Freestyle,Base,{fatigue},{10.0 - fatigue}")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return AnalysisTable.from_csv(path)

    small = write_table(tmp_path / "small.csv", THRESHOLDS.anchor_min_n - 1)
    assert detect_anchor_statistical(_seed(), small, THRESHOLDS) is None
    enough = write_table(tmp_path / "enough.csv", THRESHOLDS.anchor_min_n)
    anchor = detect_anchor_statistical(_seed(), enough, THRESHOLDS)
    assert anchor is not None
    assert anchor.anchor_variables == ("fatigue_score", "imu3_acc_z")


def test_candidate_pairs_filter_by_target_variables():
    untargeted = _seed(anchor_type=AnchorType.LOAD_PERFORMANCE)
    lefts, rights = ANCHOR_VARIABLE_FAMILIES[AnchorType.LOAD_PERFORMANCE]
    assert len(candidate_pairs(untargeted)) == len(lefts) * len(rights)
    targeted = _seed(anchor_type=AnchorType.LOAD_PERFORMANCE, targets=("vo2max",))
    pairs = candidate_pairs(targeted)
    assert pairs
    assert all("vo2max" in pair for pair in pairs)


def test_anchor_identity_ignores_variable_order():
    a = anchor_id_for(AnchorType.FATIGUE_KINEMATIC, ("hrv", "imu1_acc_x"),
                      StrokeType.GENERAL, TrainingPhase.GENERAL)
    b = anchor_id_for(AnchorType.FATIGUE_KINEMATIC, ("imu1_acc_x", "hrv"),
                      StrokeType.GENERAL, TrainingPhase.GENERAL)
    assert a == b
    assert a.startswith("anc-") and len(a) == 14


# --- dedupe -------------------------------------------------------------------------

def test_dedupe_keeps_the_first_of_each_identity():
    anchors = []
    for i in range(120):
        stroke = FACTORIAL_STROKES[i % 4]
        phase = FACTORIAL_PHASES[(i // 4) % 5]
        variables = ("fatigue_score", f"imu{(i // 20) % 2 + 1}_acc_x")
        anchors.append(_anchor(variables=variables, stroke=stroke, phase=phase,
                               summary=f"raw-{i:03d}"))
    unique = dedupe_anchors(anchors)
    assert len(unique) == len({a.dedup_key() for a in anchors})
    assert unique[0].evidence_summary == "raw-000"
    seen_keys = [a.dedup_key() for a in unique]
    assert len(seen_keys) == len(set(seen_keys))


def test_dedupe_treats_variable_order_as_irrelevant():
    first = _anchor(variables=("hrv", "imu1_acc_x"), summary="first")
    flipped = _anchor(variables=("imu1_acc_x", "hrv"), summary="second")
    unique = dedupe_anchors([first, flipped])
    assert len(unique) == 1
    assert unique[0].evidence_summary == "first"


# --- provider path -------------------------------------------------------------------

def _anchor_response(**overrides):
    response = {
        "anchor_type": AnchorType.FATIGUE_KINEMATIC.value,
        "anchor_variables": ["fatigue_score", "imu3_acc_z"],
        "evidence_summary": "Inverse co-movement in the weekly digest.",
        "condition": None,
    }
    response.update(overrides)
    return response


def test_identify_anchor_llm_builds_a_typed_anchor():
    seed = _seed(seed_id="seed-d-0042")
    provider = ScriptedProvider({("Architect", "seed-d-0042"): _anchor_response(
        condition="during high-volume weeks")})
    anchor = identify_anchor_llm(seed, "digest text", provider)
    assert anchor is not None
    assert anchor.anchor_variables == ("fatigue_score", "imu3_acc_z")
    assert anchor.evidence_summary.endswith("condition: during high-volume weeks")
    assert anchor.data_category is DataCategory.PHYSIOLOGICAL


def test_identify_anchor_llm_drops_unknown_types_and_variables():
    seed = _seed(seed_id="seed-d-0042")
    bad_type = ScriptedProvider({("Architect", "seed-d-0042"):
                                 _anchor_response(anchor_type="Astrology")})
    assert identify_anchor_llm(seed, "", bad_type) is None
    bad_var = ScriptedProvider({("Architect", "seed-d-0042"):
                                _anchor_response(anchor_variables=["fatigue_score",
                                                                   "mood_ring"])})
    assert identify_anchor_llm(seed, "", bad_var) is None


# --- the architect run ----------------------------------------------------------------

def _planted_seeds(count: int = 12) -> list[QuerySeed]:
    seeds = [s for s in build_seed_library() if s.seed_kind is SeedKind.FACTORIAL
             and s.anchor_type is AnchorType.FATIGUE_KINEMATIC]
    return seeds[:count]


def test_run_architect_needs_a_table_or_a_provider(tmp_path):
    with pytest.raises(SeedConfigError):
        run_architect(_planted_seeds(2), tmp_path)


def test_run_architect_writes_deduped_anchors_and_summary(fixture_paths, tmp_path):
    table = AnalysisTable.from_csv(fixture_paths.analysis_table)
    seeds = _planted_seeds()
    summary = run_architect(seeds, tmp_path / "runA", table=table)
    assert summary.seeds_total == len(seeds)
    assert summary.seeds_processed == len(seeds)
    assert summary.seeds_failed == 0
    assert summary.anchors_unique <= summary.anchors_raw
    assert summary.conversion_rate_pct == conversion_rate_pct(
        summary.anchors_unique, len(seeds))
    loaded = load_anchors(summary.anchors_path)
    assert len(loaded) == summary.anchors_unique
    keys = [a.dedup_key() for a in loaded]
    assert len(keys) == len(set(keys))


def test_run_architect_resumes_after_a_kill_with_identical_output(fixture_paths,
                                                                  tmp_path):
    table = AnalysisTable.from_csv(fixture_paths.analysis_table)
    seeds = _planted_seeds()
    reference = run_architect(seeds, tmp_path / "ref", table=table)
    reference_bytes = Path(reference.anchors_path).read_bytes()

    crash_dir = tmp_path / "crash"
    killed_at = 5

    class Kill(Exception):
        pass

    done: list[str] = []

    def on_seed(seed_id: str) -> None:
        done.append(seed_id)
        if len(done) == killed_at:
            raise Kill()

    with pytest.raises(Kill):
        run_architect(seeds, crash_dir, table=table, on_seed=on_seed)
    assert len(done) == killed_at

    resumed_ids: list[str] = []
    summary = run_architect(seeds, crash_dir, table=table,
                            on_seed=resumed_ids.append)
    assert summary.resumed is True
    assert resumed_ids == [s.seed_id for s in seeds[killed_at:]]
    assert Path(summary.anchors_path).read_bytes() == reference_bytes
    assert summary.anchors_unique == reference.anchors_unique


def test_run_architect_records_provider_failures_and_continues(tmp_path):
    seeds = [_seed(seed_id=f"seed-d-{i:04d}") for i in range(1, 4)]
    provider = ScriptedProvider({
        ("Architect", "seed-d-0001"): _anchor_response(),
        ("Architect", "seed-d-0003"): _anchor_response(
            anchor_variables=["hrv", "imu7_acc_x"]),
    })
    summary = run_architect(seeds, tmp_path, provider=provider)
    assert summary.seeds_processed == 3
    assert summary.seeds_failed == 1
    assert summary.anchors_unique == 2
    checkpoint = json.loads((tmp_path / "architect_checkpoint.json").read_text())
    assert checkpoint["processed"]["seed-d-0002"] is False


def test_conversion_rate_rounding():
    assert conversion_rate_pct(88, 950) == 9.3
    assert conversion_rate_pct(0, 950) == 0.0
    assert conversion_rate_pct(5, 0) == 0.0
