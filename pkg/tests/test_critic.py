"""Soundness rules, regeneration loop, and the validation runner."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from builders import (
    SAFE_CONTEXT,
    failing_verdict,
    make_annotation,
    make_athlete,
    make_triplet,
    revision_response,
)
from swimcorpus.critic import (
    ContractViolationError,
    DEFAULT_ZONE_BANDS,
    EvaluationError,
    RuleContext,
    TableRuleContextResolver,
    evaluate,
    regenerate,
    run_validation,
    summarize_counts,
    validate_one,
)
from swimcorpus.jsonl import append_corpus, iter_jsonl, read_corpus
from swimcorpus.models import (
    CriticVerdict,
    FinalStatus,
    IntensityZone,
    RuleId,
    ThresholdConfig,
    TrainingPhase,
    VolumeClass,
)
from swimcorpus.providers import ScriptedProvider

SAFE_ANSWER = "Keep the work easy and aerobic until the markers recover."


def _rc(athlete=None, annotation=None, phase=TrainingPhase.BUILD,
        answer=SAFE_ANSWER, context=SAFE_CONTEXT, **overrides) -> RuleContext:
    return RuleContext(
        athlete=athlete or make_athlete(),
        phase=phase,
        annotation=annotation or make_annotation(),
        context_text=context,
        answer_text=answer,
        vo2max_tertiles=overrides.pop("vo2max_tertiles", (50.0, 60.0)),
        adaptation_p75=overrides.pop("adaptation_p75", 8.0),
        **overrides,
    )


# One hand-built fixture per rule, plus one carrying a dual violation.
# Every fixture must trigger its intended rules and nothing else.
GOLDEN_FIXTURES: dict[str, tuple[RuleContext, frozenset[RuleId]]] = {
    "F1_high_intensity_on_fatigue": (
        _rc(athlete=make_athlete(fatigue_score=7.5),
            annotation=make_annotation(IntensityZone.VO2MAX)),
        frozenset({RuleId.F1})),
    "F2_session_inside_recovery_window": (
        _rc(annotation=make_annotation(next_session_in_hr=12.0)),
        frozenset({RuleId.F2})),
    "F3_rest_only_despite_adaptation": (
        _rc(athlete=make_athlete(fatigue_score=8.0, adaptation_pct=9.0),
            annotation=make_annotation(IntensityZone.RECOVERY,
                                       prescribes_rest_only=True)),
        frozenset({RuleId.F3})),
    "I1_zone_above_capacity_band": (
        _rc(athlete=make_athlete(vo2max=45.0),
            annotation=make_annotation(IntensityZone.VO2MAX)),
        frozenset({RuleId.I1})),
    "I2_load_without_deload": (
        _rc(athlete=make_athlete(training_load_au=900.0)),
        frozenset({RuleId.I2})),
    "I3_high_intensity_on_suppressed_hrv": (
        _rc(athlete=make_athlete(hrv=65.0),
            annotation=make_annotation(IntensityZone.VO2MAX)),
        frozenset({RuleId.I3})),
    "P1_high_volume_in_taper": (
        _rc(phase=TrainingPhase.TAPER,
            annotation=make_annotation(volume_class=VolumeClass.HIGH)),
        frozenset({RuleId.P1})),
    "P2_race_pace_in_base": (
        _rc(phase=TrainingPhase.BASE,
            annotation=make_annotation(IntensityZone.RACE_PACE)),
        frozenset({RuleId.P2})),
    "P3_threshold_in_recovery": (
        _rc(phase=TrainingPhase.RECOVERY,
            annotation=make_annotation(IntensityZone.THRESHOLD)),
        frozenset({RuleId.P3})),
    "B1_drill_on_degraded_stroke": (
        _rc(athlete=make_athlete(stroke_prob=0.45),
            annotation=make_annotation(prescribes_drill=True)),
        frozenset({RuleId.B1})),
    "B2_drill_targets_nominal_segment": (
        _rc(annotation=make_annotation(prescribes_drill=True,
                                       targeted_segments=(3,)),
            segment_z={3: 0.8}),
        frozenset({RuleId.B2})),
    "L1_contradictory_directives": (
        _rc(answer="Increase intensity through Thursday, then reduce "
                   "intensity sharply before the meet."),
        frozenset({RuleId.L1})),
    "L2_ungrounded_figure": (
        _rc(answer="Aim for 59.2 seconds on the main set."),
        frozenset({RuleId.L2})),
    "dual_F1_I2": (
        _rc(athlete=make_athlete(fatigue_score=7.6, training_load_au=900.0),
            annotation=make_annotation(IntensityZone.VO2MAX)),
        frozenset({RuleId.F1, RuleId.I2})),
}


def test_golden_fixture_census():
    assert len(GOLDEN_FIXTURES) == 14
    singles = [expected for _, expected in GOLDEN_FIXTURES.values()
               if len(expected) == 1]
    assert {next(iter(rules)) for rules in singles} == set(RuleId)


@pytest.mark.parametrize("name", list(GOLDEN_FIXTURES))
def test_golden_fixture_triggers_exactly_its_rules(name):
    rc, expected = GOLDEN_FIXTURES[name]
    verdict = evaluate(make_triplet(), rc)
    assert verdict.passed is (not expected)
    assert {v.rule_id for v in verdict.violations} == expected


def test_clean_context_passes_every_rule():
    verdict = evaluate(make_triplet(), _rc(), iteration_count=2)
    assert verdict.passed is True
    assert verdict.violations == ()
    assert verdict.critic_rejection_reason == ""
    assert verdict.iteration_count == 2


# --- threshold boundaries ---------------------------------------------------------

def test_fatigue_boundary_is_strictly_greater_than():
    at = _rc(athlete=make_athlete(fatigue_score=7.0),
             annotation=make_annotation(IntensityZone.VO2MAX))
    assert evaluate(make_triplet(), at).passed is True
    above = _rc(athlete=make_athlete(fatigue_score=7.0 + 1e-9),
                annotation=make_annotation(IntensityZone.VO2MAX))
    assert {v.rule_id for v in evaluate(make_triplet(), above).violations} \
        == {RuleId.F1}


def test_stroke_prob_boundary_is_strictly_less_than():
    at = _rc(athlete=make_athlete(stroke_prob=0.6),
             annotation=make_annotation(prescribes_drill=True))
    assert evaluate(make_triplet(), at).passed is True
    below = _rc(athlete=make_athlete(stroke_prob=0.6 - 1e-9),
                annotation=make_annotation(prescribes_drill=True))
    assert {v.rule_id for v in evaluate(make_triplet(), below).violations} \
        == {RuleId.B1}


def test_hrv_boundary_requires_more_than_fifteen_percent_suppression():
    # Baseline 82.0: the floor is exactly 82 * 0.85 = 69.7.
    at = _rc(athlete=make_athlete(hrv=82.0 * 0.85),
             annotation=make_annotation(IntensityZone.VO2MAX))
    assert evaluate(make_triplet(), at).passed is True
    below = _rc(athlete=make_athlete(hrv=82.0 * 0.85 - 1e-6),
                annotation=make_annotation(IntensityZone.VO2MAX))
    assert {v.rule_id for v in evaluate(make_triplet(), below).violations} \
        == {RuleId.I3}


# --- evaluation mechanics ----------------------------------------------------------

def test_violations_report_in_rule_order_with_a_joined_summary():
    rc, _ = GOLDEN_FIXTURES["dual_F1_I2"]
    verdict = evaluate(make_triplet(), rc)
    assert [v.rule_id for v in verdict.violations] == [RuleId.F1, RuleId.I2]
    f1_part, i2_part = verdict.critic_rejection_reason.split("; ", 1)
    assert f1_part.startswith("F1: ")
    assert i2_part.startswith("I2: ")


def test_evaluation_is_deterministic():
    rc, _ = GOLDEN_FIXTURES["dual_F1_I2"]
    assert evaluate(make_triplet(), rc) == evaluate(make_triplet(), rc)


def test_missing_population_statistics_raise():
    with pytest.raises(EvaluationError):
        evaluate(make_triplet(), _rc(vo2max_tertiles=None))
    hot = _rc(athlete=make_athlete(fatigue_score=8.0), adaptation_p75=None)
    with pytest.raises(EvaluationError):
        evaluate(make_triplet(), hot)


def test_targeted_segment_without_z_data_raises():
    rc = _rc(annotation=make_annotation(prescribes_drill=True,
                                        targeted_segments=(7,)),
             segment_z={3: 2.5})
    with pytest.raises(EvaluationError):
        evaluate(make_triplet(), rc)


def test_zone_bands_follow_the_capacity_tertiles():
    low = _rc(athlete=make_athlete(vo2max=50.0))  # at q1 -> low band
    assert low.allowed_zones() == DEFAULT_ZONE_BANDS["low"]
    mid = _rc(athlete=make_athlete(vo2max=60.0))  # at q2 -> mid band
    assert mid.allowed_zones() == DEFAULT_ZONE_BANDS["mid"]
    high = _rc(athlete=make_athlete(vo2max=60.0 + 1e-9))
    assert high.allowed_zones() == DEFAULT_ZONE_BANDS["high"]


# --- regeneration -------------------------------------------------------------------

def _failing_draft(triplet_id="tri-test-0001"):
    return make_triplet(
        triplet_id=triplet_id,
        annotation=make_annotation(IntensityZone.VO2MAX),
        expected_output="Push a maximal-aerobic interval set tomorrow.")


def test_regenerate_guards_its_preconditions():
    draft = _failing_draft()
    with pytest.raises(ValueError):
        regenerate(draft, CriticVerdict(passed=True), ScriptedProvider())
    with pytest.raises(ValueError):
        regenerate(draft, failing_verdict(RuleId.F1, iteration_count=3),
                   ScriptedProvider())


def test_regenerate_applies_the_revision_and_increments_iteration():
    draft = _failing_draft()
    verdict = failing_verdict(RuleId.F1)
    provider = ScriptedProvider({
        ("Regenerator", "tri-test-0001#regen1"):
            revision_response("Hold easy aerobic swimming instead."),
    })
    revised = regenerate(draft, verdict, provider)
    assert revised.expected_output == "Hold easy aerobic swimming instead."
    assert revised.annotation.intensity_zone is IntensityZone.EASY_AEROBIC
    assert revised.critic_verdict.iteration_count == 1
    assert revised.critic_verdict.violations == verdict.violations
    for field_name in ("triplet_id", "query", "context", "persona", "query_type"):
        assert getattr(revised, field_name) == getattr(draft, field_name)


def test_regenerate_rejects_mutated_immutable_fields():
    draft = _failing_draft()
    tampered = revision_response("Rewrites the brief.")
    tampered["query"] = "A different question entirely?"
    provider = ScriptedProvider({("Regenerator", "tri-test-0001#regen1"): tampered})
    with pytest.raises(ContractViolationError):
        regenerate(draft, failing_verdict(RuleId.F1), provider)


def test_regenerate_allows_faithfully_echoed_immutables():
    draft = _failing_draft()
    echoed = revision_response("Hold easy aerobic swimming instead.")
    echoed["query"] = draft.query
    provider = ScriptedProvider({("Regenerator", "tri-test-0001#regen1"): echoed})
    assert regenerate(draft, failing_verdict(RuleId.F1), provider) is not None


# --- the judge-regenerate loop ------------------------------------------------------

def test_validate_one_accepts_a_clean_draft_directly():
    draft = make_triplet(context=SAFE_CONTEXT, expected_output=SAFE_ANSWER)
    rc = _rc(annotation=draft.annotation)
    final, outcome, initial = validate_one(draft, rc, None, ThresholdConfig())
    assert outcome == "direct"
    assert initial.passed is True
    assert final.final_status is FinalStatus.AUTO_ACCEPTED
    assert final.critic_verdict.iteration_count == 0
    assert final.annotation is None


def test_validate_one_recovers_a_fixable_draft():
    draft = _failing_draft()
    rc = _rc(athlete=make_athlete(fatigue_score=7.5), annotation=draft.annotation,
             answer=draft.expected_output)
    provider = ScriptedProvider({
        ("Regenerator", "tri-test-0001#regen1"): revision_response(SAFE_ANSWER),
    })
    final, outcome, initial = validate_one(draft, rc, provider, ThresholdConfig())
    assert outcome == "regenerated"
    assert {v.rule_id for v in initial.violations} == {RuleId.F1}
    assert final.final_status is FinalStatus.AUTO_ACCEPTED
    assert final.critic_verdict.passed is True
    assert final.critic_verdict.iteration_count == 1
    assert final.expected_output == SAFE_ANSWER


def test_validate_one_escalates_at_exactly_the_ceiling():
    draft = _failing_draft()
    rc = _rc(athlete=make_athlete(fatigue_score=7.5), annotation=draft.annotation,
             answer=draft.expected_output)
    stubborn = revision_response(
        "Push a maximal-aerobic interval set tomorrow.", IntensityZone.VO2MAX)
    provider = ScriptedProvider({("Regenerator", "*"): stubborn})
    final, outcome, _ = validate_one(draft, rc, provider, ThresholdConfig())
    assert outcome == "hitl"
    assert final.final_status is FinalStatus.HITL_PENDING
    assert final.critic_verdict.iteration_count == 3
    assert final.critic_verdict.passed is False


def test_validate_one_without_a_provider_escalates_immediately():
    draft = _failing_draft()
    rc = _rc(athlete=make_athlete(fatigue_score=7.5), annotation=draft.annotation,
             answer=draft.expected_output)
    final, outcome, _ = validate_one(draft, rc, None, ThresholdConfig())
    assert outcome == "hitl"
    assert final.critic_verdict.iteration_count == 0


def test_validate_one_escalates_when_regeneration_itself_fails():
    draft = _failing_draft()
    rc = _rc(athlete=make_athlete(fatigue_score=7.5), annotation=draft.annotation,
             answer=draft.expected_output)
    final, outcome, _ = validate_one(draft, rc, ScriptedProvider(), ThresholdConfig())
    assert outcome == "hitl"
    assert "regeneration failed:" in final.critic_verdict.critic_rejection_reason
    assert final.critic_verdict.iteration_count == 0


# --- bookkeeping arithmetic -----------------------------------------------------------

def test_summarize_counts_reproduces_published_style_rates():
    rates = summarize_counts(1675, 189, 50)
    assert rates["total"] == 1914.0
    assert rates["accepted"] == 1864.0
    assert rates["acceptance_rate_pct"] == 97.4
    assert rates["recovery_rate_pct"] == 79.1


def test_summarize_counts_degenerate_denominators():
    assert summarize_counts(0, 0, 0)["acceptance_rate_pct"] == 0.0
    assert summarize_counts(5, 0, 0)["recovery_rate_pct"] == 0.0
    assert summarize_counts(0, 3, 1)["recovery_rate_pct"] == 75.0


# --- the validation runner ------------------------------------------------------------

RAISING_ID_PREFIX = "tri-norc-"


def _static_resolver(triplet):
    if triplet.triplet_id.startswith(RAISING_ID_PREFIX):
        raise EvaluationError("athlete.fatigue_score")
    return _rc(athlete=make_athlete(fatigue_score=7.5))


def _write_drafts(path, clean=6, fixable=2, unresolvable=2):
    ids = []
    for i in range(clean):
        triplet_id = f"tri-ok-{i:04d}"
        append_corpus(str(path), make_triplet(
            triplet_id=triplet_id, context=SAFE_CONTEXT, expected_output=SAFE_ANSWER))
        ids.append(triplet_id)
    for i in range(fixable):
        triplet_id = f"tri-bad-{i:04d}"
        append_corpus(str(path), _failing_draft(triplet_id))
        ids.append(triplet_id)
    for i in range(unresolvable):
        triplet_id = f"{RAISING_ID_PREFIX}{i:04d}"
        append_corpus(str(path), make_triplet(
            triplet_id=triplet_id, context=SAFE_CONTEXT, expected_output=SAFE_ANSWER))
        ids.append(triplet_id)
    return ids


def _fixing_provider():
    return ScriptedProvider({("Regenerator", "*"): revision_response(SAFE_ANSWER)})


def test_run_validation_routes_every_draft_exactly_once(tmp_path):
    drafts = tmp_path / "drafts.jsonl"
    all_ids = _write_drafts(drafts)
    report = run_validation(drafts, tmp_path / "out", _static_resolver,
                            provider=_fixing_provider())
    assert report.total == 10
    assert report.direct_accepts == 6
    assert report.regenerated_accepts == 2
    assert report.hitl_count == 2
    assert report.acceptance_rate_pct == 80.0
    assert report.recovery_rate_pct == 50.0
    assert report.rule_counts == {"F1": 2, "L1": 2}

    validated = list(read_corpus(report.validated_path))
    hitl = list(read_corpus(report.hitl_path))
    assert len(validated) + len(hitl) == len(all_ids)
    out_ids = {t.triplet_id for t in validated} | {t.triplet_id for t in hitl}
    assert out_ids == set(all_ids)
    assert not ({t.triplet_id for t in validated} & {t.triplet_id for t in hitl})
    assert all(t.final_status is FinalStatus.AUTO_ACCEPTED for t in validated)
    assert all(t.final_status is FinalStatus.HITL_PENDING for t in hitl)

    # serialized records never carry the draft-only annotation sidecar
    for line in Path(report.validated_path).read_text().splitlines():
        assert "annotation" not in json.loads(line)


def test_run_validation_emits_one_event_per_draft(tmp_path):
    drafts = tmp_path / "drafts.jsonl"
    all_ids = _write_drafts(drafts)
    run_validation(drafts, tmp_path / "out", _static_resolver,
                   provider=_fixing_provider())
    events = [e for _, e in iter_jsonl(str(tmp_path / "out" /
                                           "validation_events.jsonl"))]
    assert [e["triplet_id"] for e in events] == all_ids
    by_id = {e["triplet_id"]: e for e in events}
    assert by_id["tri-ok-0000"]["outcome"] == "direct"
    assert by_id["tri-bad-0000"]["outcome"] == "regenerated"
    assert by_id["tri-bad-0000"]["iteration_count"] == 1
    failure_event = by_id[f"{RAISING_ID_PREFIX}0000"]
    assert failure_event["outcome"] == "hitl"
    assert "athlete.fatigue_score" in failure_event["rc_failure"]


def test_run_validation_escalation_reason_names_the_missing_context(tmp_path):
    drafts = tmp_path / "drafts.jsonl"
    _write_drafts(drafts, clean=0, fixable=0, unresolvable=1)
    report = run_validation(drafts, tmp_path / "out", _static_resolver)
    hitl = list(read_corpus(report.hitl_path))
    assert len(hitl) == 1
    reason = hitl[0].critic_verdict.critic_rejection_reason
    assert reason.startswith("rule context unavailable:")


def test_run_validation_resumes_to_identical_bytes(tmp_path):
    drafts = tmp_path / "drafts.jsonl"
    _write_drafts(drafts)
    thresholds = ThresholdConfig(checkpoint_interval_triplets=3)

    ref_dir = tmp_path / "ref"
    run_validation(drafts, ref_dir, _static_resolver,
                   provider=_fixing_provider(), thresholds=thresholds)

    class Kill(Exception):
        pass

    seen: list[str] = []

    def killer(triplet_id: str) -> None:
        seen.append(triplet_id)
        if len(seen) == 4:
            raise Kill()

    crash_dir = tmp_path / "crash"
    with pytest.raises(Kill):
        run_validation(drafts, crash_dir, _static_resolver,
                       provider=_fixing_provider(), thresholds=thresholds,
                       on_item=killer)
    checkpoint = json.loads((crash_dir / "critic_checkpoint.json").read_text())
    assert checkpoint["processed_count"] == 3  # last multiple of the interval

    report = run_validation(drafts, crash_dir, _static_resolver,
                            provider=_fixing_provider(), thresholds=thresholds)
    assert report.resumed is True
    assert report.total == 10
    for name in ("validated_triplets.jsonl", "hitl_triplets.jsonl",
                 "validation_events.jsonl"):
        assert (crash_dir / name).read_bytes() == (ref_dir / name).read_bytes(), name


def test_run_validation_writes_a_report_file(tmp_path):
    drafts = tmp_path / "drafts.jsonl"
    _write_drafts(drafts, clean=2, fixable=0, unresolvable=0)
    report = run_validation(drafts, tmp_path / "out", _static_resolver)
    on_disk = json.loads((tmp_path / "out" / "validation_report.json").read_text())
    assert on_disk["total"] == report.total == 2
    assert on_disk["acceptance_rate_pct"] == 100.0


# --- table-backed rule context ---------------------------------------------------------

def test_table_resolver_is_deterministic(fixture_paths):
    resolver = TableRuleContextResolver(fixture_paths.analysis_table,
                                        fixture_paths.kinematic_baselines)
    triplet = make_triplet(triplet_id="tri-deterministic")
    first = resolver(triplet)
    second = resolver(triplet)
    assert first.athlete == second.athlete
    assert first.phase is second.phase
    assert first.segment_z == second.segment_z


def test_table_resolver_population_statistics_match_numpy(fixture_paths):
    resolver = TableRuleContextResolver(fixture_paths.analysis_table)
    with open(fixture_paths.analysis_table, newline="") as handle:
        rows = list(csv.DictReader(handle))
    vo2 = np.asarray([float(r["vo2max"]) for r in rows])
    adaptation = np.asarray([float(r["adaptation_pct"]) for r in rows])
    q1, q2 = np.quantile(vo2, [1.0 / 3.0, 2.0 / 3.0])
    assert resolver.vo2max_tertiles == (pytest.approx(float(q1)),
                                        pytest.approx(float(q2)))
    assert resolver.adaptation_p75 == pytest.approx(float(np.percentile(adaptation, 75)))


def test_table_resolver_row_assignment_is_a_stable_hash(fixture_paths):
    resolver = TableRuleContextResolver(fixture_paths.analysis_table)
    triplet_id = "tri-rowcheck"
    digest = hashlib.sha1(triplet_id.encode()).digest()
    expected_row = int.from_bytes(digest[:8], "little") % len(resolver.table)
    assert resolver._row_for(triplet_id) == expected_row
    athlete = resolver.athlete_for_row(expected_row)
    assert resolver(make_triplet(triplet_id=triplet_id)).athlete == athlete


def test_table_resolver_phase_precedence(fixture_paths):
    resolver = TableRuleContextResolver(fixture_paths.analysis_table)
    pinned = make_triplet(triplet_id="tri-phase", training_phase=TrainingPhase.TAPER)
    assert resolver(pinned).phase is TrainingPhase.TAPER
    general = make_triplet(triplet_id="tri-phase")
    row = resolver._row_for("tri-phase")
    assert resolver(general).phase is TrainingPhase(resolver.table.phases[row])


def test_table_resolver_segment_z_comes_from_the_baselines_file(fixture_paths):
    resolver = TableRuleContextResolver(fixture_paths.analysis_table,
                                        fixture_paths.kinematic_baselines)
    triplet = make_triplet(triplet_id="tri-zcheck")
    row = resolver._row_for(triplet.triplet_id)
    athlete_id = resolver.table.athlete_ids[row]
    expected: dict[int, float] = {}
    with open(fixture_paths.kinematic_baselines, newline="") as handle:
        for record in csv.DictReader(handle):
            if record["athlete_id"] == athlete_id:
                expected[int(record["segment"])] = float(record["z_score"])
    assert resolver(triplet).segment_z == expected


def _small_csv(path: Path, header: list[str], rows: list[list[str]]) -> Path:
    lines = [",".join(header)] + [",".join(row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_table_resolver_falls_back_to_population_hrv(tmp_path):
    header = ["athlete_id", "stroke_type", "training_phase", "fatigue_score",
              "recovery_time_hr", "adaptation_pct", "training_load_au", "vo2max",
              "hrv", "stroke_prob", "hydration_level", "biomechanical_efficiency"]
    rows = [[f"a{i}", "Freestyle", "Base", "4.0", "24.0", "5.0", "500.0",
             str(50.0 + i), str(70.0 + i), "0.9", "0.8", "0.75"] for i in range(4)]
    table = _small_csv(tmp_path / "no_baseline.csv", header, rows)
    resolver = TableRuleContextResolver(table)
    athlete = resolver.athlete_for_row(0)
    assert athlete.hrv_baseline == pytest.approx((70 + 71 + 72 + 73) / 4.0)


def test_table_resolver_escalates_on_a_missing_required_cell(tmp_path):
    header = ["athlete_id", "stroke_type", "training_phase", "fatigue_score",
              "recovery_time_hr", "adaptation_pct", "training_load_au", "vo2max",
              "hrv", "hrv_baseline", "stroke_prob", "hydration_level",
              "biomechanical_efficiency"]
    rows = [["a0", "Freestyle", "Base", "", "24.0", "5.0", "500.0", "55.0",
             "80.0", "82.0", "0.9", "0.8", "0.75"]]
    resolver = TableRuleContextResolver(_small_csv(tmp_path / "gap.csv", header, rows))
    with pytest.raises(EvaluationError):
        resolver(make_triplet(triplet_id="tri-gap"))


def test_table_resolver_requires_population_columns(tmp_path):
    header = ["athlete_id", "stroke_type", "training_phase", "fatigue_score"]
    rows = [["a0", "Freestyle", "Base", "4.0"]]
    with pytest.raises(ValueError):
        TableRuleContextResolver(_small_csv(tmp_path / "thin.csv", header, rows))


def test_table_resolver_defaults_missing_annotation_to_easy_aerobic(fixture_paths):
    resolver = TableRuleContextResolver(fixture_paths.analysis_table)
    finalized = make_triplet(triplet_id="tri-final",
                             final_status=FinalStatus.AUTO_ACCEPTED,
                             verdict=CriticVerdict(passed=True))
    rc = resolver(finalized)
    assert rc.annotation.intensity_zone is IntensityZone.EASY_AEROBIC
