"""End-to-end orchestration: stage handoffs, crash resume, determinism."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from conftest import small_config
from swimcorpus.pipeline import (
    IntegrityError,
    PipelineConfig,
    PipelineError,
    resume,
    run_pipeline,
)

# Path-free artifacts; byte-equal across output directories when the run
# is deterministic. Report files embed output paths, so they are excluded.
COMPARED_ARTIFACTS = (
    "performance_anchors.json",
    "golden_triplets.jsonl",
    "validated_triplets.jsonl",
    "hitl_triplets.jsonl",
    "validation_events.jsonl",
)


def _assert_same_artifacts(out_a: Path, out_b: Path) -> None:
    for name in COMPARED_ARTIFACTS:
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), name


def _line_count(path: Path) -> int:
    return len(path.read_text(encoding="utf-8").splitlines())


class Kill(RuntimeError):
    pass


def _killer(target_stage: str, after: int):
    seen = {"n": 0}

    def hook(stage: str, item_id: str) -> None:
        if stage == target_stage:
            seen["n"] += 1
            if seen["n"] == after:
                raise Kill(f"injected failure in {stage} after {after} items")

    return hook


# --- a completed run ------------------------------------------------------------

def test_completed_run_reports_all_four_stages(pipeline_run):
    _, report = pipeline_run
    assert [row.step for row in report.rows] == [
        "Ingest", "Architect", "Generator", "Critic"]
    assert set(report.stage_summaries) == {
        "ingest", "architect", "generator", "critic"}
    assert report.already_complete is False


def test_completed_run_conserves_every_draft(pipeline_out):
    drafts = _line_count(pipeline_out / "golden_triplets.jsonl")
    validated = _line_count(pipeline_out / "validated_triplets.jsonl")
    hitl = _line_count(pipeline_out / "hitl_triplets.jsonl")
    assert drafts > 0
    assert validated + hitl == drafts
    assert _line_count(pipeline_out / "validation_events.jsonl") == drafts

    state = json.loads((pipeline_out / "pipeline_state.json").read_text())
    assert state["stage"] == "Done"
    assert state["final_status_counts"] == {
        "AutoAccepted": validated, "HITLPending": hitl}


def test_completed_run_summaries_are_internally_consistent(pipeline_run):
    _, report = pipeline_run
    critic = report.stage_summaries["critic"]
    assert critic["direct_accepts"] + critic["regenerated_accepts"] \
        + critic["hitl_count"] == critic["total"]
    generator = report.stage_summaries["generator"]
    assert generator["drafts_total"] == critic["total"]
    ingest = report.stage_summaries["ingest"]
    assert ingest["total_chunks"] > 0


def test_render_lays_out_one_line_per_stage(pipeline_run):
    _, report = pipeline_run
    text = report.render()
    lines = text.splitlines()
    assert lines[0].startswith("Step")
    assert len(lines) == 2 + len(report.rows)
    for row in report.rows:
        assert any(line.startswith(row.step) for line in lines[2:])


def test_rerunning_a_finished_directory_is_a_no_op(fixture_paths, pipeline_run):
    out, first = pipeline_run
    before = {name: (out / name).read_bytes() for name in COMPARED_ARTIFACTS}
    again = run_pipeline(small_config(fixture_paths, out))
    assert again.already_complete is True
    assert [r.step for r in again.rows] == [r.step for r in first.rows]
    for name, blob in before.items():
        assert (out / name).read_bytes() == blob, name


def test_resuming_a_finished_run_is_a_no_op(fixture_paths, pipeline_out):
    report = resume(small_config(fixture_paths, pipeline_out))
    assert report.already_complete is True


# --- determinism -----------------------------------------------------------------

def test_identical_configs_produce_identical_bytes(fixture_paths, pipeline_out,
                                                   tmp_path):
    events: list[tuple[str, str]] = []
    report = run_pipeline(small_config(fixture_paths, tmp_path / "twin"),
                          on_item=lambda stage, item: events.append((stage, item)))
    assert report.already_complete is False
    _assert_same_artifacts(tmp_path / "twin", pipeline_out)

    # stages never interleave: every event of a stage precedes the next stage's
    order = [stage for stage, _ in events]
    boundaries = [order.index(s) for s in ("ingest", "architect",
                                           "generator", "critic")]
    assert boundaries == sorted(boundaries)
    for stage, last in zip(("ingest", "architect", "generator"),
                           boundaries[1:]):
        assert all(s != stage for s in order[last:])


# --- crash and resume at every stage ----------------------------------------------

@pytest.mark.parametrize("stage,after,state_at_crash", [
    ("ingest", 2, "Ingest"),
    ("generator", 3, "Generator"),
    ("critic", 5, "Critic"),
])
def test_killed_run_resumes_to_identical_bytes(fixture_paths, pipeline_out,
                                               tmp_path, stage, after,
                                               state_at_crash):
    out = tmp_path / "crash"
    config = small_config(fixture_paths, out)
    with pytest.raises(Kill):
        run_pipeline(config, on_item=_killer(stage, after))
    state = json.loads((out / "pipeline_state.json").read_text())
    assert state["stage"] == state_at_crash

    report = resume(small_config(fixture_paths, out))
    assert report.already_complete is False
    assert [row.step for row in report.rows] == [
        "Ingest", "Architect", "Generator", "Critic"]
    _assert_same_artifacts(out, pipeline_out)
    assert json.loads((out / "pipeline_state.json").read_text())["stage"] == "Done"


def test_missing_analysis_table_fails_after_ingest_and_is_recoverable(
        fixture_paths, pipeline_out, tmp_path):
    out = tmp_path / "norc"
    with pytest.raises(PipelineError, match="analysis_table"):
        run_pipeline(small_config(fixture_paths, out, analysis_table=""))
    state = json.loads((out / "pipeline_state.json").read_text())
    assert state["stage"] == "Architect"

    report = resume(small_config(fixture_paths, out))
    assert [row.step for row in report.rows] == [
        "Ingest", "Architect", "Generator", "Critic"]
    _assert_same_artifacts(out, pipeline_out)


# --- state handling ----------------------------------------------------------------

def test_resume_refuses_to_start_a_fresh_run(fixture_paths, tmp_path):
    with pytest.raises(PipelineError, match="no run to resume"):
        resume(small_config(fixture_paths, tmp_path / "empty"))


@pytest.mark.parametrize("state_payload", [
    {"run_id": "r", "stage": "NotAStage"},
    {"run_id": "r"},
])
def test_corrupt_state_raises_instead_of_restarting(fixture_paths, tmp_path,
                                                    state_payload):
    out = tmp_path / "corrupt"
    out.mkdir()
    (out / "pipeline_state.json").write_text(json.dumps(state_payload))
    with pytest.raises(IntegrityError):
        run_pipeline(small_config(fixture_paths, out))
    with pytest.raises(IntegrityError):
        resume(small_config(fixture_paths, out))


# --- configuration -----------------------------------------------------------------

def test_config_requires_roots():
    with pytest.raises(PipelineError):
        PipelineConfig(source_root="", out_dir="/tmp/x")
    with pytest.raises(PipelineError):
        PipelineConfig(source_root="/tmp/x", out_dir="")


@pytest.mark.parametrize("overrides", [
    {"provider_mode": "oracle"},
    {"provider_mode": "scripted"},
    {"provider_mode": "http"},
    {"embedder_mode": "tfidf"},
])
def test_config_rejects_inconsistent_modes(overrides):
    with pytest.raises(PipelineError):
        PipelineConfig(source_root="/s", out_dir="/o", **overrides)


def test_config_accepts_complete_mode_settings():
    scripted = PipelineConfig(source_root="/s", out_dir="/o",
                              provider_mode="scripted",
                              provider_script="/tmp/script.json")
    assert scripted.provider_mode == "scripted"
    http = PipelineConfig(source_root="/s", out_dir="/o",
                          provider_mode="http", provider_url="https://api.test")
    assert http.provider_url == "https://api.test"


def test_remote_embedder_requires_an_endpoint():
    config = PipelineConfig(source_root="/s", out_dir="/o",
                            embedder_mode="remote")
    with pytest.raises(PipelineError, match="embedder_url"):
        config.build_embedder()


def test_run_id_defaults_to_the_output_directory_name():
    config = PipelineConfig(source_root="/s", out_dir="/runs/spring-batch")
    assert config.run_id == "spring-batch"
    named = PipelineConfig(source_root="/s", out_dir="/runs/x", run_id="pinned")
    assert named.run_id == "pinned"


def test_config_round_trips_through_a_file(tmp_path):
    payload = {
        "source_root": "/data/sources",
        "out_dir": "/data/out",
        "analysis_table": "/data/table.csv",
        "triplets_per_anchor": 4,
        "thresholds": {"retrieval_k": 3, "checkpoint_interval_triplets": 7},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(payload))
    config = PipelineConfig.from_file(path)
    assert config.source_root == "/data/sources"
    assert config.triplets_per_anchor == 4
    assert config.thresholds.retrieval_k == 3
    assert config.thresholds.checkpoint_interval_triplets == 7
    assert config.thresholds.fatigue_high == 7.0  # untouched defaults survive

    data = config.to_dict()
    assert data["out_dir"] == "/data/out"
    assert data["thresholds"]["retrieval_k"] == 3
