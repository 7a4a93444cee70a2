"""Session fixtures: one synthetic source corpus, one full pipeline run.

The corpus generator and the pipeline are deterministic, so every test
that consumes these fixtures sees identical bytes on every run. Tests
that mutate pipeline artifacts must copy them into their own tmp dir.
"""

from __future__ import annotations

import shutil
from pathlib import Path

import pytest

from swimcorpus.fixtures import FixturePaths, make_fixture_corpus
from swimcorpus.pipeline import PipelineConfig, PipelineReport, run_pipeline

# Reduced seed counts keep the session pipeline run around one second while
# still exercising every stage, all three anchor types, and both critic exits.
SMALL_RULE_SEEDS = 20
SMALL_DATA_SEEDS = 80
SMALL_TRIPLETS_PER_ANCHOR = 4


@pytest.fixture(scope="session")
def fixture_paths(tmp_path_factory: pytest.TempPathFactory) -> FixturePaths:
    root = tmp_path_factory.mktemp("corpus")
    return make_fixture_corpus(root)


def small_config(paths: FixturePaths, out_dir: Path, **overrides) -> PipelineConfig:
    settings = dict(
        source_root=str(paths.source_root),
        out_dir=str(out_dir),
        analysis_table=str(paths.analysis_table),
        kinematic_baselines=str(paths.kinematic_baselines),
        rule_specific_seeds=SMALL_RULE_SEEDS,
        data_targeted_seeds=SMALL_DATA_SEEDS,
        triplets_per_anchor=SMALL_TRIPLETS_PER_ANCHOR,
    )
    settings.update(overrides)
    return PipelineConfig(**settings)


@pytest.fixture(scope="session")
def pipeline_run(fixture_paths: FixturePaths,
                 tmp_path_factory: pytest.TempPathFactory) -> tuple[Path, PipelineReport]:
    out = tmp_path_factory.mktemp("pipeline-out")
    report = run_pipeline(small_config(fixture_paths, out))
    return out, report


@pytest.fixture(scope="session")
def pipeline_out(pipeline_run: tuple[Path, PipelineReport]) -> Path:
    return pipeline_run[0]


@pytest.fixture()
def corpus_copy(pipeline_out: Path, tmp_path: Path) -> Path:
    """Private mutable copy of the validated and escalated corpus files."""
    for name in ("validated_triplets.jsonl", "hitl_triplets.jsonl"):
        shutil.copy2(pipeline_out / name, tmp_path / name)
    return tmp_path
