"""Sequential staged pipeline with file handoffs and global resume.

The four stages run in order, each consuming exactly its predecessor's
declared artifact: source tree -> vector index -> anchor file -> draft
corpus -> validated/escalated corpora. A shared state file records how far
a run has progressed so an interrupted run continues from the earliest
incomplete stage, and under deterministic providers the resumed outputs
are byte-identical to an uninterrupted run.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from . import architect as architect_mod
from . import critic as critic_mod
from . import generator as generator_mod
from . import ingest as ingest_mod
from .architect import AnalysisTable, SeedLibraryConfig, build_seed_library, load_anchors
from .critic import TableRuleContextResolver
from .generator import GeneratorConfig
from .jsonl import read_json_optional, write_json_atomic
from .models import PipelineState, Stage, ThresholdConfig
from .providers import (
    CompletionProvider,
    HttpProvider,
    ScriptedProvider,
    TemplateProvider,
)
from .vecstore import HashingEmbedder, RemoteEmbedder, VectorIndex

logger = logging.getLogger(__name__)

STATE_FILENAME = "pipeline_state.json"


class PipelineError(Exception):
    pass


class IntegrityError(PipelineError):
    """A checkpoint or artifact failed its consistency check."""


@dataclass
class PipelineConfig:
    """Declarative configuration for a full run; every default documented.

    source_root: directory tree of knowledge sources (required).
    out_dir: artifact directory, one run per directory (required).
    analysis_table: CSV of athlete-state rows driving anchor statistics and
        rule contexts (required for the statistical architect and critic).
    kinematic_baselines: CSV of per-(athlete, segment) deviation z-scores.
    provider_mode: "template" (offline deterministic, default), "scripted"
        (replay a script file), or "http" (remote completion endpoint).
    provider_script: script path for scripted mode.
    provider_url / provider_model / provider_api_key: http-mode settings.
    embedder_mode: "hashing" (offline, default) or "remote".
    embedder_url: remote embedding endpoint for embedder_mode="remote".
    architect_use_llm: also run the provider path for anchors (default off;
        the statistical path always runs when an analysis table is given).
    rule_specific_seeds / data_targeted_seeds: seed library supplement sizes.
    triplets_per_anchor: generator plan length per anchor (default 10).
    thresholds: every numeric gate in one place (see ThresholdConfig).
    review_host / review_port: bind address for the review service.
    review_token: optional static bearer token for the review API.
    run_id: label recorded in the state file (default derived from out_dir).
    """

    source_root: str
    out_dir: str
    analysis_table: str = ""
    kinematic_baselines: str = ""
    provider_mode: str = "template"
    provider_script: str = ""
    provider_url: str = ""
    provider_model: str = ""
    provider_api_key: str = ""
    embedder_mode: str = "hashing"
    embedder_url: str = ""
    architect_use_llm: bool = False
    rule_specific_seeds: int = 66
    data_targeted_seeds: int = 614
    triplets_per_anchor: int = 10
    thresholds: ThresholdConfig = field(default_factory=ThresholdConfig)
    review_host: str = "127.0.0.1"
    review_port: int = 8731
    review_token: str = ""
    run_id: str = ""

    def __post_init__(self) -> None:
        if not self.source_root or not self.out_dir:
            raise PipelineError("source_root and out_dir are required")
        if self.provider_mode not in {"template", "scripted", "http"}:
            raise PipelineError(f"unknown provider_mode {self.provider_mode!r}")
        if self.provider_mode == "scripted" and not self.provider_script:
            raise PipelineError("scripted provider_mode requires provider_script")
        if self.provider_mode == "http" and not self.provider_url:
            raise PipelineError("http provider_mode requires provider_url")
        if self.embedder_mode not in {"hashing", "remote"}:
            raise PipelineError(f"unknown embedder_mode {self.embedder_mode!r}")
        if not self.run_id:
            self.run_id = Path(self.out_dir).name or "run"

    @classmethod
    def from_file(cls, path: str | os.PathLike) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as handle:
            data = json.load(handle)
        thresholds = ThresholdConfig.from_dict(data.pop("thresholds", {}))
        return cls(thresholds=thresholds, **data)

    def to_dict(self) -> dict[str, Any]:
        data = dict(self.__dict__)
        data["thresholds"] = self.thresholds.to_dict()
        return data

    def build_provider(self) -> CompletionProvider:
        if self.provider_mode == "scripted":
            return ScriptedProvider.from_file(self.provider_script)
        if self.provider_mode == "http":
            return HttpProvider(base_url=self.provider_url,
                                model=self.provider_model or "completion-model",
                                api_key=self.provider_api_key)
        return TemplateProvider()

    def build_embedder(self):
        if self.embedder_mode == "remote":
            if not self.embedder_url:
                raise PipelineError("remote embedder_mode requires embedder_url")
            return RemoteEmbedder(base_url=self.embedder_url)
        return HashingEmbedder()


@dataclass
class StageRow:
    step: str
    input_desc: str
    output_desc: str
    key_metric: str


@dataclass
class PipelineReport:
    run_id: str
    rows: list[StageRow] = field(default_factory=list)
    stage_summaries: dict[str, dict] = field(default_factory=dict)
    already_complete: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "run_id": self.run_id,
            "rows": [dict(r.__dict__) for r in self.rows],
            "stage_summaries": self.stage_summaries,
            "already_complete": self.already_complete,
        }

    def render(self) -> str:
        header = f"{'Step':<12} {'Input':<34} {'Output':<34} Key metric"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            lines.append(f"{row.step:<12} {row.input_desc:<34} "
                         f"{row.output_desc:<34} {row.key_metric}")
        return "\n".join(lines)


_STAGE_ORDER = [Stage.INGEST, Stage.ARCHITECT, Stage.GENERATOR, Stage.CRITIC, Stage.DONE]


def _now_iso() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _load_state(out_dir: Path) -> Optional[PipelineState]:
    raw = read_json_optional(str(out_dir / STATE_FILENAME))
    if raw is None:
        return None
    try:
        return PipelineState.from_dict(raw)
    except (KeyError, ValueError, TypeError) as exc:
        raise IntegrityError(
            f"{out_dir / STATE_FILENAME}: unreadable pipeline state ({exc}); "
            "refusing to silently restart"
        ) from exc


def _save_state(out_dir: Path, state: PipelineState) -> None:
    state.last_checkpoint_at = _now_iso()
    write_json_atomic(str(out_dir / STATE_FILENAME), state.to_dict())


def run_pipeline(config: PipelineConfig,
                 on_item: Optional[Callable[[str, str], None]] = None,
                 _resuming: bool = False) -> PipelineReport:
    """Execute Ingest -> Architect -> Generator -> Critic with handoffs.

    Stages that already completed (per the state file) are skipped with
    their recorded summaries; a failing stage leaves a resumable state
    behind. on_item, when given, is called as (stage, item_id) after every
    checkpointed unit of work, which is also the crash-injection hook used
    by the resume tests.
    """
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    state = _load_state(out)
    if state is None:
        if _resuming:
            raise PipelineError("no run to resume")
        state = PipelineState(run_id=config.run_id, stage=Stage.INGEST)
        _save_state(out, state)
    report = PipelineReport(run_id=state.run_id)
    if state.stage is Stage.DONE:
        report.already_complete = True
        saved = read_json_optional(str(out / "pipeline_report.json"))
        if saved:
            report.rows = [StageRow(**r) for r in saved.get("rows", [])]
            report.stage_summaries = saved.get("stage_summaries", {})
        return report

    provider = config.build_provider()
    embedder = config.build_embedder()
    stage_index = _STAGE_ORDER.index(state.stage)

    def advance(next_stage: Stage) -> None:
        state.stage = next_stage
        _save_state(out, state)
        report.rows = _report_rows(report.stage_summaries)
        write_json_atomic(str(out / "pipeline_report.json"), report.to_dict())

    def hook(stage_name: str):
        def inner(item_id: str, *_ignored) -> None:
            if on_item is not None:
                on_item(stage_name, item_id)
        return inner

    saved_summaries = read_json_optional(str(out / "pipeline_report.json")) or {}
    report.stage_summaries = dict(saved_summaries.get("stage_summaries", {}))

    # Stage 1: ingest.
    if stage_index <= _STAGE_ORDER.index(Stage.INGEST):
        summary = ingest_mod.run_ingest(config.source_root, out, embedder,
                                        on_file=hook("ingest"))
        report.stage_summaries["ingest"] = summary.to_dict()
        advance(Stage.ARCHITECT)

    # Stage 2: architect.
    if _STAGE_ORDER.index(state.stage) <= _STAGE_ORDER.index(Stage.ARCHITECT):
        if not config.analysis_table:
            raise PipelineError("analysis_table is required for the architect stage")
        table = AnalysisTable.from_csv(config.analysis_table)
        seeds = build_seed_library(SeedLibraryConfig(
            rule_specific_count=config.rule_specific_seeds,
            data_targeted_count=config.data_targeted_seeds,
        ))
        summary = architect_mod.run_architect(
            seeds, out, table=table,
            provider=provider if config.architect_use_llm else None,
            digest_for_seed=(_digest_builder(out) if config.architect_use_llm else None),
            thresholds=config.thresholds,
            on_seed=hook("architect"),
        )
        report.stage_summaries["architect"] = summary.to_dict()
        advance(Stage.GENERATOR)

    # Stage 3: generator.
    if _STAGE_ORDER.index(state.stage) <= _STAGE_ORDER.index(Stage.GENERATOR):
        index = VectorIndex.load(str(out / ingest_mod.INDEX_FILENAME))
        anchors = load_anchors(out / architect_mod.ANCHORS_FILENAME)
        summary = generator_mod.run_generator(
            anchors, out, index, embedder, provider,
            thresholds=config.thresholds,
            config=GeneratorConfig(triplets_per_anchor=config.triplets_per_anchor),
            on_anchor=hook("generator"),
        )
        report.stage_summaries["generator"] = summary.to_dict()
        advance(Stage.CRITIC)

    # Stage 4: critic.
    if _STAGE_ORDER.index(state.stage) <= _STAGE_ORDER.index(Stage.CRITIC):
        if not config.analysis_table:
            raise PipelineError("analysis_table is required for the critic stage")
        resolver = TableRuleContextResolver(
            config.analysis_table,
            baselines_csv=config.kinematic_baselines or None,
            thresholds=config.thresholds,
        )
        summary = critic_mod.run_validation(
            out / generator_mod.DRAFTS_FILENAME, out, resolver,
            provider=provider, thresholds=config.thresholds,
            on_item=hook("critic"),
        )
        report.stage_summaries["critic"] = summary.to_dict()
        state.final_status_counts = {
            "AutoAccepted": summary.direct_accepts + summary.regenerated_accepts,
            "HITLPending": summary.hitl_count,
        }
        advance(Stage.DONE)

    report.rows = _report_rows(report.stage_summaries)
    write_json_atomic(str(out / "pipeline_report.json"), report.to_dict())
    return report


def _digest_builder(out: Path):
    """Digest for the provider's anchor path: the stratum's aggregate chunks."""
    index = VectorIndex.load(str(out / ingest_mod.INDEX_FILENAME))
    aggregates = [c for c in index.chunks() if "#g-" in c.chunk_id]

    def digest_for_seed(seed) -> str:
        relevant = [
            c.text for c in aggregates
            if seed.stroke_type.value in c.text or seed.stroke_type.value == "General"
        ]
        return "\n\n".join(relevant[:4])

    return digest_for_seed


def _report_rows(summaries: dict[str, dict]) -> list[StageRow]:
    rows: list[StageRow] = []
    ingest = summaries.get("ingest")
    if ingest:
        by_cat = ", ".join(f"{k} {v}" for k, v in sorted(
            ingest.get("chunks_by_category", {}).items()))
        rows.append(StageRow(
            step="Ingest",
            input_desc=f"{len(ingest.get('files_processed', []))} source files",
            output_desc=f"{ingest.get('total_chunks', 0)} indexed chunks",
            key_metric=by_cat or "no chunks",
        ))
    arch = summaries.get("architect")
    if arch:
        rows.append(StageRow(
            step="Architect",
            input_desc=f"{arch.get('seeds_total', 0)} query seeds",
            output_desc=f"{arch.get('anchors_unique', 0)} unique anchors",
            key_metric=f"{arch.get('conversion_rate_pct', 0.0)}% seed conversion",
        ))
    gen = summaries.get("generator")
    if gen:
        per_anchor = gen.get("drafts_per_anchor", 0.0)
        rows.append(StageRow(
            step="Generator",
            input_desc=f"{gen.get('anchors_total', 0)} anchors",
            output_desc=f"{gen.get('drafts_total', 0)} draft triplets",
            key_metric=f"{per_anchor} drafts/anchor",
        ))
    critic = summaries.get("critic")
    if critic:
        validated = critic.get("direct_accepts", 0) + critic.get("regenerated_accepts", 0)
        rows.append(StageRow(
            step="Critic",
            input_desc=f"{critic.get('total', 0)} drafts",
            output_desc=(f"{validated} validated, "
                         f"{critic.get('hitl_count', 0)} escalated"),
            key_metric=f"{critic.get('acceptance_rate_pct', 0.0)}% acceptance",
        ))
    return rows


def resume(config: PipelineConfig,
           on_item: Optional[Callable[[str, str], None]] = None) -> PipelineReport:
    """Continue an interrupted run from the earliest incomplete stage.

    Refuses to start a fresh run: missing state is an error, and a corrupt
    state or index file raises an integrity error rather than silently
    restarting. Resuming a finished run is a no-op that returns the saved
    report.
    """
    out = Path(config.out_dir)
    if _load_state(out) is None:
        raise PipelineError("no run to resume")
    return run_pipeline(config, on_item=on_item, _resuming=True)
