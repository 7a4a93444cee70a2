"""Command-line entry point wiring the pipeline stages and services.

Verbs: ingest, architect, generate, validate, run, resume, report,
review-serve, and fixtures. Flags mirror the pipeline configuration keys;
a JSON config file supplies defaults that explicit flags override.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import architect as architect_mod
from . import critic as critic_mod
from . import generator as generator_mod
from . import ingest as ingest_mod
from .architect import AnalysisTable, SeedLibraryConfig, build_seed_library
from .critic import (
    HITL_FILENAME,
    REPORT_FILENAME,
    VALIDATED_FILENAME,
    TableRuleContextResolver,
)
from .fixtures import make_fixture_corpus
from .generator import GeneratorConfig
from .jsonl import read_json_optional
from .models import ThresholdConfig
from .pipeline import PipelineConfig, PipelineError, resume, run_pipeline
from .report import run_report
from .review import ReviewStore, serve_review_api
from .vecstore import VectorIndex

logger = logging.getLogger(__name__)

_CONFIG_FLAGS = [
    ("--source-root", "source_root", str, "directory tree of knowledge sources"),
    ("--out", "out_dir", str, "artifact directory for this run"),
    ("--analysis-table", "analysis_table", str, "athlete-state CSV for statistics"),
    ("--kinematic-baselines", "kinematic_baselines", str,
     "per-(athlete, segment) z-score CSV"),
    ("--provider-mode", "provider_mode", str, "template | scripted | http"),
    ("--provider-script", "provider_script", str, "response script for scripted mode"),
    ("--provider-url", "provider_url", str, "completion endpoint for http mode"),
    ("--provider-model", "provider_model", str, "model name for http mode"),
    ("--provider-api-key", "provider_api_key", str, "bearer token for http mode"),
    ("--embedder-mode", "embedder_mode", str, "hashing | remote"),
    ("--embedder-url", "embedder_url", str, "embedding endpoint for remote mode"),
    ("--rule-specific-seeds", "rule_specific_seeds", int, "rule-specific seed count"),
    ("--data-targeted-seeds", "data_targeted_seeds", int, "data-targeted seed count"),
    ("--triplets-per-anchor", "triplets_per_anchor", int, "generator plans per anchor"),
    ("--review-host", "review_host", str, "review service bind host"),
    ("--review-port", "review_port", int, "review service bind port"),
    ("--review-token", "review_token", str, "static bearer token for the review API"),
    ("--run-id", "run_id", str, "label recorded in the state file"),
]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default="",
                        help="JSON config file; explicit flags override it")
    for flag, dest, ftype, help_text in _CONFIG_FLAGS:
        parser.add_argument(flag, dest=dest, type=ftype, default=None,
                            help=help_text)
    parser.add_argument("--architect-use-llm", dest="architect_use_llm",
                        action="store_true", default=None,
                        help="also run the provider path for anchors")
    parser.add_argument("--threshold", dest="threshold_overrides",
                        action="append", default=[], metavar="NAME=VALUE",
                        help="override one threshold, repeatable")


def _build_config(args: argparse.Namespace,
                  need_source: bool = False) -> PipelineConfig:
    data: dict = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as handle:
            data = json.load(handle)
    for _, dest, _, _ in _CONFIG_FLAGS:
        value = getattr(args, dest, None)
        if value is not None:
            data[dest] = value
    if getattr(args, "architect_use_llm", None):
        data["architect_use_llm"] = True
    thresholds_data = data.pop("thresholds", {})
    for override in getattr(args, "threshold_overrides", []):
        name, sep, raw = override.partition("=")
        if not sep or not name:
            raise SystemExit(f"--threshold expects NAME=VALUE, got {override!r}")
        thresholds_data[name.strip()] = json.loads(raw)
    thresholds = ThresholdConfig.from_dict(thresholds_data)
    if need_source and not data.get("source_root"):
        raise SystemExit("this verb requires --source-root (or a config file)")
    if not data.get("out_dir"):
        raise SystemExit("an output directory is required: pass --out")
    # Verbs that never touch the sources accept a config without them.
    data.setdefault("source_root", ".")
    try:
        return PipelineConfig(thresholds=thresholds, **data)
    except (PipelineError, TypeError) as exc:
        raise SystemExit(f"configuration error: {exc}") from exc


def _cmd_fixtures(args: argparse.Namespace) -> int:
    paths = make_fixture_corpus(Path(args.root), seed=args.seed)
    print(f"fixture corpus written under {paths.root}")
    print(f"  sources:   {paths.source_root}")
    print(f"  analysis:  {paths.analysis_table}")
    print(f"  baselines: {paths.kinematic_baselines}")
    return 0


def _cmd_ingest(args: argparse.Namespace) -> int:
    config = _build_config(args, need_source=True)
    summary = ingest_mod.run_ingest(
        config.source_root, Path(config.out_dir), config.build_embedder())
    print(f"ingested {len(summary.files_processed)} files into "
          f"{summary.total_chunks} chunks "
          f"({'resumed' if summary.resumed else 'fresh run'})")
    for category, count in sorted(summary.chunks_by_category.items()):
        print(f"  {category}: {count}")
    return 0


def _cmd_architect(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if not config.analysis_table:
        raise SystemExit("architect requires --analysis-table")
    table = AnalysisTable.from_csv(config.analysis_table)
    seeds = build_seed_library(SeedLibraryConfig(
        rule_specific_count=config.rule_specific_seeds,
        data_targeted_count=config.data_targeted_seeds,
    ))
    summary = architect_mod.run_architect(
        seeds, Path(config.out_dir), table=table,
        provider=config.build_provider() if config.architect_use_llm else None,
        thresholds=config.thresholds,
    )
    print(f"{summary.seeds_total} seeds -> {summary.anchors_unique} unique anchors "
          f"({summary.conversion_rate_pct}% conversion)")
    return 0


def _cmd_generate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out = Path(config.out_dir)
    index = VectorIndex.load(str(out / ingest_mod.INDEX_FILENAME))
    anchors = architect_mod.load_anchors(out / architect_mod.ANCHORS_FILENAME)
    summary = generator_mod.run_generator(
        anchors, out, index, config.build_embedder(), config.build_provider(),
        thresholds=config.thresholds,
        config=GeneratorConfig(triplets_per_anchor=config.triplets_per_anchor),
    )
    print(f"{summary.anchors_total} anchors -> {summary.drafts_total} drafts "
          f"({summary.drafts_per_anchor()} per anchor, "
          f"{summary.plans_skipped} plans skipped)")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    config = _build_config(args)
    if not config.analysis_table:
        raise SystemExit("validate requires --analysis-table")
    out = Path(config.out_dir)
    resolver = TableRuleContextResolver(
        config.analysis_table,
        baselines_csv=config.kinematic_baselines or None,
        thresholds=config.thresholds,
    )
    report = critic_mod.run_validation(
        out / generator_mod.DRAFTS_FILENAME, out, resolver,
        provider=config.build_provider(), thresholds=config.thresholds,
    )
    print(f"{report.total} drafts: {report.direct_accepts} direct, "
          f"{report.regenerated_accepts} regenerated, {report.hitl_count} escalated "
          f"({report.acceptance_rate_pct}% acceptance, "
          f"{report.recovery_rate_pct}% recovery)")
    return 0


def _cmd_run(args: argparse.Namespace) -> int:
    config = _build_config(args, need_source=True)
    report = run_pipeline(config)
    print(report.render())
    return 0


def _cmd_resume(args: argparse.Namespace) -> int:
    config = _build_config(args, need_source=True)
    try:
        report = resume(config)
    except PipelineError as exc:
        raise SystemExit(str(exc)) from exc
    if report.already_complete:
        print("run already complete; nothing to resume")
    print(report.render())
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out = Path(config.out_dir)
    report_dir = Path(args.report_dir) if args.report_dir else out / "report"
    corpus_paths = [out / VALIDATED_FILENAME, out / HITL_FILENAME]
    stats, csv_path, figures = run_report(
        corpus_paths, report_dir,
        validation_report_path=out / REPORT_FILENAME)
    print(stats.render_text())
    print(f"summary rows: {csv_path}")
    for figure in figures:
        print(f"figure: {figure}")
    return 0


def _cmd_review_serve(args: argparse.Namespace) -> int:
    config = _build_config(args)
    out = Path(config.out_dir)
    store = ReviewStore(
        validated_path=out / VALIDATED_FILENAME,
        hitl_path=out / HITL_FILENAME,
        sample_rate=config.thresholds.hitl_sample_rate,
        grounding_rel_tol=config.thresholds.grounding_numeric_rel_tol,
    )
    progress = store.progress()
    print(f"review queue: {progress.remaining} items pending "
          f"({progress.reviewed} already reviewed)")
    print(f"serving on http://{config.review_host}:{config.review_port}")
    serve_review_api(store, host=config.review_host, port=config.review_port,
                     token=config.review_token or None)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swimcorpus",
        description=("Synthetic swim-coaching corpus pipeline: ingest sources, "
                     "identify statistical anchors, synthesize grounded "
                     "question-context-answer records, and validate them "
                     "against physiological soundness rules."),
    )
    parser.add_argument("--verbose", action="store_true",
                        help="log at DEBUG instead of WARNING")
    sub = parser.add_subparsers(dest="verb", required=True)

    fixtures_p = sub.add_parser("fixtures",
                                help="write the deterministic demo corpus")
    fixtures_p.add_argument("--root", required=True,
                            help="directory to write the fixture tree under")
    fixtures_p.add_argument("--seed", type=int, default=2024)
    fixtures_p.set_defaults(func=_cmd_fixtures)

    for name, func, help_text in [
        ("ingest", _cmd_ingest, "chunk, narrate, embed, and index the sources"),
        ("architect", _cmd_architect, "build the seed library and detect anchors"),
        ("generate", _cmd_generate, "synthesize draft triplets from anchors"),
        ("validate", _cmd_validate, "run the rule battery with regeneration"),
        ("run", _cmd_run, "run all four stages with checkpoints"),
        ("resume", _cmd_resume, "continue an interrupted run"),
        ("report", _cmd_report, "corpus statistics, delimited summary, figures"),
        ("review-serve", _cmd_review_serve, "serve the review queue over HTTP"),
    ]:
        verb = sub.add_parser(name, help=help_text)
        _add_config_flags(verb)
        if name == "report":
            verb.add_argument("--report-dir", default="",
                              help="output directory (default: OUT/report)")
        verb.set_defaults(func=func)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except KeyboardInterrupt:
        print("interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
