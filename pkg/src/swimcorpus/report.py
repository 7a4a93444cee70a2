"""Corpus composition reporting.

Tallies a finished triplet corpus along its categorical dimensions,
renders the result as text tables, and writes a delimited summary plus
bar-chart figures for each distribution.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

from .jsonl import read_json_optional
from .schema import validate_triplet

logger = logging.getLogger(__name__)

REPORT_CSV_NAME = "report.csv"

# Dimension name -> triplet field holding its value.
DIMENSIONS: dict[str, str] = {
    "persona": "persona",
    "query_type": "query_type",
    "anchor_type": "anchor_type",
    "stroke_type": "stroke_type",
    "complexity_level": "complexity_level",
    "final_status": "final_status",
}


def _pct(count: int, total: int) -> float:
    if total == 0:
        return 0.0
    return round(100.0 * count / total, 1)


@dataclass
class CorpusReport:
    """Counts and shares for every categorical dimension of a corpus."""

    total_records: int
    included_records: int
    malformed_records: int
    counts: dict[str, dict[str, int]]
    rule_violation_counts: dict[str, int] = field(default_factory=dict)
    acceptance_rate_pct: Optional[float] = None
    recovery_rate_pct: Optional[float] = None
    source_files: list[str] = field(default_factory=list)

    def percent(self, dimension: str, value: str) -> float:
        return _pct(self.counts.get(dimension, {}).get(value, 0),
                    self.included_records)

    def to_dict(self) -> dict:
        distributions = {}
        for dimension, tally in self.counts.items():
            distributions[dimension] = {
                value: {"count": count,
                        "percent": _pct(count, self.included_records)}
                for value, count in sorted(tally.items(),
                                           key=lambda kv: (-kv[1], kv[0]))
            }
        return {
            "total_records": self.total_records,
            "included_records": self.included_records,
            "malformed_records": self.malformed_records,
            "distributions": distributions,
            "rule_violation_counts": dict(sorted(
                self.rule_violation_counts.items())),
            "acceptance_rate_pct": self.acceptance_rate_pct,
            "recovery_rate_pct": self.recovery_rate_pct,
            "source_files": list(self.source_files),
        }

    def render_text(self) -> str:
        lines: list[str] = []
        lines.append(f"Corpus records: {self.included_records}"
                     f" (malformed excluded: {self.malformed_records})")
        if self.acceptance_rate_pct is not None:
            lines.append(f"Acceptance rate: {self.acceptance_rate_pct}%")
        if self.recovery_rate_pct is not None:
            lines.append(f"Recovery rate: {self.recovery_rate_pct}%")
        for dimension in DIMENSIONS:
            tally = self.counts.get(dimension, {})
            if not tally:
                continue
            lines.append("")
            lines.append(dimension.replace("_", " ").title())
            width = max(len(v) for v in tally)
            for value, count in sorted(tally.items(),
                                       key=lambda kv: (-kv[1], kv[0])):
                share = _pct(count, self.included_records)
                lines.append(f"  {value:<{width}}  {count:>6}  {share:>5.1f}%")
        if self.rule_violation_counts:
            lines.append("")
            lines.append("Rule Violations (initial evaluation)")
            width = max(len(r) for r in self.rule_violation_counts)
            for rule, count in sorted(self.rule_violation_counts.items()):
                lines.append(f"  {rule:<{width}}  {count:>6}")
        return "\n".join(lines) + "\n"


def corpus_report(corpus_paths: list[Union[str, Path]],
                  validation_report_path: Optional[Union[str, Path]] = None,
                  ) -> CorpusReport:
    """Tally records from one or more corpus files.

    Lines that fail to parse or fail record validation are counted as
    malformed and excluded from every distribution.
    """
    counts: dict[str, dict[str, int]] = {d: {} for d in DIMENSIONS}
    total = 0
    malformed = 0
    included = 0
    sources: list[str] = []
    for path in corpus_paths:
        path = Path(path)
        if not path.exists():
            continue
        sources.append(str(path))
        with path.open("r", encoding="utf-8") as handle:
            for line in handle:
                line = line.strip()
                if not line:
                    continue
                total += 1
                try:
                    record = json.loads(line)
                except json.JSONDecodeError:
                    malformed += 1
                    continue
                check = validate_triplet(record)
                if not check.ok:
                    logger.warning("excluding malformed record: %s",
                                   check.summary())
                    malformed += 1
                    continue
                included += 1
                for dimension, fname in DIMENSIONS.items():
                    value = str(record[fname])
                    tally = counts[dimension]
                    tally[value] = tally.get(value, 0) + 1

    report = CorpusReport(
        total_records=total,
        included_records=included,
        malformed_records=malformed,
        counts=counts,
        source_files=sources,
    )
    if validation_report_path is not None:
        summary = read_json_optional(Path(validation_report_path))
        if summary is not None:
            report.rule_violation_counts = {
                str(k): int(v)
                for k, v in summary.get("rule_counts", {}).items()
            }
            if summary.get("acceptance_rate_pct") is not None:
                report.acceptance_rate_pct = float(
                    summary["acceptance_rate_pct"])
            if summary.get("recovery_rate_pct") is not None:
                report.recovery_rate_pct = float(
                    summary["recovery_rate_pct"])
    return report


def write_report_csv(report: CorpusReport, path: Union[str, Path]) -> Path:
    """Write the tallies as delimited rows: dimension, value, count, percent."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["dimension", "value", "count", "percent"])
        writer.writerow(["corpus", "included", report.included_records, ""])
        writer.writerow(["corpus", "malformed", report.malformed_records, ""])
        if report.acceptance_rate_pct is not None:
            writer.writerow(["validation", "acceptance_rate_pct", "",
                             report.acceptance_rate_pct])
        if report.recovery_rate_pct is not None:
            writer.writerow(["validation", "recovery_rate_pct", "",
                             report.recovery_rate_pct])
        for dimension in DIMENSIONS:
            for value, count in sorted(report.counts[dimension].items(),
                                       key=lambda kv: (-kv[1], kv[0])):
                writer.writerow([dimension, value, count,
                                 _pct(count, report.included_records)])
        for rule, count in sorted(report.rule_violation_counts.items()):
            writer.writerow(["rule_violation", rule, count, ""])
    return path


def write_report_figures(report: CorpusReport,
                         out_dir: Union[str, Path]) -> list[Path]:
    """Render one bar chart per distribution (and one for rule violations)."""
    from matplotlib.figure import Figure

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    def bar_chart(title: str, tally: dict[str, int], filename: str) -> None:
        if not tally:
            return
        items = sorted(tally.items(), key=lambda kv: (-kv[1], kv[0]))
        labels = [k for k, _ in items]
        values = [v for _, v in items]
        fig = Figure(figsize=(max(6.0, 1.1 * len(labels)), 4.2))
        ax = fig.subplots()
        ax.bar(range(len(values)), values, color="#3572b0")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
        ax.set_ylabel("records")
        ax.set_title(title)
        for i, v in enumerate(values):
            share = _pct(v, report.included_records)
            ax.annotate(f"{share:.1f}%", (i, v), ha="center",
                        va="bottom", fontsize=7)
        fig.tight_layout()
        target = out_dir / filename
        fig.savefig(target, dpi=120)
        written.append(target)

    for dimension in DIMENSIONS:
        bar_chart(dimension.replace("_", " ").title(),
                  report.counts[dimension], f"dist_{dimension}.png")
    if report.rule_violation_counts:
        items = sorted(report.rule_violation_counts.items())
        fig = Figure(figsize=(max(6.0, 0.8 * len(items)), 4.2))
        ax = fig.subplots()
        ax.bar(range(len(items)), [v for _, v in items], color="#b03535")
        ax.set_xticks(range(len(items)))
        ax.set_xticklabels([k for k, _ in items], fontsize=8)
        ax.set_ylabel("violations")
        ax.set_title("Rule Violations")
        fig.tight_layout()
        target = out_dir / "rule_violations.png"
        fig.savefig(target, dpi=120)
        written.append(target)
    return written


def run_report(corpus_paths: list[Union[str, Path]],
               out_dir: Union[str, Path],
               validation_report_path: Optional[Union[str, Path]] = None,
               ) -> tuple[CorpusReport, Path, list[Path]]:
    """Build the report and write the delimited summary plus figures."""
    report = corpus_report(corpus_paths, validation_report_path)
    out_dir = Path(out_dir)
    csv_path = write_report_csv(report, out_dir / REPORT_CSV_NAME)
    figures = write_report_figures(report, out_dir)
    return report, csv_path, figures
