"""End-to-end audit and comparison runs that write artifacts to a directory.

Artifacts are first written into a staging directory next to the output
and moved into place only after every file has been produced, so a failed
run leaves no partial outputs behind.
"""

from __future__ import annotations

import os
import shutil
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .bias import (
    BiasReport,
    EqualizedOddsTolerance,
    RunComparison,
    SupportFloor,
    audit,
    compare_runs,
)
from .det import Marker, det_curve
from .errors import EvaluationError, InputError
from .metrics import DEFAULT_DCF, DcfConfig
from .plotting import DetStyle, render_compare, render_det
from .report import (
    comparison_to_csv,
    composition_to_csv,
    load_report,
    report_to_csv,
    report_to_json,
    safe_filename,
    summary_text,
)
from .trials import (
    DEFAULT_SPEAKER_RULE,
    SpeakerIdRule,
    TrialFileFormat,
    assign_subgroups,
    composition_summary,
    parse_metadata,
    parse_trials,
)

ALL_FORMATS = ("json", "csv", "svg", "det-csv")
OUTPUT_DIR_ENV = "SVBIAS_OUTPUT_DIR"


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, "svbias-out")


@dataclass(frozen=True)
class AuditConfig:
    scores_path: str
    metadata_path: str
    attributes: tuple[str, ...]
    dcf: DcfConfig = DEFAULT_DCF
    support_floor: SupportFloor = SupportFloor()
    eo_tolerance: EqualizedOddsTolerance = EqualizedOddsTolerance()
    output_dir: str = field(default_factory=default_output_dir)
    formats: tuple[str, ...] = ALL_FORMATS
    trial_format: TrialFileFormat = TrialFileFormat()
    metadata_delimiter: str = ","
    speaker_rule: SpeakerIdRule = DEFAULT_SPEAKER_RULE
    jobs: int = 1

    def validate(self):
        for name in ("scores_path", "metadata_path"):
            p = getattr(self, name)
            if not os.path.isfile(p):
                raise InputError(f"{name.replace('_', ' ')} {p!r} does not exist or is not a file")
        if not self.attributes:
            raise InputError("at least one attribute must be selected")
        bad = set(self.formats) - set(ALL_FORMATS)
        if bad:
            raise InputError(f"unknown output format(s) {sorted(bad)}; choose from {', '.join(ALL_FORMATS)}")
        if self.jobs < 1:
            raise InputError("jobs must be >= 1")
        out = Path(self.output_dir)
        if out.exists() and not out.is_dir():
            raise InputError(f"output path {self.output_dir!r} exists and is not a directory")


class _Staging:
    """Collects files in a temp dir, then moves them into ``dest``."""

    def __init__(self, dest):
        self.dest = Path(dest)
        self.created_dest = not self.dest.exists()
        self.dest.mkdir(parents=True, exist_ok=True)
        self.dir = Path(tempfile.mkdtemp(prefix=".svbias-staging-", dir=self.dest))
        self.files: list[str] = []

    def path(self, rel: str) -> Path:
        p = self.dir / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        self.files.append(rel)
        return p

    def write_text(self, rel: str, text: str):
        with open(self.path(rel), "w", encoding="utf-8", newline="\n") as f:
            f.write(text)

    def commit(self) -> list[Path]:
        out = []
        for rel in self.files:
            target = self.dest / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            os.replace(self.dir / rel, target)
            out.append(target)
        shutil.rmtree(self.dir, ignore_errors=True)
        return out

    def abort(self):
        shutil.rmtree(self.dir, ignore_errors=True)
        if self.created_dest:
            shutil.rmtree(self.dest, ignore_errors=True)


def det_curves_for(report: BiasReport):
    """DET curves for the overall set and each subgroup, with markers."""
    overall = det_curve(
        report.overall_curve,
        [Marker("overall_min", report.overall, "overall min")],
        source="overall",
    )
    curves = [overall]
    for r in report.subgroups:
        curves.append(
            det_curve(
                r.curve,
                [Marker("overall_min", r.op_at_overall, "overall min"), Marker("own_min", r.op_at_own_min, "own min")],
                source=r.key.label,
            )
        )
    return curves


def load_trials(config: AuditConfig):
    trials = parse_trials(config.scores_path, config.trial_format)
    metadata = parse_metadata(config.metadata_path, config.metadata_delimiter)
    return trials, metadata


def run_audit(config: AuditConfig, out=None) -> tuple[BiasReport, list[Path]]:
    """Parse, audit and write every requested artifact; print a summary."""
    out = out or sys.stdout
    config.validate()
    trials, metadata = load_trials(config)
    trials = assign_subgroups(trials, metadata, config.attributes, config.speaker_rule)
    report = audit(trials, config.dcf, config.support_floor, config.eo_tolerance, jobs=config.jobs)

    labels = [r.key.label for r in report.subgroups]
    names = [safe_filename(lab) for lab in labels]
    if len(set(names)) != len(names) or "overall" in names:
        raise EvaluationError(f"subgroup labels collide when used as file names: {labels}")

    staging = _Staging(config.output_dir)
    try:
        if "json" in config.formats:
            staging.write_text("report.json", report_to_json(report))
        if "csv" in config.formats:
            staging.write_text("report.csv", report_to_csv(report))
            comp = composition_summary(trials, metadata, config.attributes, config.speaker_rule)
            staging.write_text("composition.csv", composition_to_csv(comp))
        if "det-csv" in config.formats or "svg" in config.formats:
            curves = det_curves_for(report)
            if "det-csv" in config.formats:
                for name, c in zip(["overall", *names], curves):
                    staging.write_text(f"det/{name}.csv", c.to_csv())
            if "svg" in config.formats:
                render_det(curves, staging.path("det.svg"), DetStyle(title=f"DET curves by {', '.join(config.attributes)}"))
        written = staging.commit()
    except BaseException:
        staging.abort()
        raise
    out.write(summary_text(report))
    return report, written


def _resolve_report(path) -> BiasReport:
    p = Path(path)
    if p.is_dir():
        p = p / "report.json"
    if not p.is_file():
        raise InputError(f"report {str(path)!r} not found")
    return load_report(p)


def run_compare(report_a, report_b, output_dir, names=("A", "B"), out=None) -> tuple[RunComparison, list[Path]]:
    """Compare two finished audits (report.json paths or audit directories)."""
    out = out or sys.stdout
    a, b = _resolve_report(report_a), _resolve_report(report_b)
    cmp = compare_runs(a, b)
    staging = _Staging(output_dir)
    try:
        staging.write_text("compare.csv", comparison_to_csv(cmp))
        render_compare(cmp, staging.path("compare.svg"), names=names)
        written = staging.commit()
    except BaseException:
        staging.abort()
        raise
    out.write(
        f"{len(cmp.pairs)} shared subgroups; lower subgroup bias in {names[0]}: {cmp.a_lower}, "
        f"in {names[1]}: {cmp.b_lower}\n"
    )
    for key in cmp.only_in_a:
        out.write(f"unmatched (only in {names[0]}): {key.label}\n")
    for key in cmp.only_in_b:
        out.write(f"unmatched (only in {names[1]}): {key.label}\n")
    return cmp, written
