"""Serialization of audit results: JSON/CSV reports, DET exports, summaries."""

from __future__ import annotations

import csv
import io
import json
import math
import re
from fractions import Fraction

from .bias import (
    BiasReport,
    EqualizedOdds,
    EqualizedOddsTolerance,
    RunComparison,
    SubgroupResult,
    SupportFloor,
    Undefined,
)
from .errors import InputError
from .metrics import DcfConfig, OperatingPoint
from .trials import CompositionReport, SubgroupKey

REPORT_SCHEMA = "svbias.report/1"

CSV_COLUMNS = (
    "subgroup", "n_speakers", "n_target", "n_nontarget", "fpr", "fnr",
    "cdet_at_overall", "cdet_at_own_min", "subgroup_bias", "threshold_bias",
    "fpr_ratio", "fnr_ratio", "low_support",
)


def _num(x) -> str:
    if isinstance(x, Undefined):
        return "undefined"
    return f"{float(x):.9g}"


def _ratio_json(x):
    return "undefined" if isinstance(x, Undefined) else x


def _ratio_from_json(x, reason):
    return Undefined(reason) if x == "undefined" else float(x)


def _threshold_from_json(t) -> float:
    return float(t)  # float() accepts "inf" / "-inf"


def _op_from_json(d) -> OperatingPoint:
    return OperatingPoint(
        _threshold_from_json(d["threshold"]), Fraction(d["fpr"]), Fraction(d["fnr"]), Fraction(d["cost"])
    )


def _subgroup_json(r: SubgroupResult) -> dict:
    undefined = {
        name: v.reason
        for name, v in (
            ("subgroup_bias", r.subgroup_bias),
            ("threshold_bias", r.threshold_bias),
            ("fpr_ratio", r.fpr_ratio),
            ("fnr_ratio", r.fnr_ratio),
        )
        if isinstance(v, Undefined)
    }
    return {
        "subgroup": r.key.label,
        "key": dict(r.key.pairs),
        "canonical": r.key.canonical,
        "n_speakers": r.n_speakers,
        "n_target": r.n_target,
        "n_nontarget": r.n_nontarget,
        "at_overall_min": r.op_at_overall.to_dict(),
        "at_own_min": r.op_at_own_min.to_dict(),
        "subgroup_bias": _ratio_json(r.subgroup_bias),
        "threshold_bias": _ratio_json(r.threshold_bias),
        "fpr_ratio": _ratio_json(r.fpr_ratio),
        "fnr_ratio": _ratio_json(r.fnr_ratio),
        "low_support": r.low_support,
        "undefined_reasons": undefined,
    }


def report_to_dict(report: BiasReport) -> dict:
    eo = report.equalized_odds
    return {
        "schema": REPORT_SCHEMA,
        "attributes": list(report.attributes),
        "config": report.config.to_dict(),
        "support_floor": {
            "min_speakers": report.support_floor.min_speakers,
            "min_trials": report.support_floor.min_trials,
        },
        "overall": {
            **report.overall.to_dict(),
            "eer": report.overall_eer,
            "n_target": report.n_target,
            "n_nontarget": report.n_nontarget,
        },
        "equalized_odds": {
            "max_fpr_gap": eo.max_fpr_gap,
            "max_fnr_gap": eo.max_fnr_gap,
            "fpr_tolerance": eo.tolerance.fpr,
            "fnr_tolerance": eo.tolerance.fnr,
            "unbiased": eo.unbiased,
        },
        "subgroups": [_subgroup_json(r) for r in report.subgroups],
        "diagnostics": dict(report.diagnostics),
        "provenance": dict(report.provenance),
    }


def report_to_json(report: BiasReport) -> str:
    return json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n"


def report_from_dict(d: dict) -> BiasReport:
    if d.get("schema") != REPORT_SCHEMA:
        raise InputError(f"not an svbias report (schema {d.get('schema')!r})")
    cfg = d["config"]
    subgroups = []
    for s in d["subgroups"]:
        reasons = s.get("undefined_reasons", {})
        subgroups.append(
            SubgroupResult(
                key=SubgroupKey((a, s["key"][a]) for a in d["attributes"]),
                n_speakers=s["n_speakers"],
                n_target=s["n_target"],
                n_nontarget=s["n_nontarget"],
                op_at_overall=_op_from_json(s["at_overall_min"]),
                op_at_own_min=_op_from_json(s["at_own_min"]),
                subgroup_bias=_ratio_from_json(s["subgroup_bias"], reasons.get("subgroup_bias", "")),
                threshold_bias=_ratio_from_json(s["threshold_bias"], reasons.get("threshold_bias", "")),
                fpr_ratio=_ratio_from_json(s["fpr_ratio"], reasons.get("fpr_ratio", "")),
                fnr_ratio=_ratio_from_json(s["fnr_ratio"], reasons.get("fnr_ratio", "")),
                low_support=s["low_support"],
            )
        )
    eo = d["equalized_odds"]
    return BiasReport(
        attributes=tuple(d["attributes"]),
        config=DcfConfig(cfg["p_target"], cfg["c_fn"], cfg["c_fp"], cfg.get("preset_name")),
        support_floor=SupportFloor(**d["support_floor"]),
        overall=_op_from_json(d["overall"]),
        overall_eer=d["overall"]["eer"],
        n_target=d["overall"]["n_target"],
        n_nontarget=d["overall"]["n_nontarget"],
        subgroups=tuple(subgroups),
        equalized_odds=EqualizedOdds(
            eo["max_fpr_gap"], eo["max_fnr_gap"], EqualizedOddsTolerance(eo["fpr_tolerance"], eo["fnr_tolerance"])
        ),
        diagnostics=d["diagnostics"],
        provenance=d.get("provenance", {}),
    )


def load_report(path) -> BiasReport:
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from None
    return report_from_dict(data)


def report_to_csv(report: BiasReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in report.subgroups:
        w.writerow([
            r.key.label, r.n_speakers, r.n_target, r.n_nontarget,
            _num(r.op_at_overall.fpr), _num(r.op_at_overall.fnr),
            _num(r.op_at_overall.cost), _num(r.op_at_own_min.cost),
            _num(r.subgroup_bias), _num(r.threshold_bias),
            _num(r.fpr_ratio), _num(r.fnr_ratio),
            "true" if r.low_support else "false",
        ])
    return buf.getvalue()


def composition_to_csv(comp: CompositionReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["attribute", "value", "n_speakers", "speaker_pct", "n_utterances", "utterance_pct", "gap_pct"])
    for r in comp.rows:
        w.writerow([r.attribute, r.value, r.n_speakers, f"{r.speaker_pct:.4f}", r.n_utterances,
                    f"{r.utterance_pct:.4f}", f"{r.gap:.4f}"])
    return buf.getvalue()


def comparison_to_csv(cmp: RunComparison) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["subgroup", "bias_a", "bias_b"])
    for key, a, b in cmp.pairs:
        w.writerow([key.label, _num(a), _num(b)])
    return buf.getvalue()


def safe_filename(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", label).strip("-") or "subgroup"


def _fmt4(x) -> str:
    return "undefined" if isinstance(x, Undefined) else f"{float(x):.4f}"


def _fmt_threshold(t: float) -> str:
    return f"{t:.6g}" if math.isfinite(t) else ("+inf" if t > 0 else "-inf")


def summary_text(report: BiasReport) -> str:
    """Human-readable summary; costs and ratios shown to 4 decimals."""
    o = report.overall
    lines = [
        f"overall: threshold={_fmt_threshold(o.threshold)} FPR={float(o.fpr):.4f} "
        f"FNR={float(o.fnr):.4f} min C_det={float(o.cost):.4f} EER={report.overall_eer:.4f}",
        f"trials: {report.n_target} target, {report.n_nontarget} nontarget",
    ]
    defined = [r for r in report.subgroups if not isinstance(r.subgroup_bias, Undefined)]
    if defined:
        best, worst = defined[0], defined[-1]
        lines.append(f"best subgroup bias: {best.key.label} {best.subgroup_bias:.4f}; "
                     f"worst: {worst.key.label} {worst.subgroup_bias:.4f}")
    eo = report.equalized_odds
    lines.append(f"equalized odds: max |dFPR|={eo.max_fpr_gap:.4f} max |dFNR|={eo.max_fnr_gap:.4f} "
                 f"({'unbiased' if eo.unbiased else 'biased'} at tolerance {eo.tolerance.fpr:g}/{eo.tolerance.fnr:g})")
    header = f"{'subgroup':<20} {'spk':>5} {'cdet@all':>9} {'sg bias':>9} {'cdet@own':>9} {'thr bias':>9} {'fpr ratio':>9} {'fnr ratio':>9}"
    lines += ["", header, "-" * len(header)]
    for r in report.subgroups:
        flag = " *" if r.low_support else ""
        lines.append(
            f"{r.key.label:<20} {r.n_speakers:>5} {_fmt4(r.op_at_overall.cost):>9} {_fmt4(r.subgroup_bias):>9} "
            f"{_fmt4(r.op_at_own_min.cost):>9} {_fmt4(r.threshold_bias):>9} {_fmt4(r.fpr_ratio):>9} "
            f"{_fmt4(r.fnr_ratio):>9}{flag}"
        )
    if any(r.low_support for r in report.subgroups):
        lines.append("* low support (below speaker or trial floor)")
    d = report.diagnostics
    lines.append(
        f"accounting: {d['n_audited_trials']} audited + {d['n_unknown_trials']} unknown + "
        f"{d['n_excluded_trials']} excluded = {d['n_trials']} trials"
    )
    return "\n".join(lines) + "\n"
