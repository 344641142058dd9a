"""Subgroup bias measures for one audit run and cross-run comparison.

* subgroup bias: subgroup cost at the overall min-DCF threshold divided by
  the overall cost there. Above 1 the system disfavors the subgroup.
* threshold bias: subgroup cost at the overall threshold divided by the
  subgroup's own minimum cost. Above 1 the subgroup would gain from its own
  threshold.
* FPR / FNR ratios: subgroup rates over overall rates at the overall threshold.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import EmptyClassError, EvaluationError, SchemaMismatchError
from .metrics import (
    DEFAULT_DCF,
    DcfConfig,
    ErrorCurve,
    OperatingPoint,
    compute_error_curve,
    eer,
    min_dcf,
    operating_point_at,
)
from .trials import SubgroupKey, TrialSet

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Undefined:
    """Placeholder for a ratio whose denominator is zero."""

    reason: str

    def __str__(self):
        return "undefined"


Ratio = float | Undefined


def _ratio(num, den, reason: str) -> Ratio:
    if den == 0:
        return Undefined(reason)
    return float(Fraction(num) / Fraction(den))


def subgroup_bias(sg_cost, overall_cost) -> Ratio:
    return _ratio(sg_cost, overall_cost, "perfect overall system (zero overall cost)")


def threshold_bias(cost_at_overall_min, cost_at_sg_min) -> Ratio:
    return _ratio(cost_at_overall_min, cost_at_sg_min, "zero subgroup minimum cost")


def error_rate_ratios(sg: OperatingPoint, overall: OperatingPoint) -> tuple[Ratio, Ratio]:
    return (
        _ratio(sg.fpr, overall.fpr, "overall FPR is zero"),
        _ratio(sg.fnr, overall.fnr, "overall FNR is zero"),
    )


@dataclass(frozen=True)
class SupportFloor:
    min_speakers: int = 5
    min_trials: int = 100

    def is_low(self, n_speakers: int, n_target: int, n_nontarget: int) -> bool:
        return n_speakers < self.min_speakers or min(n_target, n_nontarget) < self.min_trials


@dataclass(frozen=True)
class EqualizedOddsTolerance:
    fpr: float = 0.0
    fnr: float = 0.0


@dataclass(frozen=True)
class SubgroupResult:
    key: SubgroupKey
    n_speakers: int
    n_target: int
    n_nontarget: int
    op_at_overall: OperatingPoint
    op_at_own_min: OperatingPoint
    subgroup_bias: Ratio
    threshold_bias: Ratio
    fpr_ratio: Ratio
    fnr_ratio: Ratio
    low_support: bool
    curve: ErrorCurve | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class EqualizedOdds:
    max_fpr_gap: float
    max_fnr_gap: float
    tolerance: EqualizedOddsTolerance

    @property
    def unbiased(self) -> bool:
        return self.max_fpr_gap <= self.tolerance.fpr and self.max_fnr_gap <= self.tolerance.fnr


@dataclass(frozen=True)
class BiasReport:
    attributes: tuple[str, ...]
    config: DcfConfig
    support_floor: SupportFloor
    overall: OperatingPoint
    overall_eer: float
    n_target: int
    n_nontarget: int
    subgroups: tuple[SubgroupResult, ...]
    equalized_odds: EqualizedOdds
    diagnostics: Mapping[str, object]
    provenance: Mapping[str, str] = field(default_factory=dict)
    overall_curve: ErrorCurve | None = field(default=None, repr=False, compare=False)

    def by_key(self) -> dict[str, SubgroupResult]:
        return {r.key.canonical: r for r in self.subgroups}


def _bias_sort_key(r: SubgroupResult):
    b = r.subgroup_bias
    return (isinstance(b, Undefined), 0.0 if isinstance(b, Undefined) else b, r.key.canonical)


def _evaluate_subgroup(key, indices, trials, overall, config):
    tar, non = trials.split_scores(indices)
    curve = compute_error_curve(tar, non)
    at_overall = operating_point_at(curve, overall.threshold, config)
    own = min_dcf(curve, config)
    return curve, at_overall, own


def audit(
    trials: TrialSet,
    config: DcfConfig = DEFAULT_DCF,
    support_floor: SupportFloor = SupportFloor(),
    eo_tolerance: EqualizedOddsTolerance = EqualizedOddsTolerance(),
    jobs: int = 1,
) -> BiasReport:
    """Run the full bias evaluation on a subgroup-assigned trial set.

    The overall min-DCF threshold is found on all trials (unknown bucket
    included); every subgroup is then read at that threshold and at its own
    min-DCF threshold. The unknown bucket and single-label subgroups are
    left out of the ratios and reported in ``diagnostics``.
    """
    tar, non = trials.split_scores()
    try:
        overall_curve = compute_error_curve(tar, non)
    except EmptyClassError as exc:
        raise EvaluationError(f"overall trial set has no {exc.side} trials") from None
    overall = min_dcf(overall_curve, config)
    overall_eer = eer(overall_curve)

    counts = trials.subgroup_counts()
    speakers = trials.subgroup_speakers()
    excluded = []
    todo = []
    unknown_counts = None
    for key, idx in trials.subgroup_indices.items():
        n_tar, n_non = counts[key]
        if key.is_unknown:
            unknown_counts = {"n_trials": len(idx), "n_target": n_tar, "n_nontarget": n_non}
            continue
        if n_tar == 0 or n_non == 0:
            reason = "no target trials" if n_tar == 0 else "no nontarget trials"
            excluded.append({"subgroup": key.label, "key": key.canonical, "n_trials": len(idx), "reason": reason})
            continue
        todo.append((key, idx))

    if jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            evaluated = list(pool.map(lambda kv: _evaluate_subgroup(*kv, trials, overall, config), todo))
    else:
        evaluated = [_evaluate_subgroup(k, i, trials, overall, config) for k, i in todo]

    results = []
    for (key, idx), (curve, at_overall, own) in zip(todo, evaluated):
        n_tar, n_non = counts[key]
        fpr_ratio, fnr_ratio = error_rate_ratios(at_overall, overall)
        results.append(
            SubgroupResult(
                key=key,
                n_speakers=speakers[key],
                n_target=n_tar,
                n_nontarget=n_non,
                op_at_overall=at_overall,
                op_at_own_min=own,
                subgroup_bias=subgroup_bias(at_overall.cost, overall.cost),
                threshold_bias=threshold_bias(at_overall.cost, own.cost),
                fpr_ratio=fpr_ratio,
                fnr_ratio=fnr_ratio,
                low_support=support_floor.is_low(speakers[key], n_tar, n_non),
                curve=curve,
            )
        )
    results.sort(key=_bias_sort_key)

    if results:
        fpr_gap = max(abs(float(r.op_at_overall.fpr - overall.fpr)) for r in results)
        fnr_gap = max(abs(float(r.op_at_overall.fnr - overall.fnr)) for r in results)
    else:
        fpr_gap = fnr_gap = 0.0

    n_audited = sum(r.n_target + r.n_nontarget for r in results)
    n_unknown = unknown_counts["n_trials"] if unknown_counts else 0
    n_excluded = sum(e["n_trials"] for e in excluded)
    diagnostics = {
        "n_trials": len(trials),
        "n_audited_trials": n_audited,
        "n_unknown_trials": n_unknown,
        "n_excluded_trials": n_excluded,
        "unknown_bucket": unknown_counts,
        "excluded_subgroups": excluded,
        "speaker_count_rule": "unique enrollment-side speakers",
        "warnings": list(trials.diagnostics.get("warnings", [])),
        "missing_speakers": list(trials.diagnostics.get("missing_speakers", [])),
        "incomplete_speakers": list(trials.diagnostics.get("incomplete_speakers", [])),
        "test_side_other_subgroup_trials": trials.diagnostics.get("test_side_other_subgroup_trials", 0),
    }
    assert n_audited + n_unknown + n_excluded == len(trials)
    return BiasReport(
        attributes=tuple(trials.attributes),
        config=config,
        support_floor=support_floor,
        overall=overall,
        overall_eer=overall_eer,
        n_target=overall_curve.n_target,
        n_nontarget=overall_curve.n_nontarget,
        subgroups=tuple(results),
        equalized_odds=EqualizedOdds(fpr_gap, fnr_gap, eo_tolerance),
        diagnostics=diagnostics,
        provenance=dict(trials.provenance),
        overall_curve=overall_curve,
    )


@dataclass(frozen=True)
class RunComparison:
    attributes: tuple[str, ...]
    pairs: tuple[tuple[SubgroupKey, Ratio, Ratio], ...]
    a_lower: int
    b_lower: int
    only_in_a: tuple[SubgroupKey, ...]
    only_in_b: tuple[SubgroupKey, ...]

    @property
    def unmatched(self) -> tuple[SubgroupKey, ...]:
        return self.only_in_a + self.only_in_b


def _schema(attrs: Sequence[str]) -> tuple[str, ...]:
    return tuple(sorted(attrs))


def compare_runs(a: BiasReport, b: BiasReport) -> RunComparison:
    """Pair subgroup biases of two runs by canonical subgroup key."""
    if _schema(a.attributes) != _schema(b.attributes):
        raise SchemaMismatchError(
            f"subgroup schemas differ: run A uses [{', '.join(a.attributes)}], "
            f"run B uses [{', '.join(b.attributes)}]"
        )
    ka, kb = a.by_key(), b.by_key()
    shared = sorted(set(ka) & set(kb))
    if not shared:
        raise SchemaMismatchError("the two runs share no subgroups")
    pairs = []
    a_lower = b_lower = 0
    for canon in shared:
        ba, bb = ka[canon].subgroup_bias, kb[canon].subgroup_bias
        pairs.append((ka[canon].key, ba, bb))
        if isinstance(ba, Undefined) or isinstance(bb, Undefined):
            continue
        if ba < bb:
            a_lower += 1
        elif bb < ba:
            b_lower += 1
    return RunComparison(
        attributes=tuple(a.attributes),
        pairs=tuple(pairs),
        a_lower=a_lower,
        b_lower=b_lower,
        only_in_a=tuple(ka[c].key for c in sorted(set(ka) - set(kb))),
        only_in_b=tuple(kb[c].key for c in sorted(set(kb) - set(ka))),
    )
