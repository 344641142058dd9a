"""Synthetic score sets with known error behavior, and brute-force oracles.

Scores are Gaussian per label and per subgroup, drawn from numpy's PCG64
bit generator seeded per spec (``numpy.random.Generator(PCG64(seed))``,
``normal``), so a spec always yields the same scores for a given numpy
release.

The ``brute_force_*`` functions deliberately share no code with
:mod:`svbias.metrics`: they count accepted/rejected trials threshold by
threshold in exact rational arithmetic.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .metrics import DcfConfig, OperatingPoint
from .trials import SpeakerMetadata, SubgroupKey, TrialRecord, TrialSet


@dataclass(frozen=True)
class SubgroupScoreSpec:
    key: SubgroupKey
    target_mean: float
    target_sd: float
    nontarget_mean: float
    nontarget_sd: float
    n_target: int
    n_nontarget: int
    seed: int
    n_speakers: int = 10

    def __post_init__(self):
        if self.target_sd <= 0 or self.nontarget_sd <= 0:
            raise ValueError("standard deviations must be positive")
        if self.n_target <= 0 or self.n_nontarget <= 0:
            raise ValueError("trial counts must be positive")
        if self.n_speakers < 2:
            raise ValueError("need at least 2 speakers per subgroup for nontarget trials")

    @classmethod
    def from_dict(cls, d: dict) -> "SubgroupScoreSpec":
        d = dict(d)
        key = d.pop("key")
        key = SubgroupKey.from_mapping(key) if isinstance(key, dict) else SubgroupKey(key)
        return cls(key=key, **d)


def load_specs(path) -> list[SubgroupScoreSpec]:
    """Read a JSON list of spec objects (``key`` is an attribute->value map)."""
    with open(path, encoding="utf-8") as f:
        data = json.load(f)
    if isinstance(data, dict):
        data = data["subgroups"]
    return [SubgroupScoreSpec.from_dict(d) for d in data]


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "-", text).strip("-") or "x"


def generate(specs) -> tuple[TrialSet, dict[str, SpeakerMetadata]]:
    """Draw trials for every spec; returns records plus matching metadata.

    Speaker ids are ``<subgroup>-s<NNN>`` and utterance ids
    ``<speaker>/syn/<NNNNNNN>.wav``, so the default speaker-id rule applies.
    """
    records = []
    metadata: dict[str, SpeakerMetadata] = {}
    utt = 0

    def next_utt(spk):
        nonlocal utt
        utt += 1
        return f"{spk}/syn/{utt:07d}.wav"

    for spec in specs:
        rng = np.random.Generator(np.random.PCG64(spec.seed))
        tar = rng.normal(spec.target_mean, spec.target_sd, spec.n_target)
        non = rng.normal(spec.nontarget_mean, spec.nontarget_sd, spec.n_nontarget)
        prefix = _slug(spec.key.label)
        spk = [f"{prefix}-s{j:03d}" for j in range(spec.n_speakers)]
        for s in spk:
            metadata.setdefault(s, SpeakerMetadata(s, dict(spec.key.pairs)))
        for i, score in enumerate(tar.tolist()):
            s = spk[i % spec.n_speakers]
            records.append(TrialRecord(next_utt(s), next_utt(s), True, score))
        for i, score in enumerate(non.tolist()):
            s = spk[i % spec.n_speakers]
            other = spk[(i + 1) % spec.n_speakers]
            records.append(TrialRecord(next_utt(s), next_utt(other), False, score))
    return TrialSet(tuple(records), {"source": "synthetic"}), metadata


def analytic_eer(spec: SubgroupScoreSpec) -> float:
    """Closed-form EER of two equal-variance Gaussians."""
    if spec.target_sd != spec.nontarget_sd:
        raise ValueError(
            "closed-form EER needs equal standard deviations; use brute_force_eer on samples"
        )
    gap = spec.target_mean - spec.nontarget_mean
    z = -gap / (2.0 * spec.target_sd)
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


def _check(targets, nontargets):
    targets = [float(x) for x in targets]
    nontargets = [float(x) for x in nontargets]
    if not targets:
        raise ValueError("no target trials")
    if not nontargets:
        raise ValueError("no nontarget trials")
    return targets, nontargets


def _candidates(targets, nontargets):
    return [-math.inf, *sorted(set(targets) | set(nontargets)), math.inf]


def _brute_rates(targets, nontargets, threshold):
    tar = np.asarray(targets)
    non = np.asarray(nontargets)
    accepted_non = int(np.count_nonzero(non >= threshold))
    rejected_tar = int(np.count_nonzero(tar < threshold))
    return Fraction(accepted_non, len(nontargets)), Fraction(rejected_tar, len(targets))


def _brute_cost(fpr, fnr, config):
    p = Fraction(repr(float(config.p_target)))
    c_fn = Fraction(repr(float(config.c_fn)))
    c_fp = Fraction(repr(float(config.c_fp)))
    return c_fn * p * fnr + c_fp * (1 - p) * fpr


def brute_force_operating_point(targets, nontargets, threshold, config: DcfConfig) -> OperatingPoint:
    targets, nontargets = _check(targets, nontargets)
    fpr, fnr = _brute_rates(targets, nontargets, threshold)
    return OperatingPoint(float(threshold), fpr, fnr, _brute_cost(fpr, fnr, config))


def brute_force_min_dcf(targets, nontargets, config: DcfConfig) -> OperatingPoint:
    """Exhaustive search over every distinct score and both endpoints."""
    targets, nontargets = _check(targets, nontargets)
    if len(targets) + len(nontargets) > 10_000:
        raise ValueError("brute-force oracle is limited to 10,000 trials")
    best = None
    for t in _candidates(targets, nontargets):
        fpr, fnr = _brute_rates(targets, nontargets, t)
        cost = _brute_cost(fpr, fnr, config)
        if best is None or cost < best.cost:
            best = OperatingPoint(t, fpr, fnr, cost)
    return best


def brute_force_eer(targets, nontargets) -> float:
    """EER by scanning every candidate threshold and interpolating linearly
    between the last point with FNR < FPR and the first with FNR >= FPR."""
    targets, nontargets = _check(targets, nontargets)
    prev = None
    for t in _candidates(targets, nontargets):
        fpr, fnr = _brute_rates(targets, nontargets, t)
        if fnr == fpr:
            return float(fpr)
        if fnr > fpr:
            pfpr, pfnr = prev
            lo, hi = pfnr - pfpr, fnr - fpr
            w = -lo / (hi - lo)
            return float(pfpr + w * (fpr - pfpr))
        prev = (fpr, fnr)
    raise AssertionError("unreachable: +inf threshold always has FNR=1 > FPR=0")
