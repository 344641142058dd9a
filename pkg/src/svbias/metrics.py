"""Threshold-swept error rates, EER and the detection cost function.

Decision rule: a trial is accepted iff ``score >= threshold``. Candidate
thresholds are the distinct observed scores plus the virtual endpoints
``-inf`` (accept everything) and ``+inf`` (reject everything).

Error counts are kept as integers and costs are evaluated as exact
rationals, so the minimum, the tie-breaking and every ratio derived from
costs are bit-reproducible; floats appear only at the reporting boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Rational

import numpy as np

from .errors import EmptyClassError


def exact(x) -> Fraction:
    """Exact rational for a user-supplied number.

    Floats go through their shortest decimal repr, so ``0.05`` becomes
    ``1/20`` rather than the nearest binary fraction.
    """
    if isinstance(x, Rational):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"non-finite value {x!r}")
    return Fraction(repr(x))


@dataclass(frozen=True)
class DcfConfig:
    """Detection cost parameters. Defaults are the NIST SRE 2019 values."""

    p_target: float = 0.05
    c_fn: float = 1.0
    c_fp: float = 1.0
    preset_name: str | None = None

    def __post_init__(self):
        if not 0 < exact(self.p_target) < 1:
            raise ValueError(f"p_target must lie in (0, 1), got {self.p_target}")
        if exact(self.c_fn) < 0 or exact(self.c_fp) < 0:
            raise ValueError("cost weights must be non-negative")
        if exact(self.c_fn) == 0 and exact(self.c_fp) == 0:
            raise ValueError("at least one of c_fn, c_fp must be positive")

    @cached_property
    def fn_weight(self) -> Fraction:
        return exact(self.c_fn) * exact(self.p_target)

    @cached_property
    def fp_weight(self) -> Fraction:
        return exact(self.c_fp) * (1 - exact(self.p_target))

    def cost(self, fpr, fnr) -> Fraction:
        """Exact cost for rational rates."""
        return self.fn_weight * Fraction(fnr) + self.fp_weight * Fraction(fpr)

    def to_dict(self) -> dict:
        return {
            "p_target": float(self.p_target),
            "c_fn": float(self.c_fn),
            "c_fp": float(self.c_fp),
            "preset_name": self.preset_name,
        }


DEFAULT_DCF = DcfConfig(preset_name="sre2019")


def dcf(fpr: float, fnr: float, config: DcfConfig = DEFAULT_DCF) -> float:
    """C_FN * P_target * fnr + C_FP * (1 - P_target) * fpr."""
    return (
        float(config.c_fn) * float(config.p_target) * fnr
        + float(config.c_fp) * (1.0 - float(config.p_target)) * fpr
    )


@dataclass(frozen=True)
class OperatingPoint:
    """Error rates and cost at one threshold.

    Rates and cost are exact :class:`~fractions.Fraction` values; use
    ``float()`` for display.
    """

    threshold: float
    fpr: Fraction
    fnr: Fraction
    cost: Fraction

    @classmethod
    def from_rates(cls, threshold, fpr, fnr, config: DcfConfig = DEFAULT_DCF) -> "OperatingPoint":
        fpr, fnr = exact(fpr), exact(fnr)
        return cls(float(threshold), fpr, fnr, config.cost(fpr, fnr))

    def to_dict(self) -> dict:
        return {
            "threshold": _json_threshold(self.threshold),
            "fpr": float(self.fpr),
            "fnr": float(self.fnr),
            "cost": float(self.cost),
        }


def _json_threshold(t: float):
    return t if math.isfinite(t) else ("inf" if t > 0 else "-inf")


def _as_scores(values, side: str) -> np.ndarray:
    arr = np.sort(np.asarray(values, dtype=float).ravel())
    if arr.size == 0:
        raise EmptyClassError(side)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{side} scores contain non-finite values")
    return arr


@dataclass(frozen=True, eq=False)
class ErrorCurve:
    """FPR/FNR step functions over the candidate thresholds.

    ``false_accepts[i]`` counts nontargets with score >= ``thresholds[i]``;
    ``misses[i]`` counts targets with score < ``thresholds[i]``.
    """

    thresholds: np.ndarray
    false_accepts: np.ndarray
    misses: np.ndarray
    n_target: int
    n_nontarget: int
    # sorted inputs, kept for off-grid evaluation
    _targets: np.ndarray
    _nontargets: np.ndarray

    def __len__(self):
        return len(self.thresholds)

    @property
    def fpr(self) -> np.ndarray:
        return self.false_accepts / self.n_nontarget

    @property
    def fnr(self) -> np.ndarray:
        return self.misses / self.n_target

    def rates(self, i: int) -> tuple[Fraction, Fraction]:
        return (
            Fraction(int(self.false_accepts[i]), self.n_nontarget),
            Fraction(int(self.misses[i]), self.n_target),
        )

    def point(self, i: int, config: DcfConfig = DEFAULT_DCF) -> OperatingPoint:
        fpr, fnr = self.rates(i)
        return OperatingPoint(float(self.thresholds[i]), fpr, fnr, config.cost(fpr, fnr))

    def counts_at(self, threshold: float) -> tuple[int, int]:
        """(false accepts, misses) under accept iff score >= threshold."""
        fa = self.n_nontarget - int(np.searchsorted(self._nontargets, threshold, side="left"))
        miss = int(np.searchsorted(self._targets, threshold, side="left"))
        return fa, miss

    def to_csv(self) -> str:
        """``threshold,fpr,fnr`` rows with 9 significant digits."""
        lines = ["threshold,fpr,fnr"]
        for t, p, n in zip(self.thresholds, self.fpr, self.fnr):
            lines.append(f"{t:.9g},{p:.9g},{n:.9g}")
        return "\n".join(lines) + "\n"


def compute_error_curve(targets, nontargets) -> ErrorCurve:
    tar = _as_scores(targets, "target")
    non = _as_scores(nontargets, "nontarget")
    distinct = np.unique(np.concatenate([tar, non]))
    thresholds = np.concatenate([[-np.inf], distinct, [np.inf]])
    fa = non.size - np.searchsorted(non, thresholds, side="left")
    miss = np.searchsorted(tar, thresholds, side="left")
    return ErrorCurve(
        thresholds,
        fa.astype(np.int64),
        miss.astype(np.int64),
        int(tar.size),
        int(non.size),
        tar,
        non,
    )


def eer(curve: ErrorCurve) -> float:
    """Equal error rate by linear interpolation at the FNR - FPR sign change.

    The interpolation is done in exact arithmetic on the two bracketing
    points; an exact crossing is returned as is.
    """
    n_tar, n_non = curve.n_target, curve.n_nontarget
    # sign of fnr - fpr without division; non-decreasing along the curve
    diff = curve.misses.astype(object) * n_non - curve.false_accepts.astype(object) * n_tar
    i = int(np.argmax(diff >= 0))
    fpr1, fnr1 = curve.rates(i)
    if diff[i] == 0:
        return float(fpr1)
    fpr0, fnr0 = curve.rates(i - 1)
    d0, d1 = fnr0 - fpr0, fnr1 - fpr1
    alpha = -d0 / (d1 - d0)
    return float(fpr0 + alpha * (fpr1 - fpr0))


def _cost_numerators(curve: ErrorCurve, config: DcfConfig) -> tuple[np.ndarray, Fraction]:
    """Integer numerators K with cost_i = K_i * scale, and that scale."""
    a, b = config.fn_weight, config.fp_weight
    denom = math.lcm(a.denominator, b.denominator)
    ai = a.numerator * (denom // a.denominator)
    bi = b.numerator * (denom // b.denominator)
    n_tar, n_non = curve.n_target, curve.n_nontarget
    bound = (ai * n_non + bi * n_tar) * max(n_tar, n_non)
    if bound < 2**62:
        k = ai * n_non * curve.misses + bi * n_tar * curve.false_accepts
    else:
        k = ai * n_non * curve.misses.astype(object) + bi * n_tar * curve.false_accepts.astype(object)
    return k, Fraction(1, denom * n_tar * n_non)


def min_dcf(curve: ErrorCurve, config: DcfConfig = DEFAULT_DCF) -> OperatingPoint:
    """Cost-minimizing operating point; ties go to the smallest threshold."""
    k, _ = _cost_numerators(curve, config)
    i = int(np.argmin(k)) if k.dtype != object else min(range(len(k)), key=k.__getitem__)
    return curve.point(i, config)


def operating_point_at(curve: ErrorCurve, threshold: float, config: DcfConfig = DEFAULT_DCF) -> OperatingPoint:
    """Rates and cost at an arbitrary (possibly off-grid) threshold."""
    if math.isnan(threshold):
        raise ValueError("threshold is NaN")
    fa, miss = curve.counts_at(threshold)
    fpr = Fraction(fa, curve.n_nontarget)
    fnr = Fraction(miss, curve.n_target)
    return OperatingPoint(float(threshold), fpr, fnr, config.cost(fpr, fnr))
