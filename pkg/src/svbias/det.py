"""DET curves: error rates mapped to normal-deviate axes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .metrics import ErrorCurve, OperatingPoint

CLAMP_LOW = 1e-6
CLAMP_HIGH = 1.0 - 1e-6

# Wichura (1988), Algorithm AS 241 (PPND16): relative accuracy about 1e-16.
_A = (
    3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
    1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
    3.3430575583588128105e4, 2.5090809287301226727e3,
)
_B = (
    1.0, 4.2313330701600911252e1, 6.8718700749205790830e2, 5.3941960214247511077e3,
    2.1213794301586595867e4, 3.9307895800092710610e4, 2.8729085735721942674e4,
    5.2264952788528545610e3,
)
_C = (
    1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
    3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
    2.27238449892691845833e-2, 7.74545014278341407640e-4,
)
_D = (
    1.0, 2.05319162663775882187e0, 1.67638483018380384940e0, 6.89767334985100004550e-1,
    1.48103976427480074590e-1, 1.51986665636164571966e-2, 5.47593808499534494600e-4,
    1.05075007164441684324e-9,
)
_E = (
    6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
    2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
    2.71155556874348757815e-5, 2.01033439929228813265e-7,
)
_F = (
    1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1, 1.48753612908506148525e-2,
    7.86869131145613259100e-4, 1.84631831751005468180e-5, 1.42151175831644588870e-7,
    2.04426310338993978564e-15,
)


def _poly(coefs, x):
    acc = 0.0
    for c in reversed(coefs):
        acc = acc * x + c
    return acc


def _ppnd16(p: float) -> float:
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        return q * _poly(_A, r) / _poly(_B, r)
    r = p if q < 0 else 1.0 - p
    r = math.sqrt(-math.log(r))
    if r <= 5.0:
        r -= 1.6
        x = _poly(_C, r) / _poly(_D, r)
    else:
        r -= 5.0
        x = _poly(_E, r) / _poly(_F, r)
    return -x if q < 0 else x


def probit(p: float, clamp: tuple[float, float] | None = (CLAMP_LOW, CLAMP_HIGH)) -> float:
    """Inverse standard-normal CDF.

    With ``clamp`` set (the default), ``p`` is first clipped into the band
    so 0 and 1 map to finite deviates. ``clamp=None`` requires 0 < p < 1.
    """
    p = float(p)
    if math.isnan(p):
        raise ValueError("probit of NaN")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability {p!r} outside [0, 1]")
    if clamp is not None:
        p = min(max(p, clamp[0]), clamp[1])
    elif p in (0.0, 1.0):
        raise ValueError("probit(0) and probit(1) are infinite; pass a clamp band")
    return _ppnd16(p)


def normal_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


@dataclass(frozen=True)
class Marker:
    """A labelled operating point drawn on a DET plot.

    ``kind`` is ``"overall_min"`` (triangle) or ``"own_min"`` (cross).
    """

    kind: str
    point: OperatingPoint
    label: str = ""


@dataclass(frozen=True)
class DetCurve:
    fpr: np.ndarray
    fnr: np.ndarray
    fpr_deviate: np.ndarray
    fnr_deviate: np.ndarray
    source: str = "overall"
    markers: tuple[Marker, ...] = field(default_factory=tuple)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr_deviate.tolist(), self.fnr_deviate.tolist()))

    def to_csv(self) -> str:
        """``fpr,fnr,fpr_deviate,fnr_deviate``; rates are unclamped."""
        lines = ["fpr,fnr,fpr_deviate,fnr_deviate"]
        for row in zip(self.fpr, self.fnr, self.fpr_deviate, self.fnr_deviate):
            lines.append(",".join(f"{v:.9g}" for v in row))
        return "\n".join(lines) + "\n"


def det_curve(
    curve: ErrorCurve,
    markers=(),
    source: str = "overall",
    clamp: tuple[float, float] = (CLAMP_LOW, CLAMP_HIGH),
) -> DetCurve:
    """Map an error curve into DET space.

    Points are ordered by increasing FPR deviate. Where several points share
    an FPR deviate (vertical steps, or rates merged by clamping) only the
    lowest FNR is kept, so the result is a strictly monotone trade-off.
    """
    fpr = curve.fpr[::-1]
    fnr = curve.fnr[::-1]
    x = np.array([probit(p, clamp) for p in fpr])
    y = np.array([probit(p, clamp) for p in fnr])
    keep = []
    for i in range(len(x)):
        if keep and x[keep[-1]] == x[i]:
            if y[i] < y[keep[-1]]:
                keep[-1] = i
            continue
        keep.append(i)
    idx = np.asarray(keep)
    return DetCurve(fpr[idx], fnr[idx], x[idx], y[idx], source, tuple(markers))


def marker_deviates(marker: Marker, clamp=(CLAMP_LOW, CLAMP_HIGH)) -> tuple[float, float]:
    return probit(float(marker.point.fpr), clamp), probit(float(marker.point.fnr), clamp)
