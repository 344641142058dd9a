"""Static SVG figures: DET curves per subgroup and the two-run bias scatter.

Output is byte-deterministic: fixed hash salt for element ids, no date
metadata, text kept as ``<text>`` elements rather than glyph paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .bias import RunComparison, Undefined  # noqa: E402
from .det import DetCurve, marker_deviates, probit  # noqa: E402

DET_TICKS_PCT = (0.1, 0.5, 1, 2, 5, 10, 20, 40)

_RC = {
    "svg.hashsalt": "svbias",
    "svg.fonttype": "none",
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.grid": True,
    "grid.linestyle": ":",
    "grid.alpha": 0.6,
}
_SVG_META = {"Date": None, "Creator": None}


@dataclass(frozen=True)
class DetStyle:
    width: float = 6.5
    height: float = 6.0
    lim_pct: tuple[float, float] = (0.05, 50.0)
    title: str = "DET curves"
    colormap: str = "tab20"


def _save(fig, out):
    try:
        fig.savefig(out, format="svg", metadata=_SVG_META)
    finally:
        plt.close(fig)


def render_det(curves: list[DetCurve], out, style: DetStyle = DetStyle()) -> None:
    """Write a DET plot of ``curves`` to ``out`` (SVG).

    The curve whose source is ``"overall"`` is drawn dotted black. Markers:
    triangle at the overall min-DCF threshold, cross at the subgroup's own.
    Each series is wrapped in an SVG group with id ``series-<n>``.
    """
    if not curves:
        raise ValueError("render_det needs at least one curve")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(style.width, style.height))
        cmap = plt.get_cmap(style.colormap)
        n_color = 0
        for n, c in enumerate(curves):
            if c.source == "overall":
                color, ls, lw = "black", ":", 1.6
            else:
                color, ls, lw = cmap(n_color % cmap.N), "-", 1.0
                n_color += 1
            (line,) = ax.plot(c.fpr_deviate, c.fnr_deviate, ls=ls, lw=lw, color=color, label=c.source)
            line.set_gid(f"series-{n}")
            for m in c.markers:
                x, y = marker_deviates(m)
                glyph = "^" if m.kind == "overall_min" else "x"
                (mk,) = ax.plot([x], [y], glyph, color=color, ms=6, mfc="none" if glyph == "^" else color)
                mk.set_gid(f"marker-{n}-{m.kind}")

        ticks = [probit(p / 100.0) for p in DET_TICKS_PCT]
        labels = [f"{p:g}" for p in DET_TICKS_PCT]
        lo, hi = (probit(p / 100.0) for p in style.lim_pct)
        for axis in (ax.xaxis, ax.yaxis):
            axis.set_ticks(ticks, labels)
        ax.set_xlim(lo, hi)
        ax.set_ylim(lo, hi)
        ax.set_aspect("equal")
        ax.set_xlabel("False positive rate (%)")
        ax.set_ylabel("False negative rate (%)")
        ax.set_title(style.title)
        legend = ax.legend(loc="upper right", fontsize=7, ncol=1 if len(curves) <= 10 else 2)
        for i, text in enumerate(legend.get_texts()):
            text.set_gid(f"legend-entry-{i}")
        fig.tight_layout()
        _save(fig, out)


def render_compare(cmp: RunComparison, out, names=("run A", "run B"), style: DetStyle = DetStyle(title="Subgroup bias")) -> None:
    """Scatter of subgroup bias in run A (x) against run B (y) with the
    equality diagonal; points above it are worse in run B."""
    pts = [(k, a, b) for k, a, b in cmp.pairs if not isinstance(a, Undefined) and not isinstance(b, Undefined)]
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(style.width, style.height))
        vals = [v for _, a, b in pts for v in (a, b)] or [1.0]
        top = max(vals) * 1.1
        ax.plot([0, top], [0, top], "k--", lw=0.8, gid="diagonal")
        if pts:
            sc = ax.scatter([a for _, a, _ in pts], [b for _, _, b in pts], s=18, color="tab:blue")
            sc.set_gid("points")
        for key, a, b in pts:
            ax.annotate(key.label, (a, b), textcoords="offset points", xytext=(3, 3), fontsize=7)
        ax.set_xlim(0, top)
        ax.set_ylim(0, top)
        ax.set_aspect("equal")
        ax.set_xlabel(f"subgroup bias, {names[0]}")
        ax.set_ylabel(f"subgroup bias, {names[1]}")
        ax.set_title(style.title)
        fig.tight_layout()
        _save(fig, out)

