"""Small deterministic SVG line plots (profiles, energies, bifurcation diagram).

Output depends only on the data: fixed canvas, fixed number formatting and
no timestamps, so identical runs give byte-identical files.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = {"left": 72, "right": 24, "top": 40, "bottom": 56}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _f(x: float) -> str:
    return f"{x:.2f}"


def nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    """Round tick values covering ``[lo, hi]``."""
    if not hi > lo:
        return [lo]
    raw = (hi - lo) / max(n, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _label(t: float) -> str:
    return f"{t:.6g}"


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    markers: bool = False


@dataclass
class Figure:
    """A single-axes line plot; ``logx`` uses base-2 tick labels."""

    title: str
    xlabel: str
    ylabel: str
    logx: bool = False
    series: list[Series] = field(default_factory=list)
    vlines: list[tuple[float, str]] = field(default_factory=list)

    def add(self, x, y, label: str = "", markers: bool = False) -> "Figure":
        x, y = np.asarray(x, float), np.asarray(y, float)
        keep = np.isfinite(x) & np.isfinite(y)
        if self.logx:
            keep &= x > 0
        self.series.append(Series(x[keep], y[keep], label, markers))
        return self

    def _bounds(self):
        xs = [s.x for s in self.series if s.x.size] + [np.array([v for v, _ in self.vlines])]
        ys = [s.y for s in self.series if s.y.size]
        xs = np.concatenate(xs) if xs else np.array([])
        ys = np.concatenate(ys) if ys else np.array([])
        if self.logx:
            xs = np.log2(xs[xs > 0])
        if xs.size == 0:
            xs = np.array([0.0, 1.0])
        if ys.size == 0:
            ys = np.array([0.0, 1.0])
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
        if x1 == x0:
            x0, x1 = x0 - 0.5, x1 + 0.5
        if y1 == y0:
            pad = 0.5 * max(abs(y0), 1.0)
            y0, y1 = y0 - pad, y1 + pad
        pad = 0.05 * (y1 - y0)
        return x0, x1, y0 - pad, y1 + pad

    def render(self) -> str:
        x0, x1, y0, y1 = self._bounds()
        L, R, T, B = MARGIN["left"], WIDTH - MARGIN["right"], MARGIN["top"], HEIGHT - MARGIN["bottom"]

        def px(x):
            v = math.log2(x) if self.logx else x
            return L + (v - x0) / (x1 - x0) * (R - L)

        def py(y):
            return B - (y - y0) / (y1 - y0) * (B - T)

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
            f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="15">{escape(self.title)}</text>',
            f'<rect x="{L}" y="{T}" width="{R - L}" height="{B - T}" fill="none" stroke="#000000"/>',
        ]
        if self.logx:
            xticks = [2.0**k for k in range(math.ceil(x0 - 1e-9), math.floor(x1 + 1e-9) + 1)]
            if len(xticks) > 10:
                stride = math.ceil(len(xticks) / 10)
                xticks = xticks[::stride]
        else:
            xticks = nice_ticks(x0, x1)
        for t in xticks:
            X = px(t)
            out.append(f'<line x1="{_f(X)}" y1="{B}" x2="{_f(X)}" y2="{B + 5}" stroke="#000000"/>')
            out.append(f'<text x="{_f(X)}" y="{B + 18}" text-anchor="middle">{_label(t)}</text>')
        for t in nice_ticks(y0, y1):
            Y = py(t)
            out.append(f'<line x1="{L - 5}" y1="{_f(Y)}" x2="{L}" y2="{_f(Y)}" stroke="#000000"/>')
            out.append(f'<text x="{L - 8}" y="{_f(Y + 4)}" text-anchor="end">{_label(t)}</text>')
        out.append(f'<text x="{(L + R) / 2:.2f}" y="{HEIGHT - 14}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="18" y="{(T + B) / 2:.2f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {(T + B) / 2:.2f})">{escape(self.ylabel)}</text>')
        for v, label in self.vlines:
            X = px(v)
            out.append(f'<line x1="{_f(X)}" y1="{T}" x2="{_f(X)}" y2="{B}" stroke="#555555" stroke-dasharray="6,4"/>')
            out.append(f'<text x="{_f(X + 4)}" y="{T + 14}">{escape(label)}</text>')
        for k, s in enumerate(self.series):
            color = PALETTE[k % len(PALETTE)]
            pts = " ".join(f"{_f(px(a))},{_f(py(b))}" for a, b in zip(s.x, s.y))
            if s.x.size > 1:
                out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            if s.markers or s.x.size == 1:
                for a, b in zip(s.x, s.y):
                    out.append(f'<circle cx="{_f(px(a))}" cy="{_f(py(b))}" r="3" fill="{color}"/>')
            if s.label:
                ly = T + 16 + 16 * k
                out.append(f'<line x1="{R - 150}" y1="{ly - 4}" x2="{R - 130}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
                out.append(f'<text x="{R - 124}" y="{ly}">{escape(s.label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def profile_figure(trajs, labels=None, title: str = "radial profile") -> str:
    fig = Figure(title, "r", "u(r)")
    for k, tr in enumerate(trajs):
        fig.add(tr.r, tr.u, labels[k] if labels else "")
    return fig.render()


def energy_figure(pairs, labels=None, title: str = "energy along the profile") -> str:
    """``pairs`` of ``(r, E)`` arrays."""
    fig = Figure(title, "r", "E(r)")
    for k, (r, E) in enumerate(pairs):
        fig.add(r, E, labels[k] if labels else "")
    return fig.render()


def bifurcation_figure(report, title: str = "solution branch") -> str:
    """``u(0)`` against ``lambda`` on a log axis; the threshold estimate is dashed."""
    fig = Figure(title, "lambda", "u(0)", logx=True)
    branch = report.branch
    if branch:
        lam, a = zip(*branch)
        fig.add(lam, a, "positive solutions", markers=True)
    if report.lambda0_estimate is not None:
        fig.vlines.append((report.lambda0_estimate, f"lambda0 ~ {report.lambda0_estimate:.6g}"))
    return fig.render()
