"""Minimal deterministic SVG line charts.

Coordinates are printed with two decimals and elements are emitted in
series order, so identical input gives byte-identical SVG.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=170, top=40, bottom=55)
COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]
DASHES = ["", "6,3", "2,2", "8,3,2,3"]


@dataclass
class Series:
    label: str
    x: list
    y: list
    err: list | None = None


@dataclass
class Axes:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    logy: bool = False
    series: list = field(default_factory=list)


def _ticks(lo, hi, n=5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    out = []
    t = start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def _fmt_tick(v):
    return f"{v:.4g}"


def emit_plot(axes: Axes) -> str:
    """Render ``axes`` to an SVG document string."""
    series = [s for s in axes.series if len(s.x)]
    if not series:
        raise ValueError("nothing to plot: all series are empty")
    for s in series:
        if len(s.x) != len(s.y):
            raise ValueError(f"series {s.label!r}: x and y lengths differ")

    def ty(v):
        return math.log10(v) if axes.logy else v

    xs = [float(v) for s in series for v in s.x]
    ys = []
    for s in series:
        for i, v in enumerate(s.y):
            e = s.err[i] if s.err else 0.0
            for w in (v - e, v + e) if e else (v,):
                if not axes.logy or w > 0:
                    ys.append(ty(float(w)))
    if not ys:
        raise ValueError("no plottable y values (log scale needs positive values)")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN["top"] + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black"/>',
    ]
    if axes.title:
        out.append(f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(axes.title)}</text>')
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{MARGIN["top"] + ph}" x2="{px(t):.2f}" y2="{MARGIN["top"] + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{MARGIN["top"] + ph + 18}" text-anchor="middle">{_fmt_tick(t)}</text>')
    for t in _ticks(y0, y1):
        label = _fmt_tick(10**t) if axes.logy else _fmt_tick(t)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py(t):.2f}" x2="{MARGIN["left"]}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py(t) + 4:.2f}" text-anchor="end">{label}</text>')
    if axes.xlabel:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.2f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(axes.xlabel)}</text>')
    if axes.ylabel:
        cy = MARGIN["top"] + ph / 2
        out.append(f'<text x="16" y="{cy:.2f}" text-anchor="middle" transform="rotate(-90 16 {cy:.2f})">{escape(axes.ylabel)}</text>')

    for i, s in enumerate(series):
        color = COLORS[i % len(COLORS)]
        dash = DASHES[(i // len(COLORS)) % len(DASHES)] or DASHES[i % len(DASHES)]
        pts = [(px(float(a)), py(ty(float(b)))) for a, b in zip(s.x, s.y) if not axes.logy or b > 0]
        style = f'stroke="{color}" stroke-width="1.5" fill="none"'
        if dash:
            style += f' stroke-dasharray="{dash}"'
        if len(pts) > 1:
            coords = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline class="series" points="{coords}" {style}/>')
        for a, b in pts:
            out.append(f'<circle class="marker" cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>')
        if s.err:
            for xv, yv, e in zip(s.x, s.y, s.err):
                if e and (not axes.logy or yv - e > 0):
                    xa = px(float(xv))
                    out.append(
                        f'<line class="errbar" x1="{xa:.2f}" y1="{py(ty(yv - e)):.2f}" '
                        f'x2="{xa:.2f}" y2="{py(ty(yv + e)):.2f}" stroke="{color}"/>'
                    )
        ly = MARGIN["top"] + 10 + 18 * i
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line class="legend" x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" {style}/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
