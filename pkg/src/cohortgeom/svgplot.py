"""Minimal deterministic SVG line charts.

Output depends only on the inputs: fixed canvas, fixed palette, coordinates
printed with two decimals, no timestamps or random ids.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 720, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 150, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


@dataclass(frozen=True)
class Line:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    dashed: bool = False
    markers: bool = False


def nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi == lo:
        return [lo]
    raw = (hi - lo) / max(target - 1, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < step * 1e-9 else v)
        v += step
    return ticks


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _label(v: float) -> str:
    return f"{v:.6g}"


def line_chart(lines: Sequence[Line], title: str = "", xlabel: str = "",
               ylabel: str = "") -> str:
    xs = [float(v) for ln in lines for v in ln.x]
    ys = [float(v) for ln in lines for v in ln.y if math.isfinite(float(v))]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = abs(y0) * 0.05 or 0.5
        y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def px(v):
        return MARGIN_L + (v - x0) / (x1 - x0) * pw

    def py(v):
        return MARGIN_T + (y1 - v) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        f'fill="none" stroke="#444"/>',
    ]
    for t in nice_ticks(x0, x1):
        out.append(f'<line x1="{_fmt(px(t))}" y1="{MARGIN_T + ph}" x2="{_fmt(px(t))}" '
                   f'y2="{MARGIN_T + ph + 5}" stroke="#444"/>')
        out.append(f'<text x="{_fmt(px(t))}" y="{MARGIN_T + ph + 18}" '
                   f'text-anchor="middle">{_label(t)}</text>')
    for t in nice_ticks(y0, y1):
        out.append(f'<line x1="{MARGIN_L - 5}" y1="{_fmt(py(t))}" x2="{MARGIN_L}" '
                   f'y2="{_fmt(py(t))}" stroke="#444"/>')
        out.append(f'<line x1="{MARGIN_L}" y1="{_fmt(py(t))}" x2="{MARGIN_L + pw}" '
                   f'y2="{_fmt(py(t))}" stroke="#eee"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{_fmt(py(t) + 4)}" '
                   f'text-anchor="end">{_label(t)}</text>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.2f}" y="{HEIGHT - 10}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{MARGIN_T + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.2f})">{escape(ylabel)}</text>')

    for n, ln in enumerate(lines):
        colour = PALETTE[n % len(PALETTE)]
        pts = [(px(float(a)), py(float(b))) for a, b in zip(ln.x, ln.y)
               if math.isfinite(float(b))]
        dash = ' stroke-dasharray="5,3"' if ln.dashed else ""
        if pts:
            coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5"{dash} '
                       f'points="{coords}"/>')
        if ln.markers:
            for a, b in pts:
                out.append(f'<circle cx="{_fmt(a)}" cy="{_fmt(b)}" r="2" fill="{colour}"/>')
        ly = MARGIN_T + 12 + 16 * n
        lx = MARGIN_L + pw + 10
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" '
                   f'stroke="{colour}" stroke-width="1.5"{dash}/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(ln.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
