"""Minimal self-contained SVG line charts."""
from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 20, 30, 55)  # left, right, top, bottom
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _scale(vals, log):
    fin = [v for v in vals if v is not None and math.isfinite(v) and (v > 0 or not log)]
    if not fin:
        return 0.0, 1.0
    lo, hi = min(fin), max(fin)
    if log:
        lo, hi = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
    if hi == lo:
        hi = lo + 1
    return lo, hi


def write_line_chart(path, series, xlabel: str, ylabel: str, log_y: bool = False,
                     log_x: bool = False) -> Path:
    """``series`` is a list of (label, xs, ys). Non-finite points are skipped."""
    path = Path(path)
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy]
    x0, x1 = _scale(xs, log_x)
    y0, y1 = _scale(ys, log_y)
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def px(x):
        t = math.log10(x) if log_x else x
        return left + (t - x0) / (x1 - x0) * pw

    def py(y):
        t = math.log10(y) if log_y else y
        return top + ph - (t - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for i in range(5):
        t = y0 + (y1 - y0) * i / 4
        yy = top + ph - ph * i / 4
        lab = f"1e{t:g}" if log_y else f"{t:.3g}"
        out.append(f'<line x1="{left}" x2="{left + pw}" y1="{yy:.1f}" y2="{yy:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{left - 5}" y="{yy + 4:.1f}" text-anchor="end">{lab}</text>')
    for x in sorted(set(xs)):
        xx = px(x)
        out.append(f'<text x="{xx:.1f}" y="{top + ph + 15}" text-anchor="middle">{x:g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">'
               f'{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(16,{top + ph / 2}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for i, (label, sx, sy) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        pts = [(px(x), py(y)) for x, y in zip(sx, sy)
               if y is not None and math.isfinite(y) and (y > 0 or not log_y)]
        if pts:
            d = " ".join(f"{a:.1f},{b:.1f}" for a, b in pts)
            out.append(f'<polyline points="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            out.extend(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="{color}"/>' for a, b in pts)
        ly = top + 14 + 14 * i
        out.append(f'<line x1="{left + pw - 130}" x2="{left + pw - 110}" y1="{ly - 4}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 105}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")
    return path
