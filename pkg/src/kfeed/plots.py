"""Minimal dependency-free SVG line charts with shaded bands."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")
WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _ticks(lo, hi, count=5):
    return np.linspace(lo, hi, count)


def curve_svg(x, series, title="", xlabel="", ylabel="") -> str:
    """Render ``series`` of ``(label, y, lower, upper)``; bands are drawn when
    ``lower``/``upper`` are given.  Each series gets exactly one polyline."""
    x = np.asarray(x, dtype=float)
    ys = [np.asarray(s[1], dtype=float) for s in series]
    bands = [np.asarray(b, dtype=float) for s in series for b in s[2:] if b is not None]
    y_all = np.concatenate(ys + bands)
    y_lo, y_hi = float(np.min(y_all)), float(np.max(y_all))
    if y_hi - y_lo < 1e-12:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    x_lo, x_hi = float(x.min()), float(x.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(v):
        return LEFT + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v):
        return TOP + (1.0 - (v - y_lo) / (y_hi - y_lo)) * ph

    def points(xs, vs):
        return " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(xs, vs))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for t in _ticks(y_lo, y_hi):
        out.append(f'<text x="{LEFT - 6}" y="{py(t) + 4:.2f}" text-anchor="end" '
                   f'font-size="11">{t:.3g}</text>')
    for t in _ticks(x_lo, x_hi):
        out.append(f'<text x="{px(t):.2f}" y="{TOP + ph + 16}" text-anchor="middle" '
                   f'font-size="11">{t:.0f}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{TOP + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 16 {TOP + ph / 2:.1f})">{escape(ylabel)}</text>')
    for i, (label, y, lower, upper) in enumerate(series):
        color = COLORS[i % len(COLORS)]
        if lower is not None and upper is not None:
            outline = points(x, upper) + " " + points(x[::-1], np.asarray(lower)[::-1])
            out.append(f'<polygon points="{outline}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        out.append(f'<polyline points="{points(x, y)}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"><title>{escape(label)}</title></polyline>')
        out.append(f'<text x="{LEFT + 10}" y="{TOP + 16 + 16 * i}" font-size="12" '
                   f'fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
