"""Dependency-free SVG output: barycentric scatter of simplex samples and line charts of traces."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

SQRT3_2 = math.sqrt(3) / 2
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _f(v: float) -> str:
    return f"{v:.3f}"


def ternary_xy(points, size: float = 400.0, margin: float = 20.0) -> np.ndarray:
    """Barycentric to SVG coordinates: battlefield 1 at bottom-left, 2 at bottom-right, 3 at the top."""
    P = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if P.shape[1] != 3:
        raise ValueError(f"barycentric plots need 3 coordinates, got {P.shape[1]}")
    corners = np.array([[margin, margin + size * SQRT3_2],
                        [margin + size, margin + size * SQRT3_2],
                        [margin + size / 2, margin]])
    return P @ corners


def ternary_scatter_svg(points, title: str = "", size: float = 400.0, radius: float = 1.5,
                        color: str = COLORS[0], opacity: float = 0.3) -> str:
    margin = 20.0
    xy = ternary_xy(points, size, margin)
    corners = ternary_xy(np.eye(3), size, margin)
    w = size + 2 * margin
    h = size * SQRT3_2 + 2 * margin + (20 if title else 0)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(w)}" height="{_f(h)}" '
             f'viewBox="0 0 {_f(w)} {_f(h)}">']
    tri = " ".join(f"{_f(x)},{_f(y)}" for x, y in corners)
    parts.append(f'<polygon points="{tri}" fill="none" stroke="black" stroke-width="1"/>')
    for i, (x, y) in enumerate(corners):
        parts.append(f'<text x="{_f(x)}" y="{_f(y + (14 if i < 2 else -6))}" font-size="11" '
                     f'text-anchor="middle">x{i + 1}</text>')
    parts.append(f'<g fill="{color}" fill-opacity="{opacity}">')
    parts.extend(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="{radius}"/>' for x, y in xy)
    parts.append("</g>")
    if title:
        parts.append(f'<text x="{_f(w / 2)}" y="{_f(h - 6)}" font-size="12" text-anchor="middle">'
                     f'{escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def line_chart_svg(series: dict[str, tuple], title: str = "", log_y: bool = True,
                   width: float = 520.0, height: float = 320.0) -> str:
    """One ``<polyline>`` per series; ``series`` maps a name to ``(xs, ys)``.

    Non-finite and (on a log axis) non-positive points are dropped.
    """
    left, right, top, bottom = 60.0, 120.0, 30.0, 40.0
    clean = {}
    for name, (xs, ys) in series.items():
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        keep = np.isfinite(xs) & np.isfinite(ys) & ((ys > 0) if log_y else True)
        clean[name] = (xs[keep], np.log10(ys[keep]) if log_y else ys[keep])
    allx = np.concatenate([c[0] for c in clean.values()] or [np.zeros(1)])
    ally = np.concatenate([c[1] for c in clean.values()] or [np.zeros(1)])
    if allx.size == 0:
        allx, ally = np.zeros(1), np.zeros(1)
    x0, x1 = float(allx.min()), float(allx.max())
    y0, y1 = float(ally.min()), float(ally.max())
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" height="{_f(height)}" '
             f'viewBox="0 0 {_f(width)} {_f(height)}">',
             f'<rect x="{_f(left)}" y="{_f(top)}" width="{_f(pw)}" height="{_f(ph)}" fill="none" stroke="black"/>']
    for v, anchor in ((y0, "end"), (y1, "end")):
        label = f"1e{v:.1f}" if log_y else f"{v:.3g}"
        parts.append(f'<text x="{_f(left - 4)}" y="{_f(sy(v) + 4)}" font-size="10" text-anchor="{anchor}">{label}</text>')
    for v in (x0, x1):
        parts.append(f'<text x="{_f(sx(v))}" y="{_f(top + ph + 14)}" font-size="10" text-anchor="middle">{v:g}</text>')
    for i, (name, (xs, ys)) in enumerate(clean.items()):
        c = COLORS[i % len(COLORS)]
        pts = " ".join(f"{_f(sx(x))},{_f(sy(y))}" for x, y in zip(xs, ys))
        parts.append(f'<polyline data-series="{escape(name)}" points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        parts.append(f'<text x="{_f(left + pw + 8)}" y="{_f(top + 14 + 14 * i)}" font-size="11" fill="{c}">{escape(name)}</text>')
    if title:
        parts.append(f'<text x="{_f(left + pw / 2)}" y="{_f(top - 10)}" font-size="12" text-anchor="middle">{escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
