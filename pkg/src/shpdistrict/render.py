"""Deterministic SVG output: district maps and simple box plots."""

from __future__ import annotations

import colorsys
from xml.sax.saxutils import escape

import numpy as np

from .geo_graph import AdjacencyGraph


def palette(n: int) -> list[str]:
    """n distinct colors spaced by the golden angle in hue."""
    out = []
    for i in range(n):
        h = (i * 0.618033988749895) % 1.0
        r, g, b = colorsys.hls_to_rgb(h, 0.55 if i % 2 else 0.45, 0.65)
        out.append("#%02x%02x%02x" % (round(r * 255), round(g * 255), round(b * 255)))
    return out


def _cell_size(xy: np.ndarray) -> float:
    if len(xy) < 2:
        return 1.0
    d = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=2)
    np.fill_diagonal(d, np.inf)
    return float(np.min(d))


def plan_svg(graph: AdjacencyGraph, plan, scale: float = 20.0) -> str:
    """Blocks drawn as squares at their centroids, colored by district."""
    label = np.full(graph.n, -1)
    for i, d in enumerate(plan):
        label[sorted(d)] = i
    if (label < 0).any():
        raise ValueError("plan does not cover every block")
    xy = graph.xy
    size = _cell_size(xy)
    lo = xy.min(axis=0) - size / 2
    hi = xy.max(axis=0) + size / 2
    width, height = (hi - lo) * scale
    colors = palette(len(plan))
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width:.2f}" height="{height:.2f}" '
             f'viewBox="0 0 {width:.2f} {height:.2f}">']
    for b in range(graph.n):
        x = (xy[b, 0] - size / 2 - lo[0]) * scale
        y = (hi[1] - xy[b, 1] - size / 2) * scale
        lines.append(f'<rect id="b{b}" x="{x:.2f}" y="{y:.2f}" width="{size * scale:.2f}" '
                     f'height="{size * scale:.2f}" fill="{colors[label[b]]}" stroke="#ffffff" '
                     f'stroke-width="0.5"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def boxplot_svg(groups: dict[str, list[float]], title: str, width: int = 360, height: int = 240) -> str:
    """Min, quartiles and max per group on a shared vertical axis."""
    names = list(groups)
    values = np.concatenate([np.asarray(groups[n], dtype=float) for n in names])
    lo, hi = float(values.min()), float(values.max())
    if hi == lo:
        hi = lo + 1.0
    pad = 30
    y = lambda v: height - pad - (v - lo) / (hi - lo) * (height - 2 * pad)
    slot = (width - 2 * pad) / len(names)
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{width / 2:.1f}" y="16" text-anchor="middle" font-size="12">{escape(title)}</text>']
    for i, n in enumerate(names):
        q0, q1, q2, q3, q4 = np.percentile(np.asarray(groups[n], dtype=float), [0, 25, 50, 75, 100])
        cx = pad + slot * (i + 0.5)
        bw = slot * 0.4
        lines += [
            f'<line x1="{cx:.1f}" y1="{y(q0):.1f}" x2="{cx:.1f}" y2="{y(q4):.1f}" stroke="#333"/>',
            f'<rect x="{cx - bw / 2:.1f}" y="{y(q3):.1f}" width="{bw:.1f}" height="{max(y(q1) - y(q3), 0.5):.1f}" '
            f'fill="{palette(len(names))[i]}" stroke="#333"/>',
            f'<line x1="{cx - bw / 2:.1f}" y1="{y(q2):.1f}" x2="{cx + bw / 2:.1f}" y2="{y(q2):.1f}" stroke="#000"/>',
            f'<text x="{cx:.1f}" y="{height - 10}" text-anchor="middle" font-size="11">{escape(n)}</text>',
        ]
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
