"""Standalone SVG figures: map profiles, partitions, trajectories, sizes, profiles, PCA circles."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .som import CodeBook, Topology

PALETTE = (
    "#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e",
    "#e6ab02", "#a6761d", "#666666", "#1f78b4", "#b2df8a",
)


def gray_tones(k: int) -> list[str]:
    """``k`` gray levels from light to dark."""
    if k == 1:
        return ["#bbbbbb"]
    out = []
    for i in range(k):
        v = int(round(235 - i * (235 - 70) / (k - 1)))
        out.append(f"#{v:02x}{v:02x}{v:02x}")
    return out


def color(i: int, grayscale: bool = False, k: int | None = None) -> str:
    if grayscale:
        return gray_tones(k or len(PALETTE))[i]
    return PALETTE[i % len(PALETTE)]


def _n(v: float) -> str:
    return f"{v:.2f}"


class Svg:
    def __init__(self, width: float, height: float, title: str = ""):
        self.width, self.height = width, height
        self.parts: list[str] = []
        if title:
            self.parts.append(f"<title>{escape(title)}</title>")

    def rect(self, x, y, w, h, fill="none", stroke="#000000", width=1.0, **extra):
        attrs = "".join(f" {k.replace('_', '-')}={quoteattr(str(v))}" for k, v in extra.items())
        self.parts.append(
            f'<rect x="{_n(x)}" y="{_n(y)}" width="{_n(w)}" height="{_n(h)}" fill="{fill}" stroke="{stroke}" stroke-width="{_n(width)}"{attrs}/>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, marker=None, dash=None):
        m = f' marker-end="url(#{marker})"' if marker else ""
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.parts.append(
            f'<line x1="{_n(x1)}" y1="{_n(y1)}" x2="{_n(x2)}" y2="{_n(y2)}" stroke="{stroke}" stroke-width="{_n(width)}"{m}{d}/>'
        )

    def polyline(self, points, stroke="#000000", width=1.0):
        pts = " ".join(f"{_n(x)},{_n(y)}" for x, y in points)
        self.parts.append(f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{_n(width)}"/>')

    def circle(self, cx, cy, r, fill="none", stroke="#000000", width=1.0):
        self.parts.append(
            f'<circle cx="{_n(cx)}" cy="{_n(cy)}" r="{_n(r)}" fill="{fill}" stroke="{stroke}" stroke-width="{_n(width)}"/>'
        )

    def text(self, x, y, s, size=10, anchor="start", fill="#000000"):
        self.parts.append(
            f'<text x="{_n(x)}" y="{_n(y)}" font-family="sans-serif" font-size="{size}" text-anchor="{anchor}" fill="{fill}">{escape(str(s))}</text>'
        )

    def arrow_marker(self, ident="arrow", fill="#000000"):
        self.parts.append(
            f'<defs><marker id="{ident}" viewBox="0 0 10 10" refX="9" refY="5" markerWidth="6" markerHeight="6" orient="auto">'
            f'<path d="M 0 0 L 10 5 L 0 10 z" fill="{fill}"/></marker></defs>'
        )

    def render(self) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_n(self.width)}" height="{_n(self.height)}" '
            f'viewBox="0 0 {_n(self.width)} {_n(self.height)}">\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _grid_shape(topology: Topology) -> tuple[int, int]:
    return topology.rows, topology.cols


def profiles_svg(codebook: CodeBook, codes: Sequence[str] = (), unit_to_super=None, cell: float = 70.0, grayscale: bool = True) -> str:
    """One small profile panel per unit, laid out on the map grid (unit 1 top-left)."""
    rows, cols = _grid_shape(codebook.topology)
    pad, top = 10.0, 24.0
    svg = Svg(cols * cell + 2 * pad, rows * cell + top + pad, "code-vector profiles")
    svg.text(pad, 16, f"Code-vector profiles ({codebook.n_units} units, {codebook.dimension} variables)", 12)
    w = codebook.weights
    lo, hi = float(w.min()), float(w.max())
    span = hi - lo or 1.0
    k = int(np.max(unit_to_super)) if unit_to_super is not None else 0
    for u in range(codebook.n_units):
        r, c = divmod(u, cols)
        x0, y0 = pad + c * cell, top + r * cell
        fill = "none"
        if unit_to_super is not None:
            fill = color(int(unit_to_super[u]) - 1, grayscale, k)
        svg.rect(x0, y0, cell, cell, fill=fill, stroke="#444444", width=0.5)
        d = codebook.dimension
        xs = [x0 + 4 + (cell - 8) * (j / max(d - 1, 1)) for j in range(d)]
        ys = [y0 + cell - 4 - (cell - 16) * (v - lo) / span for v in w[u]]
        zero = y0 + cell - 4 - (cell - 16) * (0 - lo) / span
        if lo <= 0 <= hi:
            svg.line(x0 + 2, zero, x0 + cell - 2, zero, stroke="#999999", width=0.4, dash="2,2")
        svg.polyline(zip(xs, ys), stroke="#000000", width=1.0)
        svg.text(x0 + 3, y0 + 10, u + 1, 8, fill="#333333")
    return svg.render()


def partition_svg(topology: Topology, unit_to_super, k: int, cell: float = 40.0, grayscale: bool = True) -> str:
    """Map grid shaded by super-class."""
    rows, cols = _grid_shape(topology)
    pad, top = 10.0, 24.0
    svg = Svg(cols * cell + 2 * pad, rows * cell + top + pad, "super-class partition")
    svg.text(pad, 16, f"{k} super-classes", 12)
    for u in range(topology.n_units):
        r, c = divmod(u, cols)
        s = int(unit_to_super[u])
        fill = color(s - 1, grayscale, k)
        svg.rect(pad + c * cell, top + r * cell, cell, cell, fill=fill, stroke="#ffffff", width=1.0)
        txt = "#ffffff" if grayscale and s - 1 >= k / 2 else "#000000"
        svg.text(pad + c * cell + cell / 2, top + r * cell + cell / 2 + 4, s, 11, "middle", txt)
    return svg.render()


def trajectory_svg(topology: Topology, units_by_individual: dict, years: Sequence[int], cell: float = 50.0, unit_to_super=None, k: int = 0) -> str:
    """Arrows between the (1-based) units an individual occupies in consecutive years."""
    rows, cols = _grid_shape(topology)
    pad, top = 10.0, 24.0
    legend = 16.0 * len(units_by_individual)
    svg = Svg(cols * cell + 2 * pad, rows * cell + top + pad + legend, "trajectories")
    svg.text(pad, 16, f"Trajectories {years[0]}-{years[-1]}", 12)
    for u in range(topology.n_units):
        r, c = divmod(u, cols)
        fill = color(int(unit_to_super[u]) - 1, True, k) if unit_to_super is not None else "#ffffff"
        svg.rect(pad + c * cell, top + r * cell, cell, cell, fill=fill, stroke="#cccccc", width=0.5)
    for i, (ident, units) in enumerate(units_by_individual.items()):
        col = color(i)
        svg.arrow_marker(f"arrow{i}", col)
        jitter = (i - (len(units_by_individual) - 1) / 2) * 3.0

        def centre(unit):
            r, c = divmod(int(unit) - 1, cols)
            return pad + c * cell + cell / 2 + jitter, top + r * cell + cell / 2 + jitter

        pts = [centre(u) for u in units]
        svg.circle(*pts[0], 4, fill=col, stroke=col)
        for (x1, y1), (x2, y2) in zip(pts, pts[1:]):
            if (x1, y1) == (x2, y2):
                svg.circle(x1, y1, 7, stroke=col, width=1.0)
                continue
            dx, dy = x2 - x1, y2 - y1
            L = math.hypot(dx, dy)
            svg.line(x1, y1, x2 - 6 * dx / L, y2 - 6 * dy / L, stroke=col, width=1.6, marker=f"arrow{i}")
        svg.text(pad, top + rows * cell + 14 + 16 * i, f"{ident}: {' '.join(str(u) for u in units)}", 10, fill=col)
    return svg.render()


def sizes_svg(labels: Sequence, sizes: Sequence[int], width: float = 420.0, height: float = 260.0, grayscale: bool = True) -> str:
    """Vertical bar chart of class sizes."""
    pad, top, bottom = 40.0, 24.0, 30.0
    svg = Svg(width, height, "class sizes")
    svg.text(10, 16, "Class sizes", 12)
    n = len(labels)
    vmax = max(max(sizes), 1)
    bw = (width - 2 * pad) / max(n, 1)
    base = height - bottom
    svg.line(pad, base, width - pad, base)
    for i, (lab, s) in enumerate(zip(labels, sizes)):
        h = (base - top - 12) * s / vmax
        x = pad + i * bw + bw * 0.15
        svg.rect(x, base - h, bw * 0.7, h, fill=color(i, grayscale, n), stroke="#333333", width=0.5)
        svg.text(x + bw * 0.35, base - h - 3, int(s), 9, "middle")
        svg.text(x + bw * 0.35, base + 14, lab, 10, "middle")
    return svg.render()


def class_profiles_svg(weights: np.ndarray, labels: Sequence, codes: Sequence[str], width: float = 560.0, height: float = 320.0) -> str:
    """One curve per class across the variables (x axis numbered 1..p)."""
    weights = np.asarray(weights, float)
    pad, top, bottom, right = 40.0, 24.0, 30.0, 60.0
    svg = Svg(width, height, "class profiles")
    svg.text(10, 16, "Class code vectors", 12)
    p = weights.shape[1]
    lo, hi = float(weights.min()), float(weights.max())
    span = hi - lo or 1.0
    x_of = lambda j: pad + (width - pad - right) * j / max(p - 1, 1)
    y_of = lambda v: height - bottom - (height - top - bottom) * (v - lo) / span
    svg.line(pad, y_of(lo), width - right, y_of(lo), stroke="#555555")
    if lo <= 0 <= hi:
        svg.line(pad, y_of(0), width - right, y_of(0), stroke="#999999", width=0.5, dash="3,3")
    for j in range(p):
        svg.text(x_of(j), height - bottom + 14, j + 1, 9, "middle")
    for i, lab in enumerate(labels):
        col = color(i)
        svg.polyline([(x_of(j), y_of(v)) for j, v in enumerate(weights[i])], stroke=col, width=1.5)
        svg.text(width - right + 6, y_of(weights[i, -1]) + 3, lab, 10, fill=col)
    key = ", ".join(f"{j + 1}={c}" for j, c in enumerate(codes))
    if key:
        svg.text(pad, height - 4, key, 7)
    return svg.render()


def pca_projection_svg(codes: Sequence[str], xy: np.ndarray, axes=(1, 2), size: float = 360.0) -> str:
    """Variables on the correlation circle of two principal axes."""
    pad = 30.0
    svg = Svg(size, size, f"variables on axes {axes[0]} and {axes[1]}")
    c = size / 2
    r = c - pad
    svg.circle(c, c, r, stroke="#777777")
    svg.line(pad, c, size - pad, c, stroke="#bbbbbb", width=0.5)
    svg.line(c, pad, c, size - pad, stroke="#bbbbbb", width=0.5)
    svg.text(size - pad, c - 4, f"axis {axes[0]}", 9, "end")
    svg.text(c + 4, pad - 4, f"axis {axes[1]}", 9)
    for code, (x, y) in zip(codes, np.asarray(xy, float)):
        px, py = c + r * x, c - r * y
        svg.line(c, c, px, py, stroke="#1f78b4", width=0.8)
        svg.circle(px, py, 2.5, fill="#1f78b4", stroke="#1f78b4")
        svg.text(px + 4, py - 3, code, 9)
    return svg.render()
