"""Marching-squares contours of level-set grids and their SVG/CSV rendering."""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

from .multiscale import LevelSetGrid

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"]
SVG_SIZE = 600
_MARGIN = 60


@dataclass(frozen=True)
class Polyline:
    points: np.ndarray  # (n, 2) in parameter coordinates
    closed: bool


def _edge_point(grid, key, level):
    kind, a, b = key
    V = grid.values
    if kind == "h":
        va, vb = V[a, b], V[a + 1, b]
        t = (level - va) / (vb - va)
        return np.array([grid.x[a] + t * (grid.x[a + 1] - grid.x[a]), grid.y[b]])
    va, vb = V[a, b], V[a, b + 1]
    t = (level - va) / (vb - va)
    return np.array([grid.x[a], grid.y[b] + t * (grid.y[b + 1] - grid.y[b])])


def _cell_segments(v00, v10, v11, v01, level, a, b):
    above = (v00 > level, v10 > level, v11 > level, v01 > level)
    bottom, right, top, left = ("h", a, b), ("v", a + 1, b), ("h", a, b + 1), ("v", a, b)
    n_above = sum(above)
    if n_above in (0, 4):
        return []
    crossing = []
    if above[0] != above[1]:
        crossing.append(bottom)
    if above[1] != above[2]:
        crossing.append(right)
    if above[2] != above[3]:
        crossing.append(top)
    if above[3] != above[0]:
        crossing.append(left)
    if len(crossing) == 2:
        return [tuple(crossing)]
    # saddle: decide connectivity from the cell-centre average
    center_above = 0.25 * (v00 + v10 + v11 + v01) > level
    if above[0] == center_above:
        # the 00/11 diagonal shares the centre's side: cut off the 10 and 01 corners
        return [(bottom, right), (top, left)]
    return [(left, bottom), (right, top)]


def contour_polylines(grid: LevelSetGrid, levels) -> list[list[Polyline]]:
    """Contours of ``grid.values`` at each level, as stitched polylines.

    Cells touching a missing value are skipped, so contours stop at
    infeasible regions.
    """
    V = grid.values
    ni, nj = V.shape
    out = []
    for level in np.atleast_1d(np.asarray(levels, dtype=float)):
        adj: dict = {}
        for a in range(ni - 1):
            for b in range(nj - 1):
                c = (V[a, b], V[a + 1, b], V[a + 1, b + 1], V[a, b + 1])
                if not np.all(np.isfinite(c)):
                    continue
                for e1, e2 in _cell_segments(*c, level, a, b):
                    adj.setdefault(e1, []).append(e2)
                    adj.setdefault(e2, []).append(e1)
        out.append(_stitch(grid, adj, level))
    return out


def _stitch(grid, adj, level):
    lines = []
    used = set()

    def walk(start):
        chain = [start]
        prev, cur = None, start
        while True:
            nxt = [n for n in adj[cur] if (min(cur, n), max(cur, n)) not in used]
            if not nxt:
                return chain
            n = nxt[0]
            used.add((min(cur, n), max(cur, n)))
            prev, cur = cur, n
            if cur == start:
                return chain + [start]
            chain.append(cur)

    # open chains start at degree-one nodes; what is left over are loops
    for node in sorted(adj):
        if len(adj[node]) == 1 and any((min(node, n), max(node, n)) not in used for n in adj[node]):
            chain = walk(node)
            lines.append(Polyline(np.array([_edge_point(grid, k, level) for k in chain]), False))
    for node in sorted(adj):
        if any((min(node, n), max(node, n)) not in used for n in adj[node]):
            chain = walk(node)
            closed = len(chain) > 2 and chain[0] == chain[-1]
            pts = chain[:-1] if closed else chain
            lines.append(Polyline(np.array([_edge_point(grid, k, level) for k in pts]), closed))
    return lines


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def render_svg(grid: LevelSetGrid, levels, polylines, labels=None) -> str:
    """SVG 1.1 document, 600 x 600, one colour per level from an 8-colour cycle."""
    x0, x1 = grid.x[0], grid.x[-1]
    y0, y1 = grid.y[0], grid.y[-1]
    span = SVG_SIZE - 2 * _MARGIN
    if labels is None:
        labels = (f"p{grid.axis_i + 1}", f"p{grid.axis_j + 1}")

    def sx(x):
        return _MARGIN + (x - x0) / (x1 - x0) * span

    def sy(y):
        return SVG_SIZE - _MARGIN - (y - y0) / (y1 - y0) * span

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SVG_SIZE}" height="{SVG_SIZE}" '
        f'viewBox="0 0 {SVG_SIZE} {SVG_SIZE}">',
        f'<rect x="{_MARGIN}" y="{_MARGIN}" width="{span}" height="{span}" fill="white" stroke="black"/>',
    ]
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        xv = x0 + frac * (x1 - x0)
        yv = y0 + frac * (y1 - y0)
        parts.append(f'<line x1="{sx(xv):.2f}" y1="{SVG_SIZE - _MARGIN}" x2="{sx(xv):.2f}" '
                     f'y2="{SVG_SIZE - _MARGIN + 5}" stroke="black"/>')
        parts.append(f'<text x="{sx(xv):.2f}" y="{SVG_SIZE - _MARGIN + 20}" font-size="12" '
                     f'text-anchor="middle">{_fmt(xv)}</text>')
        parts.append(f'<line x1="{_MARGIN - 5}" y1="{sy(yv):.2f}" x2="{_MARGIN}" y2="{sy(yv):.2f}" stroke="black"/>')
        parts.append(f'<text x="{_MARGIN - 8}" y="{sy(yv) + 4:.2f}" font-size="12" '
                     f'text-anchor="end">{_fmt(yv)}</text>')
    parts.append(f'<text x="{SVG_SIZE / 2}" y="{SVG_SIZE - 15}" font-size="14" '
                 f'text-anchor="middle">{escape(labels[0])}</text>')
    parts.append(f'<text x="18" y="{SVG_SIZE / 2}" font-size="14" text-anchor="middle" '
                 f'transform="rotate(-90 18 {SVG_SIZE / 2})">{escape(labels[1])}</text>')
    for k, (level, lines) in enumerate(zip(np.atleast_1d(levels), polylines)):
        color = COLORS[k % len(COLORS)]
        for line in lines:
            pts = line.points
            d = "M " + " L ".join(f"{sx(x):.3f} {sy(y):.3f}" for x, y in pts)
            if line.closed:
                d += " Z"
            parts.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.2" '
                         f'data-level="{float(level)!r}"/>')
    p0x, p0y = grid.p0[grid.axis_i], grid.p0[grid.axis_j]
    if x0 <= p0x <= x1 and y0 <= p0y <= y1:
        parts.append(f'<circle cx="{sx(p0x):.3f}" cy="{sy(p0y):.3f}" r="3" fill="black"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
