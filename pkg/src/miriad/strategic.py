"""Strategic diagram: clusters on the centrality (x) / density (y) plane.

Quadrant types:
    1  high density, high centrality
    2  low density,  high centrality
    3  high density, low centrality
    4  low density,  low centrality
A coordinate on or above its split counts as high.
"""
from __future__ import annotations

import csv
import io
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass
from typing import Sequence
from xml.sax.saxutils import escape

from .clustering import Cluster


@dataclass(frozen=True)
class MapPoint:
    cluster_id: int
    label: str
    x: float
    y: float
    size: int
    type: int


@dataclass(frozen=True)
class MapEdge:
    a: int
    b: int
    weight: float


@dataclass(frozen=True)
class StrategicMap:
    points: tuple[MapPoint, ...]
    x_split: float
    y_split: float
    edges: tuple[MapEdge, ...]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["cluster", "label", "x", "y", "size", "type"])
        for p in self.points:
            w.writerow([p.cluster_id, p.label, repr(p.x), repr(p.y), p.size, p.type])
        return buf.getvalue()


def quadrant(x: float, y: float, x_split: float, y_split: float) -> int:
    high_c = x >= x_split
    high_d = y >= y_split
    if high_d and high_c:
        return 1
    if high_c:
        return 2
    if high_d:
        return 3
    return 4


def inter_cluster_edges(clusters: Sequence[Cluster]) -> list[MapEdge]:
    """Sum of E over external associations that join two clusters' internal items."""
    owner = {item: c.id for c in clusters for item in c.internal_items}
    seen = set()
    weights: dict[tuple[int, int], list[float]] = defaultdict(list)
    for c in clusters:
        for i, j, v in c.external_associations:
            if (i, j) in seen:
                continue
            ci, cj = owner.get(i), owner.get(j)
            if ci is None or cj is None or ci == cj:
                continue
            seen.add((i, j))
            weights[(min(ci, cj), max(ci, cj))].append(v)
    return [MapEdge(a, b, math.fsum(vs)) for (a, b), vs in sorted(weights.items())]


def build_map(
    clusters: Sequence[Cluster],
    x_split: float | None = None,
    y_split: float | None = None,
) -> StrategicMap:
    """Place clusters on the diagram; splits default to the medians."""
    if not clusters:
        return StrategicMap((), x_split or 0.0, y_split or 0.0, ())
    if x_split is None:
        x_split = statistics.median(c.centrality for c in clusters)
    if y_split is None:
        y_split = statistics.median(c.density for c in clusters)
    points = tuple(
        MapPoint(c.id, c.label, c.centrality, c.density, c.size, quadrant(c.centrality, c.density, x_split, y_split))
        for c in sorted(clusters, key=lambda c: c.id)
    )
    return StrategicMap(points, x_split, y_split, tuple(inter_cluster_edges(clusters)))


# -- rendering ------------------------------------------------------------------

WIDTH = 640
HEIGHT = 480
MARGIN = 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _axis_max(values) -> float:
    top = max(values, default=0.0)
    return top * 1.1 if top > 0 else 1.0


def export_svg(smap: StrategicMap, title: str = "strategic diagram", width: int = WIDTH, height: int = HEIGHT) -> str:
    x_max = _axis_max([p.x for p in smap.points] + [smap.x_split])
    y_max = _axis_max([p.y for p in smap.points] + [smap.y_split])
    plot_w = width - 2 * MARGIN
    plot_h = height - 2 * MARGIN

    def sx(x: float) -> float:
        return MARGIN + plot_w * x / x_max

    def sy(y: float) -> float:
        return height - MARGIN - plot_h * y / y_max

    biggest = max((p.size for p in smap.points), default=1)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f"<title>{escape(title)}</title>",
        '<g id="axes" stroke="black" stroke-width="1">',
        f'<line x1="{MARGIN}" y1="{height - MARGIN}" x2="{width - MARGIN}" y2="{height - MARGIN}"/>',
        f'<line x1="{MARGIN}" y1="{height - MARGIN}" x2="{MARGIN}" y2="{MARGIN}"/>',
        "</g>",
        f'<text x="{width / 2:.0f}" y="{height - MARGIN / 3:.0f}" text-anchor="middle">centrality</text>',
        f'<text x="{MARGIN / 3:.0f}" y="{height / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 {MARGIN / 3:.0f} {height / 2:.0f})">density</text>',
    ]
    if smap.points:
        out += [
            '<g id="splits" stroke="gray" stroke-dasharray="4,4">',
            f'<line x1="{_fmt(sx(smap.x_split))}" y1="{height - MARGIN}" x2="{_fmt(sx(smap.x_split))}" y2="{MARGIN}"/>',
            f'<line x1="{MARGIN}" y1="{_fmt(sy(smap.y_split))}" x2="{width - MARGIN}" y2="{_fmt(sy(smap.y_split))}"/>',
            "</g>",
        ]
    pos = {p.cluster_id: (sx(p.x), sy(p.y)) for p in smap.points}
    if smap.edges:
        out.append('<g id="edges" stroke="steelblue" stroke-opacity="0.6">')
        for e in smap.edges:
            (x1, y1), (x2, y2) = pos[e.a], pos[e.b]
            out.append(
                f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" y2="{_fmt(y2)}" '
                f'data-weight="{e.weight!r}"/>'
            )
        out.append("</g>")
    out.append('<g id="clusters">')
    for p in smap.points:
        x, y = pos[p.cluster_id]
        r = 4 + 16 * p.size / biggest
        out.append(
            f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" fill="orange" fill-opacity="0.7" '
            f'stroke="black" data-cluster="{p.cluster_id}" data-type="{p.type}"/>'
        )
        out.append(f'<text x="{_fmt(x + r + 2)}" y="{_fmt(y + 4)}">{escape(p.label)}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _dot_id(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(smap: StrategicMap) -> str:
    lines = ["graph strategic_map {"]
    for p in smap.points:
        attrs = [
            f"label={_dot_id(p.label)}",
            f'centrality="{p.x!r}"',
            f'density="{p.y!r}"',
            f"size={p.size}",
            f"type={p.type}",
        ]
        lines.append(f"  c{p.cluster_id} [{', '.join(attrs)}];")
    for e in smap.edges:
        lines.append(f'  c{e.a} -- c{e.b} [weight="{e.weight!r}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
