"""GeoJSON and SVG renderings of a strategy, and the sweep table."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable

import numpy as np

from .analysis import MetricsReport
from .environment import AmbushAreaSet
from .network import Network

#: Edges carrying less flow than this are drawn thin and grey.
GREY_BELOW = 1e-4
SWEEP_HEADER = ["method", "n", "sqrt_n", "lambda", "seed", "outcome", "energy", "spreading", "entropy", "status"]


class ExportError(ValueError):
    pass


def area_alpha(areas: AmbushAreaSet, alpha) -> np.ndarray:
    """Largest local outcome found in each area."""
    out = np.zeros(areas.n_areas)
    np.maximum.at(out, areas.node_area, np.asarray(alpha, float))
    return out


def _num(x: float):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2 ** 53 else x


def to_geojson(network: Network, p, q, areas: AmbushAreaSet, alpha, tol: float = 0.0) -> dict:
    """Feature collection in local planar meters.

    Edges with flow above ``tol`` become LineStrings with ``flow``; areas
    become Polygons (square tiles) or Points (node areas) with ``alpha`` and
    ``q``; origin and destination are Points.
    """
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    pos = network.positions
    feats = []
    for k in np.flatnonzero(p > tol):
        t, h = int(network.tails[k]), int(network.heads[k])
        feats.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": [[_num(v) for v in pos[t]], [_num(v) for v in pos[h]]]},
            "properties": {"kind": "edge", "edge": int(k), "tail": t, "head": h, "flow": float(p[k])},
        })
    a_alpha = area_alpha(areas, alpha)
    centers = areas.centers(pos) if areas.cells is None else None
    for a in range(areas.n_areas):
        props = {"kind": "area", "area": a, "alpha": float(a_alpha[a]), "q": float(q[a])}
        if areas.cells is not None:
            x0, y0, x1, y1 = (_num(v) for v in areas.cells[a])
            geom = {"type": "Polygon", "coordinates": [[[x0, y0], [x1, y0], [x1, y1], [x0, y1], [x0, y0]]]}
        else:
            geom = {"type": "Point", "coordinates": [_num(v) for v in centers[a]]}
        feats.append({"type": "Feature", "geometry": geom, "properties": props})
    for role, v in (("origin", network.origin), ("destination", network.destination)):
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [_num(c) for c in pos[v]]},
            "properties": {"kind": role, "node": int(v)},
        })
    return {"type": "FeatureCollection", "features": feats}


def export_geojson(network: Network, p, q, areas: AmbushAreaSet, alpha) -> str:
    return json.dumps(to_geojson(network, p, q, areas, alpha), indent=1, sort_keys=True) + "\n"


def read_geojson_flows(text: str, n_edges: int) -> np.ndarray:
    """Edge flows from an exported document; edges not listed carry 0."""
    doc = json.loads(text)
    if doc.get("type") != "FeatureCollection":
        raise ExportError("not a feature collection")
    p = np.zeros(n_edges)
    for f in doc["features"]:
        props = f.get("properties", {})
        if props.get("kind") == "edge":
            k = props["edge"]
            if not 0 <= k < n_edges:
                raise ExportError(f"edge id {k} out of range")
            p[k] = props["flow"]
    return p


def _fmt(x: float) -> str:
    return f"{x:.3f}".rstrip("0").rstrip(".")


def export_svg(network: Network, p, q, areas: AmbushAreaSet, alpha, bounds=None,
               width_px: int = 800, q_tol: float = 1e-12) -> str:
    """Vector rendering: stroke width follows flow, area tint follows alpha,
    red circles mark RED's ambush distribution."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    pos = network.positions
    if bounds is None:
        if areas.cells is not None:
            bounds = (areas.cells[:, 0].min(), areas.cells[:, 1].min(), areas.cells[:, 2].max(), areas.cells[:, 3].max())
        else:
            bounds = (*pos.min(axis=0), *pos.max(axis=0))
    x0, y0, x1, y1 = (float(b) for b in bounds)
    w, h = max(x1 - x0, 1e-9), max(y1 - y0, 1e-9)
    s = width_px / w
    H = h * s

    def X(x):
        return _fmt((x - x0) * s)

    def Y(y):
        return _fmt((y1 - y) * s)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width_px}" height="{_fmt(H)}" '
        f'viewBox="0 0 {width_px} {_fmt(H)}">',
        f'<rect x="0" y="0" width="{width_px}" height="{_fmt(H)}" fill="white"/>',
        '<g id="areas">',
    ]
    a_alpha = area_alpha(areas, alpha)
    if areas.cells is not None:
        for a, (cx0, cy0, cx1, cy1) in enumerate(areas.cells):
            out.append(
                f'<rect x="{X(cx0)}" y="{Y(cy1)}" width="{_fmt((cx1 - cx0) * s)}" height="{_fmt((cy1 - cy0) * s)}" '
                f'fill="#d95f02" fill-opacity="{_fmt(0.35 * a_alpha[a])}" stroke="#bbbbbb" stroke-width="0.5"/>'
            )
    out.append("</g>")
    out.append('<g id="edges" stroke-linecap="round">')
    top = p.max() if p.size and p.max() > 0 else 1.0
    order = np.argsort(p, kind="stable")
    for k in order:
        a, b = pos[network.tails[k]], pos[network.heads[k]]
        if p[k] < GREY_BELOW:
            style = 'stroke="#c8c8c8" stroke-width="0.4"'
        else:
            style = f'stroke="#1f3f99" stroke-width="{_fmt(0.5 + 5.5 * p[k] / top)}"'
        out.append(f'<line x1="{X(a[0])}" y1="{Y(a[1])}" x2="{X(b[0])}" y2="{Y(b[1])}" {style}/>')
    out.append("</g>")
    out.append('<g id="ambush">')
    centers = areas.centers(pos)
    rmax = 0.4 * (areas.reach * s if areas.reach > 0 else 20.0)
    for a in np.flatnonzero(q > q_tol):
        r = max(rmax * math.sqrt(q[a] / q.max()), 1.0)
        cx, cy = centers[a]
        out.append(f'<circle cx="{X(cx)}" cy="{Y(cy)}" r="{_fmt(r)}" fill="red" fill-opacity="0.6"/>')
    out.append("</g>")
    for role, v, color in (("origin", network.origin, "#1b9e77"), ("destination", network.destination, "#000000")):
        out.append(f'<circle id="{role}" cx="{X(pos[v][0])}" cy="{Y(pos[v][1])}" r="5" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def export_strategy(network: Network, p, q, areas: AmbushAreaSet, alpha, format: str = "geojson") -> str:
    if format == "geojson":
        return export_geojson(network, p, q, areas, alpha)
    if format == "svg":
        return export_svg(network, p, q, areas, alpha)
    raise ExportError(f"unknown export format {format!r}")


def _cell(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else repr(x)
    return str(x)


def write_sweep_csv(rows: Iterable[MetricsReport]) -> str:
    """Sweep table sorted by method, size and seed."""
    rows = list(rows)
    if not rows:
        raise ExportError("a sweep table needs at least one row")
    rows.sort(key=lambda r: (r.method, r.n, r.seed))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_HEADER)
    for r in rows:
        w.writerow([_cell(v) for v in (r.method, r.n, r.sqrt_n, r.lam, r.seed, r.outcome, r.energy,
                                        r.spreading, r.entropy, r.status)])
    return buf.getvalue()


def read_sweep_csv(text: str) -> list[dict]:
    return list(csv.DictReader(io.StringIO(text)))
