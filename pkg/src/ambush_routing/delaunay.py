"""Incremental Bowyer-Watson Delaunay triangulation.

Predicates are evaluated in floating point behind a static error filter and
fall back to exact rational arithmetic. Exactly cocircular quadruples are
broken by simulation of simplicity: point ``i`` is lifted above the
paraboloid by ``eps**(i+1)``, so lower indices carry the larger
perturbation. The hull is handled with ghost triangles (vertex ``-1``).
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

GHOST = -1

_ORIENT_ERR = 3.3306690738754716e-16
_INCIRCLE_ERR = 1.1102230246251577e-15


class TriangulationError(ValueError):
    pass


def _orient_exact(a, b, c) -> int:
    ax, ay = map(Fraction, a)
    bx, by = map(Fraction, b)
    cx, cy = map(Fraction, c)
    det = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (det > 0) - (det < 0)


def orient(a, b, c) -> int:
    """Sign of twice the signed area of ``abc`` (+1 counterclockwise)."""
    l = (b[0] - a[0]) * (c[1] - a[1])
    r = (b[1] - a[1]) * (c[0] - a[0])
    det = l - r
    bound = _ORIENT_ERR * (abs(l) + abs(r))
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _orient_exact(a, b, c)


def _incircle_exact(a, b, c, d) -> int:
    dx, dy = map(Fraction, d)
    rows = []
    for p in (a, b, c):
        px, py = Fraction(p[0]) - dx, Fraction(p[1]) - dy
        rows.append((px, py, px * px + py * py))
    (ax, ay, al), (bx, by, bl), (cx, cy, cl) = rows
    det = al * (bx * cy - cx * by) + bl * (cx * ay - ax * cy) + cl * (ax * by - bx * ay)
    return (det > 0) - (det < 0)


def incircle(a, b, c, d) -> int:
    """+1 if ``d`` is strictly inside the circle through ccw ``a, b, c``."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    bc1, bc2 = bdx * cdy, cdx * bdy
    ca1, ca2 = cdx * ady, adx * cdy
    ab1, ab2 = adx * bdy, bdx * ady
    al = adx * adx + ady * ady
    bl = bdx * bdx + bdy * bdy
    cl = cdx * cdx + cdy * cdy
    det = al * (bc1 - bc2) + bl * (ca1 - ca2) + cl * (ab1 - ab2)
    perm = (abs(bc1) + abs(bc2)) * al + (abs(ca1) + abs(ca2)) * bl + (abs(ab1) + abs(ab2)) * cl
    bound = _INCIRCLE_ERR * perm
    if det > bound:
        return 1
    if -det > bound:
        return -1
    return _incircle_exact(a, b, c, d)


def incircle_sos(pts, ia, ib, ic, id_) -> int:
    """Perturbed incircle test; never returns 0 for a ccw triangle."""
    a, b, c, d = pts[ia], pts[ib], pts[ic], pts[id_]
    s = incircle(a, b, c, d)
    if s:
        return s
    # d/dw_i of the lifted determinant, in order of decreasing perturbation
    terms = sorted(
        [
            (ia, lambda: orient(d, b, c)),
            (ib, lambda: orient(d, c, a)),
            (ic, lambda: orient(d, a, b)),
            (id_, lambda: -orient(a, b, c)),
        ]
    )
    for _, f in terms:
        s = f()
        if s:
            return s
    raise TriangulationError("degenerate triangle in incircle test")


class _Mesh:
    def __init__(self, pts):
        self.pts = pts
        self.verts: list[list[int]] = []
        self.nbrs: list[list[int]] = []
        self.alive: list[bool] = []
        self.last = 0

    def add(self, v) -> int:
        self.verts.append(list(v))
        self.nbrs.append([-1, -1, -1])
        self.alive.append(True)
        return len(self.verts) - 1

    def conflict(self, t, d) -> bool:
        a, b, c = self.verts[t]
        pts = self.pts
        if GHOST not in (a, b, c):
            return incircle_sos(pts, a, b, c, d) > 0
        # rotate so the ghost is last: real hull edge a->b, outside on its left
        while c != GHOST:
            a, b, c = b, c, a
        s = orient(pts[a], pts[b], pts[d])
        if s > 0:
            return True
        if s < 0:
            return False
        pa, pb, pd = pts[a], pts[b], pts[d]
        dot = (pd[0] - pa[0]) * (pb[0] - pa[0]) + (pd[1] - pa[1]) * (pb[1] - pa[1])
        len2 = (pb[0] - pa[0]) ** 2 + (pb[1] - pa[1]) ** 2
        return 0 < dot < len2

    def locate(self, d) -> int:
        pts = self.pts
        p = pts[d]
        t = self.last
        if not self.alive[t] or GHOST in self.verts[t]:
            t = next(i for i, v in enumerate(self.verts) if self.alive[i] and GHOST not in v)
        start = 0
        for _ in range(4 * len(self.verts) + 10):
            v = self.verts[t]
            if GHOST in v:
                return t
            moved = False
            for k in range(3):
                i = (start + k) % 3
                if orient(pts[v[(i + 1) % 3]], pts[v[(i + 2) % 3]], p) < 0:
                    t = self.nbrs[t][i]
                    start = (start + 1) % 3
                    moved = True
                    break
            if not moved:
                for u in v:
                    if pts[u][0] == p[0] and pts[u][1] == p[1]:
                        raise TriangulationError(f"duplicate point {d} coincides with {u}")
                return t
        raise TriangulationError("point location did not terminate")

    def insert(self, d):
        seed = self.locate(d)
        cavity = {seed}
        stack = [seed]
        while stack:
            t = stack.pop()
            for n in self.nbrs[t]:
                if n not in cavity and self.conflict(n, d):
                    cavity.add(n)
                    stack.append(n)
        boundary = []
        for t in cavity:
            v = self.verts[t]
            for i in range(3):
                n = self.nbrs[t][i]
                if n not in cavity:
                    boundary.append((v[(i + 1) % 3], v[(i + 2) % 3], n, t))
        for t in cavity:
            self.alive[t] = False
        starts, ends = {}, {}
        for p, q, outside, old in boundary:
            t = self.add((p, q, d))
            self.nbrs[t][2] = outside
            on = self.nbrs[outside]
            on[on.index(old)] = t
            starts[p] = t
            ends[q] = t
            if GHOST not in (p, q):
                self.last = t
        # the new triangles (p, q, d) form a fan around d: across (q, d) is
        # the fan triangle starting at q, across (d, p) the one ending at p
        try:
            for p, q, _, _ in boundary:
                t = starts[p]
                self.nbrs[t][0] = starts[q]
                self.nbrs[t][1] = ends[p]
        except KeyError:
            raise TriangulationError("cavity boundary is not a closed fan") from None

    def edges(self) -> set[tuple[int, int]]:
        out = set()
        for t, v in enumerate(self.verts):
            if not self.alive[t] or GHOST in v:
                continue
            for i in range(3):
                a, b = v[i], v[(i + 1) % 3]
                out.add((a, b) if a < b else (b, a))
        return out

    def triangles(self) -> list[tuple[int, int, int]]:
        return [tuple(v) for t, v in enumerate(self.verts) if self.alive[t] and GHOST not in v]


def _triangulate(points) -> _Mesh:
    pts = [(float(x), float(y)) for x, y in np.asarray(points, dtype=float)]
    n = len(pts)
    if n < 3:
        raise TriangulationError("need at least three points")
    k = next((k for k in range(2, n) if orient(pts[0], pts[1], pts[k]) != 0), None)
    if pts[0] == pts[1]:
        raise TriangulationError("duplicate point 1 coincides with 0")
    if k is None:
        raise TriangulationError("all points are collinear")
    mesh = _Mesh(pts)
    a, b, c = (0, 1, k) if orient(pts[0], pts[1], pts[k]) > 0 else (0, k, 1)
    t0 = mesh.add((a, b, c))
    g_ab = mesh.add((b, a, GHOST))
    g_bc = mesh.add((c, b, GHOST))
    g_ca = mesh.add((a, c, GHOST))
    mesh.nbrs[t0] = [g_bc, g_ca, g_ab]
    # ghost (b, a, G): opposite b is (a, G) -> ghost (a, c, G); opposite a is (G, b) -> ghost (c, b, G)
    mesh.nbrs[g_ab] = [g_ca, g_bc, t0]
    mesh.nbrs[g_bc] = [g_ab, g_ca, t0]
    mesh.nbrs[g_ca] = [g_bc, g_ab, t0]
    for d in range(2, n):
        if d != k:
            mesh.insert(d)
    return mesh


def delaunay_triangles(points) -> list[tuple[int, int, int]]:
    """Counterclockwise vertex triples of the Delaunay triangulation."""
    return _triangulate(points).triangles()


def delaunay_edges(points) -> list[tuple[int, int]]:
    """Sorted undirected edges ``(i, j)``, ``i < j``, of the Delaunay triangulation."""
    return sorted(_triangulate(points).edges())
