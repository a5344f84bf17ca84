"""Network construction over an environment and assembly of the game matrices."""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from .delaunay import delaunay_edges, orient
from .environment import AmbushAreaSet, Environment, OutcomeMap


class NetworkError(ValueError):
    pass


class ConnectivityError(NetworkError):
    """No directed origin-to-destination path exists."""


class Method(str, enum.Enum):
    RDM = "rdm"
    UNI8 = "uni8"
    UNID = "uniD"


class AmbushRule(str, enum.Enum):
    """How an ambush area charges a route.

    ``node``: every node entered inside the area costs its local outcome.
    ``entry``: only edges crossing into the area from outside do.
    """

    NODE = "node"
    ENTRY = "entry"


def _ro(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Network:
    positions: np.ndarray
    tails: np.ndarray
    heads: np.ndarray
    lengths: np.ndarray
    origin: int
    destination: int
    edge_speed: Optional[np.ndarray] = None

    def __post_init__(self):
        for name, dtype in (("positions", float), ("tails", np.int64), ("heads", np.int64), ("lengths", float)):
            object.__setattr__(self, name, _ro(getattr(self, name), dtype))
        if self.edge_speed is not None:
            object.__setattr__(self, "edge_speed", _ro(self.edge_speed, float))
        if self.origin == self.destination:
            raise NetworkError("origin and destination must differ")
        if np.any(self.tails == self.heads):
            raise NetworkError("self-loops are not allowed")

    @classmethod
    def from_edges(cls, positions, edges: Iterable[tuple[int, int]], origin: int, destination: int,
                   edge_speed=None) -> "Network":
        pos = np.asarray(positions, float)
        e = np.asarray(list(edges), np.int64).reshape(-1, 2)
        lengths = np.hypot(*(pos[e[:, 1]] - pos[e[:, 0]]).T) if len(e) else np.zeros(0)
        return cls(pos, e[:, 0], e[:, 1], lengths, int(origin), int(destination), edge_speed)

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    def edge_list(self) -> list[tuple[int, int]]:
        return list(zip(self.tails.tolist(), self.heads.tolist()))

    def out_edges(self) -> list[list[int]]:
        out = [[] for _ in range(self.n_nodes)]
        for k, t in enumerate(self.tails.tolist()):
            out[t].append(k)
        return out


@dataclass(frozen=True)
class FlowSystem:
    A: sparse.csc_matrix
    b: np.ndarray


# -- sampling ----------------------------------------------------------------


def _check_inside(env: Environment, pt, name):
    x, y = pt
    if not env.contains(x, y):
        raise NetworkError(f"{name} ({x}, {y}) lies outside the bounds {env.width} x {env.height}")


def _degenerate(points) -> bool:
    pts = [tuple(p) for p in points]
    if len(set(pts)) != len(pts):
        return True
    return all(orient(pts[0], pts[1], p) == 0 for p in pts[2:])


def sample_nodes_random(env: Environment, n: int, seed: int, origin=None, destination=None) -> np.ndarray:
    """``n`` i.i.d. uniform points over the bounds, then origin and destination.

    Draws come from numpy's PCG64 generator seeded with ``seed``; x and y of
    each point are consecutive doubles from ``rng.random``. A draw that is
    all-collinear or contains duplicates is discarded and redrawn.
    """
    if n < 2:
        raise NetworkError(f"need at least 2 sampled nodes, got {n}")
    origin = (0.0, 0.0) if origin is None else origin
    destination = (env.width, env.height) if destination is None else destination
    rng = np.random.default_rng(seed)
    scale = np.array([env.width, env.height])
    for _ in range(100):
        pts = rng.random((n, 2)) * scale
        pts = np.vstack([pts, [origin], [destination]])
        if not _degenerate(pts):
            return pts
    raise NetworkError("could not draw a non-degenerate point set")


def lattice_shape(n: int) -> int:
    if n < 4:
        raise NetworkError(f"uniform sampling needs n >= 4, got {n}")
    return math.isqrt(n)


def sample_nodes_uniform(env: Environment, n: int) -> np.ndarray:
    """``k x k`` lattice spanning the bounds, ``k = floor(sqrt(n))``.

    Nodes are numbered west to east, then south to north.
    """
    k = lattice_shape(n)
    xs = np.linspace(0.0, env.width, k)
    ys = np.linspace(0.0, env.height, k)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def grid8_edges(k: int, ky: Optional[int] = None) -> list[tuple[int, int]]:
    """Undirected rook + diagonal adjacency of a ``k x ky`` lattice."""
    ky = k if ky is None else ky
    out = []
    for j in range(ky):
        for i in range(k):
            a = j * k + i
            if i + 1 < k:
                out.append((a, a + 1))
            if j + 1 < ky:
                out.append((a, a + k))
                if i + 1 < k:
                    out.append((a, a + k + 1))
                if i > 0:
                    out.append((a, a + k - 1))
    return sorted((min(a, b), max(a, b)) for a, b in out)


def _nearest(points: np.ndarray, pt) -> int:
    d = np.hypot(points[:, 0] - pt[0], points[:, 1] - pt[1])
    return int(np.argmin(d))


# -- composition -------------------------------------------------------------


def directed(adjacency: Iterable[tuple[int, int]]) -> list[tuple[int, int]]:
    """Two directed edges ``(i, j), (j, i)`` per undirected pair, in order."""
    out = []
    for i, j in adjacency:
        out.append((i, j))
        out.append((j, i))
    return out


def prune(net: Network) -> Network:
    """Drop nodes not on any directed origin-to-destination walk."""
    n = net.n_nodes
    fwd = [[] for _ in range(n)]
    bwd = [[] for _ in range(n)]
    for t, h in zip(net.tails.tolist(), net.heads.tolist()):
        fwd[t].append(h)
        bwd[h].append(t)

    def reach(adj, start):
        seen = np.zeros(n, bool)
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        return seen

    keep = reach(fwd, net.origin) & reach(bwd, net.destination)
    if not keep[net.destination] or not keep[net.origin]:
        raise ConnectivityError("no directed path from origin to destination")
    if keep.all():
        return net
    new_id = np.cumsum(keep) - 1
    ek = keep[net.tails] & keep[net.heads]
    return Network(
        net.positions[keep],
        new_id[net.tails[ek]],
        new_id[net.heads[ek]],
        net.lengths[ek],
        int(new_id[net.origin]),
        int(new_id[net.destination]),
        None if net.edge_speed is None else net.edge_speed[ek],
    )


def build_network(method, env: Environment, n: int, seed: int, origin, destination) -> Network:
    """Sample nodes, connect them, orient every adjacency both ways and prune."""
    method = Method(method)
    _check_inside(env, origin, "origin")
    _check_inside(env, destination, "destination")
    if method is Method.RDM:
        pts = sample_nodes_random(env, n, seed, origin, destination)
        o, d = len(pts) - 2, len(pts) - 1
        adjacency = delaunay_edges(pts)
    else:
        pts = sample_nodes_uniform(env, n)
        o, d = _nearest(pts, origin), _nearest(pts, destination)
        if o == d:
            raise NetworkError("origin and destination snap to the same lattice node")
        k = lattice_shape(n)
        adjacency = grid8_edges(k) if method is Method.UNI8 else delaunay_edges(pts)
    net = Network.from_edges(pts, directed(adjacency), o, d)
    return prune(net)


# -- matrices ----------------------------------------------------------------


def assemble_flow(network: Network) -> FlowSystem:
    """Node-arc incidence matrix (-1 at tail, +1 at head) and unit demand."""
    n, m = network.n_nodes, network.n_edges
    cols = np.repeat(np.arange(m), 2)
    rows = np.column_stack([network.tails, network.heads]).ravel()
    vals = np.tile([-1.0, 1.0], m)
    A = sparse.csc_matrix((vals, (rows, cols)), shape=(n, m))
    b = np.zeros(n)
    b[network.origin] = -1.0
    b[network.destination] = 1.0
    return FlowSystem(A, b)


def assemble_outcome_matrix(network: Network, outcome, areas: Optional[AmbushAreaSet] = None,
                            rule=AmbushRule.NODE) -> sparse.csc_matrix:
    """``D[j, k] = alpha_j`` when edge ``k`` enters node ``j``.

    Under the ``entry`` rule, edges whose tail already lies in the head's
    ambush area are left out, so an area charges once per entry.
    """
    alpha = outcome.alpha if isinstance(outcome, OutcomeMap) else np.asarray(outcome, float)
    rule = AmbushRule(rule)
    heads = network.heads
    vals = alpha[heads].astype(float)
    if rule is AmbushRule.ENTRY:
        if areas is None:
            raise NetworkError("the entry rule needs ambush areas")
        na = areas.node_area
        vals = np.where(na[network.tails] == na[heads], 0.0, vals)
    keep = vals != 0
    D = sparse.csc_matrix(
        (vals[keep], (heads[keep], np.arange(network.n_edges)[keep])),
        shape=(network.n_nodes, network.n_edges),
    )
    return D


def assemble_area_matrix(network: Network, areas: AmbushAreaSet) -> sparse.csr_matrix:
    n = network.n_nodes
    if len(areas.node_area) != n:
        raise NetworkError(f"area map covers {len(areas.node_area)} nodes, network has {n}")
    return sparse.csr_matrix((np.ones(n), (areas.node_area, np.arange(n))), shape=(areas.n_areas, n))


def path_indicator(network: Network, nodes: Sequence[int]) -> np.ndarray:
    """Edge indicator vector of a node sequence."""
    index = {e: k for k, e in enumerate(network.edge_list())}
    p = np.zeros(network.n_edges)
    for a, b in zip(nodes[:-1], nodes[1:]):
        p[index[(a, b)]] += 1.0
    return p
