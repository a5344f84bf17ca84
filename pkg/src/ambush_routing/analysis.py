"""Strategy metrics, path realization and Monte Carlo verification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .environment import AmbushAreaSet
from .network import AmbushRule, Network

#: Default threshold on the entry probability of an area for it to count as covered.
DEFAULT_P_MIN = 1e-3
#: Flows at or below this are treated as zero when following the support.
FLOW_TOL = 1e-12


class AnalysisError(ValueError):
    pass


class UndefinedEntropyError(AnalysisError):
    """No net flow crosses the bisector between origin and destination."""


@dataclass(frozen=True)
class MetricsReport:
    outcome: float
    energy: float
    spreading: float
    entropy: float
    n_nodes: int
    n_edges: int
    lam: float
    method: str = ""
    seed: int = 0
    edge_entropy: float = 0.0
    n: int = 0
    status: str = "ok"

    @classmethod
    def failed(cls, method: str, n: int, seed: int, lam: float, status: str) -> "MetricsReport":
        nan = float("nan")
        return cls(nan, nan, nan, nan, 0, 0, float(lam), method, int(seed), nan, int(n), status)

    @property
    def sqrt_n(self) -> float:
        return float(np.sqrt(self.n))


@dataclass(frozen=True)
class PathEnsemble:
    paths: list = field(default_factory=list)  # (tuple of node ids, weight)
    residual_cycle_flow: float = 0.0

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.paths], float)

    def edge_flow(self, network: Network) -> np.ndarray:
        index = {e: k for k, e in enumerate(network.edge_list())}
        p = np.zeros(network.n_edges)
        for nodes, w in self.paths:
            for a, b in zip(nodes[:-1], nodes[1:]):
                p[index[(a, b)]] += w
        return p


# -- metrics -----------------------------------------------------------------


def metric_energy(p, network: Network) -> float:
    """Expected travelled length ``sum_e p_e |e|`` in meters."""
    return float(np.asarray(p, float) @ network.lengths)


def area_entry(p, network: Network, areas: AmbushAreaSet) -> np.ndarray:
    """Probability of entering each area: flow on edges from outside into it."""
    na = areas.node_area
    t, h = na[network.tails], na[network.heads]
    inward = np.where(t != h, np.asarray(p, float), 0.0)
    return np.bincount(h, weights=inward, minlength=areas.n_areas)


def metric_spreading(p, network: Network, areas: AmbushAreaSet, p_min: float = DEFAULT_P_MIN) -> float:
    """Surface fraction of the areas entered with probability above ``p_min``."""
    if p_min <= 0:
        raise AnalysisError(f"p_min must be positive, got {p_min}")
    entered = area_entry(p, network, areas) > p_min
    surface = np.asarray(areas.surface, float)
    return float(surface[entered].sum() / surface.sum())


def median_crossings(p, network: Network, areas: AmbushAreaSet, origin=None, destination=None) -> np.ndarray:
    """Net flow across the perpendicular bisector of origin and destination, per area cell.

    Each edge crossing from the origin side to the destination side adds its
    flow to the cell holding the crossing point; crossings back subtract.
    Negative totals are clamped to zero.
    """
    if areas.cells is None:
        raise AnalysisError("median sections need a square tiling of the bounds")
    pos = network.positions
    o = np.asarray(pos[network.origin] if origin is None else origin, float)
    d = np.asarray(pos[network.destination] if destination is None else destination, float)
    u = d - o
    if not np.any(u):
        raise AnalysisError("origin and destination coincide")
    mid = 0.5 * (o + d)
    f = (pos - mid) @ u
    ft, fh = f[network.tails], f[network.heads]
    fwd = (ft <= 0) & (fh > 0)
    back = (ft > 0) & (fh <= 0)
    p = np.asarray(p, float)
    mass = np.zeros(areas.n_areas)
    for k in np.flatnonzero((fwd | back) & (np.abs(p) > FLOW_TOL)):
        a, b = pos[network.tails[k]], pos[network.heads[k]]
        s = ft[k] / (ft[k] - fh[k])
        x, y = a + s * (b - a)
        mass[areas.area_of_point(x, y)] += p[k] if fwd[k] else -p[k]
    return np.maximum(mass, 0.0)


def entropy_of(masses) -> float:
    """Shannon entropy in nats of nonnegative masses after normalization."""
    m = np.asarray(masses, float)
    total = m.sum()
    if total <= FLOW_TOL:
        raise UndefinedEntropyError("no net flow crosses the median")
    m = m / total
    m = m[m > 0]
    h = float(-(m * np.log(m)).sum())
    return h if h > 0 else 0.0


def metric_entropy(p, network: Network, areas: AmbushAreaSet, origin=None, destination=None) -> float:
    """Entropy of the net flow distribution across median sections, in nats."""
    return entropy_of(median_crossings(p, network, areas, origin, destination))


def edge_entropy(p) -> float:
    """``-sum_e p_e ln p_e`` over edges carrying flow; a secondary statistic."""
    p = np.asarray(p, float)
    p = p[p > FLOW_TOL]
    return float(-(p * np.log(p)).sum())


# -- realization -------------------------------------------------------------


def _find_cycle(n_nodes, out, heads, support):
    """A directed cycle in the support as a list of edge ids, or None."""
    color = np.zeros(n_nodes, np.int8)  # 0 unseen, 1 on the stack, 2 finished
    for root in range(n_nodes):
        if color[root]:
            continue
        color[root] = 1
        stack = [[root, 0]]
        via = []  # via[i] is the edge from stack[i] to stack[i + 1]
        while stack:
            frame = stack[-1]
            u, i = frame
            edges = out[u]
            while i < len(edges) and not support[edges[i]]:
                i += 1
            if i == len(edges):
                color[u] = 2
                stack.pop()
                if via:
                    via.pop()
                continue
            frame[1] = i + 1
            k = edges[i]
            v = int(heads[k])
            if color[v] == 1:
                j = next(j for j in range(len(stack)) if stack[j][0] == v)
                return via[j:] + [k]
            if color[v] == 0:
                color[v] = 1
                stack.append([v, 0])
                via.append(k)
    return None


def cancel_cycles(p, network: Network, tol: float = FLOW_TOL) -> np.ndarray:
    """Remove circulations from ``p`` until its support is acyclic.

    Each directed cycle found in the support loses its bottleneck flow, so
    no edge flow increases and ``A p`` is unchanged.
    """
    p = np.array(p, dtype=float)
    p[p <= tol] = 0.0
    out = network.out_edges()
    while True:
        cycle = _find_cycle(network.n_nodes, out, network.heads, p > tol)
        if cycle is None:
            return p
        p[cycle] -= p[cycle].min()
        p[p <= tol] = 0.0


def topological_order(network: Network, support) -> Optional[list[int]]:
    """Kahn's order of the support subgraph, or None if it has a cycle."""
    n = network.n_nodes
    indeg = np.zeros(n, np.int64)
    out = [[] for _ in range(n)]
    for k in np.flatnonzero(support):
        out[network.tails[k]].append(k)
        indeg[network.heads[k]] += 1
    queue = [v for v in range(n) if indeg[v] == 0]
    order = []
    while queue:
        u = queue.pop()
        order.append(u)
        for k in out[u]:
            v = network.heads[k]
            indeg[v] -= 1
            if indeg[v] == 0:
                queue.append(int(v))
    return order if len(order) == n else None


def decompose_paths(p, network: Network, tol: float = 1e-12, residual_cycle_flow: float = 0.0) -> PathEnsemble:
    """Split an acyclic unit flow into weighted origin-destination paths.

    Repeatedly extracts the path with the largest bottleneck flow (widest
    path in the support DAG) and subtracts it.
    """
    r = np.array(p, dtype=float)
    r[r <= tol] = 0.0
    order = topological_order(network, r > 0)
    if order is None:
        raise AnalysisError("flow support has a cycle; cancel cycles first")
    rank = np.empty(network.n_nodes, np.int64)
    rank[order] = np.arange(network.n_nodes)
    edges = np.flatnonzero(r > 0)
    edges = edges[np.argsort(rank[network.tails[edges]], kind="stable")]
    o, d = network.origin, network.destination
    paths = []
    while True:
        width = np.zeros(network.n_nodes)
        width[o] = np.inf
        pred = np.full(network.n_nodes, -1, np.int64)
        for k in edges:
            if r[k] <= 0:
                continue
            t, h = network.tails[k], network.heads[k]
            w = min(width[t], r[k])
            if w > width[h]:
                width[h] = w
                pred[h] = k
        if width[d] <= tol:
            break
        w = float(width[d])
        nodes = [d]
        v = d
        while v != o:
            k = pred[v]
            r[k] -= w
            if r[k] <= tol:
                r[k] = 0.0
            v = int(network.tails[k])
            nodes.append(v)
        paths.append((tuple(int(x) for x in reversed(nodes)), w))
        if len(paths) > network.n_edges:
            raise AnalysisError("path extraction did not terminate")
    return PathEnsemble(paths, float(residual_cycle_flow))


def realize(p, network: Network) -> tuple[np.ndarray, PathEnsemble]:
    """Cancel cycles and decompose; returns the acyclic flow and its paths."""
    p = np.asarray(p, float)
    pt = cancel_cycles(p, network)
    removed = float(np.clip(p, 0, None).sum() - pt.sum())
    return pt, decompose_paths(pt, network, residual_cycle_flow=removed)


# -- simulation --------------------------------------------------------------


def path_area_losses(ensemble: PathEnsemble, areas: AmbushAreaSet, alpha, rule=AmbushRule.NODE) -> np.ndarray:
    """``L[i, a]``: loss of path ``i`` when area ``a`` is ambushed.

    Loss accrues on entering a node; under the ``entry`` rule only when the
    step crosses into a new area.
    """
    rule = AmbushRule(rule)
    alpha = np.asarray(alpha, float)
    na = areas.node_area
    L = np.zeros((len(ensemble.paths), areas.n_areas))
    for i, (nodes, _) in enumerate(ensemble.paths):
        for a, b in zip(nodes[:-1], nodes[1:]):
            if rule is AmbushRule.ENTRY and na[a] == na[b]:
                continue
            L[i, na[b]] += alpha[b]
    return L


def simulate(ensemble: PathEnsemble, q, areas: AmbushAreaSet, alpha, trials: int, seed: int = 0,
             rule=AmbushRule.NODE) -> tuple[float, float]:
    """Empirical mean loss and its standard error over ``trials`` convoys.

    Each trial draws a path by weight and an ambushed area from ``q``.
    """
    if trials < 1:
        raise AnalysisError(f"trials must be at least 1, got {trials}")
    if not ensemble.paths:
        raise AnalysisError("empty path ensemble")
    q = np.asarray(q, float)
    if q.shape != (areas.n_areas,) or np.any(q < 0) or abs(q.sum() - 1) > 1e-9:
        raise AnalysisError("q must be a probability vector over the areas")
    w = ensemble.weights
    L = path_area_losses(ensemble, areas, alpha, rule)
    rng = np.random.default_rng(seed)
    pi = rng.choice(len(w), size=trials, p=w / w.sum())
    ai = rng.choice(len(q), size=trials, p=q / q.sum())
    loss = L[pi, ai]
    se = float(loss.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return float(loss.mean()), se


def expected_loss(ensemble: PathEnsemble, q, areas: AmbushAreaSet, alpha, rule=AmbushRule.NODE) -> float:
    """Exact expectation of the simulated loss."""
    w = ensemble.weights
    return float((w / w.sum()) @ path_area_losses(ensemble, areas, alpha, rule) @ np.asarray(q, float))


def compute_metrics(p, q, network: Network, S, D, areas: AmbushAreaSet, lam: float,
                    p_min: float = DEFAULT_P_MIN, method: str = "", seed: int = 0, n: int = 0,
                    metric_areas: Optional[AmbushAreaSet] = None) -> MetricsReport:
    """All four strategy metrics in one report.

    ``metric_areas`` is the tiling used for spreading and median sections
    when the game's areas are not square cells. Entropy is NaN when no net
    flow crosses the median.
    """
    from .game import strategic_outcome

    tiles = areas if metric_areas is None else metric_areas
    try:
        entropy = metric_entropy(p, network, tiles)
    except UndefinedEntropyError:
        entropy = float("nan")
    return MetricsReport(
        outcome=strategic_outcome(p, q, S, D),
        energy=metric_energy(p, network),
        spreading=metric_spreading(p, network, tiles, p_min),
        entropy=entropy,
        n_nodes=network.n_nodes,
        n_edges=network.n_edges,
        lam=float(lam),
        method=method,
        seed=int(seed),
        edge_entropy=edge_entropy(p),
        n=int(n),
    )
