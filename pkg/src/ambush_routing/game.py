"""The ambush game as a linear program, RED's best response and certificates."""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import sparse

from .network import Network
from .simplex import PRIMAL_TOL, NumericalError, Status, solve_lp

#: Tolerance used to group areas attaining RED's best payoff.
TIE_TOL = 1e-9
#: Default weight of the travelled-length term in the objective.
DEFAULT_LAMBDA = 1e-4


class GameError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinearProgram:
    """``min (1-lam) z + lam * lengths.p``  s.t.  ``S D p - z <= 0``, ``A p = b``, ``p, z >= 0``.

    Variables are ordered ``p_1 .. p_|E|, z``.
    """

    A: sparse.csc_matrix
    b: np.ndarray
    SD: sparse.csr_matrix
    lengths: np.ndarray
    lam: float
    origin: int
    destination: int
    start_basis: Optional[tuple] = None

    @property
    def n_edges(self) -> int:
        return self.A.shape[1]

    @property
    def n_areas(self) -> int:
        return self.SD.shape[0]

    @property
    def c(self) -> np.ndarray:
        return np.concatenate([self.lam * self.lengths, [1.0 - self.lam]])

    def standard_blocks(self):
        """Equality and inequality blocks over ``[p, z]``.

        One flow-conservation row is redundant; the origin's row is dropped.
        """
        keep = np.ones(self.A.shape[0], bool)
        keep[self.origin] = False
        A_eq = sparse.hstack([self.A[keep], sparse.csc_matrix((int(keep.sum()), 1))], format="csc")
        A_ub = sparse.hstack([self.SD, -np.ones((self.n_areas, 1))], format="csc")
        return A_eq, self.b[keep], A_ub, np.zeros(self.n_areas)


@dataclass(frozen=True)
class MixedStrategy:
    p: np.ndarray
    lam: float
    z_star: float


@dataclass(frozen=True)
class RedStrategy:
    q: np.ndarray
    value: float


@dataclass
class SolveReport:
    status: Status
    iterations: int
    pivots: int
    degenerate_pivots: int
    bland_pivots: int
    z_star: float
    objective: float
    flow_residual: float
    ub_violation: float
    min_reduced_cost: float
    area_duals: np.ndarray = field(repr=False, default=None)
    seconds: float = 0.0


Solver = Callable[[LinearProgram], "tuple[MixedStrategy, SolveReport]"]


def _shortest_tree(n_nodes, tails, heads, weights, source):
    """Dijkstra from ``source``; returns (distance, parent edge) per node."""
    out = [[] for _ in range(n_nodes)]
    for k, (t, h) in enumerate(zip(tails, heads)):
        out[t].append((h, k))
    dist = np.full(n_nodes, np.inf)
    parent = np.full(n_nodes, -1, dtype=np.int64)
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        du, u = heapq.heappop(heap)
        if du > dist[u]:
            continue
        for v, k in out[u]:
            nd = du + weights[k]
            if nd < dist[v] - 1e-15 or (nd <= dist[v] and parent[v] > k):
                dist[v] = nd
                parent[v] = k
                heapq.heappush(heap, (nd, v))
    return dist, parent


def _incidence(A: sparse.csc_matrix):
    A = sparse.csc_matrix(A)
    tails = np.empty(A.shape[1], np.int64)
    heads = np.empty(A.shape[1], np.int64)
    for k in range(A.shape[1]):
        lo, hi = A.indptr[k], A.indptr[k + 1]
        rows, vals = A.indices[lo:hi], A.data[lo:hi]
        if len(rows) != 2 or set(np.sign(vals)) != {-1.0, 1.0}:
            raise GameError(f"column {k} of the flow matrix is not an edge")
        tails[k] = rows[vals < 0][0]
        heads[k] = rows[vals > 0][0]
    return tails, heads


def build_game_lp(network: Network, D, S, A, b, lam: float = DEFAULT_LAMBDA) -> LinearProgram:
    """Assemble the min-max routing LP with length regularization ``lam``.

    A feasible starting basis is attached: the shortest-path tree from the
    origin carries the unit flow along one path, ``z`` takes the largest
    area load and the remaining area rows keep their slacks.
    """
    if not 0.0 <= lam < 1.0:
        raise GameError(f"lambda must lie in [0, 1), got {lam}")
    D = sparse.csr_matrix(D)
    S = sparse.csr_matrix(S)
    A = sparse.csc_matrix(A)
    b = np.asarray(b, float)
    n, m = network.n_nodes, network.n_edges
    if A.shape != (n, m) or D.shape != (n, m) or S.shape[1] != n or b.shape != (n,):
        raise GameError(
            f"dimension mismatch: A{A.shape} D{D.shape} S{S.shape} b{b.shape} for {n} nodes, {m} edges"
        )
    SD = (S @ D).tocsr()

    _, parent = _shortest_tree(n, network.tails, network.heads, network.lengths, network.origin)
    if parent[network.destination] < 0:
        raise GameError("destination unreachable; the LP is infeasible")
    tree = [int(parent[v]) for v in range(n) if v != network.origin]
    basis = None
    if all(k >= 0 for k in tree):
        p = np.zeros(m)
        v = network.destination
        while v != network.origin:
            k = parent[v]
            p[k] = 1.0
            v = network.tails[k]
        load = SD @ p
        r_star = int(np.argmax(load)) if len(load) else 0
        slacks = [m + 1 + r for r in range(SD.shape[0]) if r != r_star]
        basis = tuple(tree + [m] + slacks)
    return LinearProgram(A, b, SD, network.lengths.copy(), float(lam), network.origin, network.destination, basis)


def solve_simplex(lp: LinearProgram, max_iter: int = 200_000) -> tuple[MixedStrategy, SolveReport]:
    A_eq, b_eq, A_ub, b_ub = lp.standard_blocks()
    t0 = time.perf_counter()
    try:
        res = solve_lp(lp.c, A_eq, b_eq, A_ub, b_ub, basis=lp.start_basis, max_iter=max_iter)
    except NumericalError as exc:
        raise SolverError(f"simplex failed: {exc}") from exc
    seconds = time.perf_counter() - t0
    x = res.x
    p = x[: lp.n_edges].copy()
    p[p < 0] = 0.0
    z = float(x[lp.n_edges])
    flow_res = float(np.max(np.abs(lp.A @ p - lp.b), initial=0.0))
    if res.status is Status.OPTIMAL and flow_res > PRIMAL_TOL:
        raise SolverError(f"optimal basis violates flow conservation by {flow_res:.3e}")
    scale = 1.0 - lp.lam
    duals = -res.y_ub / scale if scale > 0 else -res.y_ub
    report = SolveReport(
        status=res.status,
        iterations=res.iterations,
        pivots=res.iterations,
        degenerate_pivots=res.degenerate_pivots,
        bland_pivots=res.bland_pivots,
        z_star=z,
        objective=res.objective,
        flow_residual=flow_res,
        ub_violation=res.ub_violation,
        min_reduced_cost=res.min_reduced_cost,
        area_duals=np.maximum(duals, 0.0),
        seconds=seconds,
    )
    return MixedStrategy(p, lp.lam, z), report


def area_loads(S, D, p) -> np.ndarray:
    return np.asarray(sparse.csr_matrix(S) @ (sparse.csr_matrix(D) @ np.asarray(p, float))).ravel()


def red_best_response(S, D, p, tol: float = TIE_TOL) -> RedStrategy:
    """RED's reply with full knowledge of ``p``: uniform over the maximal areas."""
    v = area_loads(S, D, p)
    top = float(v.max())
    ties = v >= top - tol
    q = ties / ties.sum()
    return RedStrategy(q, top)


def strategic_outcome(p, q, S, D) -> float:
    return float(np.asarray(q, float) @ area_loads(S, D, p))


def duality_gap(p, S, D, A, b, lam: float = 0.0, lengths=None, q=None) -> float:
    """Gap between BLUE's guaranteed objective under ``p`` and a lower bound.

    The bound comes from a RED distribution ``q`` (RED's best response to
    ``p`` if omitted): no flow can do better than the shortest origin to
    destination path under edge costs ``(1-lam) (q S D)_e + lam |e|``.
    """
    p = np.asarray(p, float)
    A = sparse.csc_matrix(A)
    b = np.asarray(b, float)
    res = float(np.max(np.abs(A @ p - b)))
    if res > PRIMAL_TOL or p.min() < -1e-10:
        raise GameError(f"strategy is not a feasible flow (residual {res:.3e}, min {p.min():.3e})")
    lengths = np.zeros(A.shape[1]) if lengths is None else np.asarray(lengths, float)
    if lam > 0 and not np.any(lengths):
        raise GameError("edge lengths are needed when lambda > 0")
    loads = area_loads(S, D, p)
    upper = (1 - lam) * loads.max() + lam * float(lengths @ p)
    if q is None:
        q = red_best_response(S, D, p).q
    q = np.asarray(q, float)
    edge_cost = (1 - lam) * np.asarray(sparse.csr_matrix(S).T @ q) @ sparse.csr_matrix(D)
    edge_cost = np.asarray(edge_cost).ravel() + lam * lengths
    tails, heads = _incidence(A)
    origin = int(np.flatnonzero(b < 0)[0])
    dest = int(np.flatnonzero(b > 0)[0])
    dist, _ = _shortest_tree(A.shape[0], tails, heads, edge_cost, origin)
    return float(upper - dist[dest])
