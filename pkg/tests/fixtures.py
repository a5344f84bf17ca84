"""Small hand-made instances shared by the test modules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ambush_routing.environment import custom_areas, node_areas
from ambush_routing.game import build_game_lp
from ambush_routing.network import (
    AmbushRule,
    Network,
    assemble_area_matrix,
    assemble_flow,
    assemble_outcome_matrix,
    delaunay_edges,
    directed,
    prune,
)

# 8-node / 13-edge example, 0-based (tail, head)
SUPP_EDGES = [(0, 1), (0, 3), (0, 5), (1, 2), (1, 4), (2, 7), (3, 2), (3, 4), (3, 6), (4, 7), (5, 4), (5, 6), (6, 7)]
SUPP_POS = [(0, 1), (1, 2), (2, 2), (1, 1), (2, 1), (1, 0), (2, 0), (3, 1)]

SUPP_A = np.array([
    [-1, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, -1, -1, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 1, 0, -1, 1, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, -1, -1, -1, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 1, 0, -1, 1, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 0, 0, 0, -1, -1, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, -1],
    [0, 0, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 1],
], float)
SUPP_B = np.array([-1, 0, 0, 0, 0, 0, 0, 1], float)
SUPP_D = np.array([
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 1, 0, 0],
    [0, 0, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
], float)


@dataclass
class Instance:
    network: Network
    alpha: np.ndarray
    areas: object
    A: object
    b: np.ndarray
    D: object
    S: object

    def lp(self, lam=0.0):
        return build_game_lp(self.network, self.D, self.S, self.A, self.b, lam)


def instance(network, alpha, areas, rule=AmbushRule.NODE) -> Instance:
    fs = assemble_flow(network)
    D = assemble_outcome_matrix(network, alpha, areas, rule)
    S = assemble_area_matrix(network, areas)
    return Instance(network, np.asarray(alpha, float), areas, fs.A, fs.b, D, S)


def supplementary() -> Instance:
    net = Network.from_edges(SUPP_POS, SUPP_EDGES, 0, 7)
    alpha = np.ones(8)
    alpha[[0, 7]] = 0.0
    return instance(net, alpha, node_areas(8))


def diamond(c=0.6) -> Instance:
    """origin -> {n1, n2} -> destination, equal outcome ``c`` on the branches."""
    pos = [(0, 0), (1, 1), (1, -1), (2, 0)]
    net = Network.from_edges(pos, [(0, 1), (0, 2), (1, 3), (2, 3)], 0, 3)
    return instance(net, [0.0, c, c, 0.0], node_areas(4))


def chain() -> Instance:
    """origin -> a -> b -> destination with outcomes 0.3 and 0.8."""
    pos = [(0, 0), (1, 0), (2, 0), (3, 0)]
    net = Network.from_edges(pos, [(0, 1), (1, 2), (2, 3)], 0, 3)
    return instance(net, [0.0, 0.3, 0.8, 0.0], node_areas(4))


def random_instance(seed, n_nodes=9, n_areas=5) -> Instance:
    """Delaunay network on random points, both edge directions, random outcomes and areas."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n_nodes, 2))
    edges = directed(delaunay_edges(pts))
    net = prune(Network.from_edges(pts, edges, 0, n_nodes - 1))
    n = net.n_nodes
    alpha = rng.random(n)
    alpha[[net.origin, net.destination]] = 0.0
    na = rng.integers(0, n_areas, n)
    na[:n_areas] = np.arange(n_areas)  # every area used
    return instance(net, alpha, custom_areas(na, n_areas))


def oracle_instance(seed, n_nodes=9, n_areas=5) -> Instance:
    """Like ``random_instance`` but with the terminals at the two farthest
    points and never adjacent, so the game is not trivially zero."""
    rng = np.random.default_rng(seed)
    while True:
        pts = rng.random((n_nodes, 2))
        d = np.hypot(*(pts[:, None] - pts[None]).transpose(2, 0, 1))
        o, t = np.unravel_index(np.argmax(d), d.shape)
        adj = delaunay_edges(pts)
        if (o, t) not in adj and (t, o) not in adj:
            break
    net = prune(Network.from_edges(pts, directed(adj), int(o), int(t)))
    alpha = rng.random(net.n_nodes)
    alpha[[net.origin, net.destination]] = 0.0
    na = rng.integers(0, n_areas, net.n_nodes)
    na[:n_areas] = np.arange(n_areas)
    return instance(net, alpha, custom_areas(na, n_areas))
