"""End-to-end run: scenario, environment, network, game, solution and metrics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import analysis, game
from .environment import (
    EnvKind,
    Environment,
    VehicleKind,
    VehicleModel,
    compute_outcome_map,
    fill_voids,
    node_areas,
    tile_ambush_areas,
)
from .ingest import Scenario, ValidationError, load_hgt, read_ascii_grid, read_road_graph
from .network import (
    AmbushRule,
    Network,
    assemble_area_matrix,
    assemble_flow,
    assemble_outcome_matrix,
    build_network,
    prune,
)

log = logging.getLogger(__name__)


@dataclass
class Terrain:
    """Loaded environment plus, for road scenarios, the road network."""

    env: Environment
    network: Optional[Network] = None
    filled_voids: int = 0


@dataclass
class RunResult:
    scenario: Scenario
    env: Environment
    network: Network
    areas: object
    tiles: object
    alpha: np.ndarray
    S: object
    D: object
    lp: game.LinearProgram
    strategy: game.MixedStrategy
    report: game.SolveReport
    red: game.RedStrategy
    metrics: analysis.MetricsReport
    filled_voids: int = 0


def load_terrain(scn: Scenario) -> Terrain:
    """Read the scenario's terrain or road data. I/O errors propagate as ``OSError``."""
    if scn.roads is not None:
        graph = read_road_graph(scn.resolve(scn.roads).read_text(encoding="utf-8"))
        o = _road_node(graph, scn.origin)
        d = _road_node(graph, scn.destination)
        if o == d:
            raise ValidationError(["origin and destination are the same road node"])
        net = prune(graph.to_network(o, d))
        w, h = (max(float(v), 1.0) for v in graph.positions.max(axis=0))
        return Terrain(Environment(w, h, EnvKind.ROAD), net)
    t = scn.terrain
    if "flat" in t:
        f = t["flat"]
        return Terrain(Environment.flat(f["width"], f["height"], f["spacing"], f.get("elevation", 100.0)))
    if "hgt" in t:
        grid = load_hgt(scn.resolve(t["hgt"]), t.get("resolution"), t.get("latitude"))
    else:
        grid = read_ascii_grid(scn.resolve(t["ascii"]).read_text(encoding="utf-8"))
    if "crop" in t:
        grid = grid.crop(*t["crop"])
    grid = fill_voids(grid)
    if grid.filled_voids:
        log.warning("filled %d void samples by nearest neighbour", grid.filled_voids)
    return Terrain(Environment.from_grid(grid), None, grid.filled_voids)


def _road_node(graph, ref) -> int:
    if isinstance(ref, str):
        return graph.index(ref)
    d = np.hypot(graph.positions[:, 0] - ref[0], graph.positions[:, 1] - ref[1])
    return int(np.argmin(d))


def effective_reach(scn: Scenario, env: Environment) -> float:
    return float(scn.reach) if scn.reach is not None else min(env.width, env.height) / 7.0


def vehicle_of(scn: Scenario) -> VehicleModel:
    if VehicleKind(scn.vehicle) is VehicleKind.PEDESTRIAN:
        return VehicleModel.pedestrian()
    return VehicleModel.car() if scn.v_max is None else VehicleModel.car(scn.v_max)


def run(scn: Scenario, terrain: Optional[Terrain] = None, solver: game.Solver = game.solve_simplex) -> RunResult:
    """Build and solve the game for a scenario and compute all metrics."""
    terrain = load_terrain(scn) if terrain is None else terrain
    env = terrain.env
    reach = effective_reach(scn, env)
    safe = reach if scn.safe_radius is None else float(scn.safe_radius)
    if terrain.network is not None:
        net = terrain.network
    else:
        if isinstance(scn.origin, str) or isinstance(scn.destination, str):
            raise ValidationError(["off-road scenarios need origin and destination as [x, y]"])
        net = build_network(scn.method, env, scn.nodes, scn.seed, scn.origin, scn.destination)
    tiles = tile_ambush_areas(env, reach, net.positions)
    # on roads RED ambushes at intersections; the square tiles still serve the metrics
    areas = node_areas(net.n_nodes) if env.kind is EnvKind.ROAD else tiles
    alpha = compute_outcome_map(env, vehicle_of(scn), scn.mission, net, safe).alpha
    fs = assemble_flow(net)
    D = assemble_outcome_matrix(net, alpha, areas, AmbushRule(scn.ambush_rule))
    S = assemble_area_matrix(net, areas)
    lp = game.build_game_lp(net, D, S, fs.A, fs.b, scn.lam)
    strategy, report = solver(lp)
    red = game.red_best_response(S, D, strategy.p)
    n = net.n_nodes if env.kind is EnvKind.ROAD else scn.nodes
    metrics = analysis.compute_metrics(strategy.p, red.q, net, S, D, areas, scn.lam, scn.p_min,
                                       method="road" if env.kind is EnvKind.ROAD else scn.method,
                                       seed=scn.seed, n=n, metric_areas=tiles)
    if report.status is not game.Status.OPTIMAL:
        metrics = replace(metrics, status=report.status.value)
    return RunResult(scn, env, net, areas, tiles, alpha, S, D, lp, strategy, report, red, metrics,
                     terrain.filled_voids)


def sweep(scn: Scenario, sizes, methods, seeds: int, terrain: Optional[Terrain] = None) -> list[analysis.MetricsReport]:
    """Metrics over a grid of network sizes and methods.

    Random networks are drawn with seeds ``0 .. seeds-1``; lattice methods
    are deterministic and run once with the scenario seed. A failing run is
    recorded with its error in the status column.
    """
    terrain = load_terrain(scn) if terrain is None else terrain
    rows = []
    for method in methods:
        seed_list = range(seeds) if method == "rdm" else [scn.seed]
        for n in sizes:
            for seed in seed_list:
                s = replace(scn, method=method, nodes=int(n), seed=int(seed))
                try:
                    rows.append(run(s, terrain).metrics)
                except Exception as exc:  # a sweep keeps going
                    log.warning("run %s n=%d seed=%d failed: %s", method, n, seed, exc)
                    rows.append(analysis.MetricsReport.failed(method, n, seed, scn.lam,
                                                              f"{type(exc).__name__}: {exc}"))
    rows.sort(key=lambda r: (r.method, r.n, r.seed))
    return rows
