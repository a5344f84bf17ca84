"""Stochastic convoy routing against ambushes.

The min-max ambush game on a terrain network is posed as a linear program
and solved with a revised simplex; the resulting edge flow is analysed,
realized as paths and checked by simulation.
"""

from .analysis import (
    MetricsReport,
    PathEnsemble,
    cancel_cycles,
    decompose_paths,
    edge_entropy,
    metric_energy,
    metric_entropy,
    metric_spreading,
    realize,
    simulate,
)
from .environment import (
    AmbushAreaSet,
    Environment,
    HeightGrid,
    MissionType,
    OutcomeMap,
    VehicleModel,
    compute_outcome_map,
    slope_at,
    speed_at,
    tile_ambush_areas,
)
from .game import (
    LinearProgram,
    MixedStrategy,
    RedStrategy,
    SolveReport,
    build_game_lp,
    duality_gap,
    red_best_response,
    solve_simplex,
    strategic_outcome,
)
from .network import (
    AmbushRule,
    Method,
    Network,
    assemble_area_matrix,
    assemble_flow,
    assemble_outcome_matrix,
    build_network,
    delaunay_edges,
    grid8_edges,
    sample_nodes_random,
    sample_nodes_uniform,
)

__all__ = [
    "MetricsReport",
    "PathEnsemble",
    "cancel_cycles",
    "decompose_paths",
    "edge_entropy",
    "metric_energy",
    "metric_entropy",
    "metric_spreading",
    "realize",
    "simulate",
    "AmbushAreaSet",
    "Environment",
    "HeightGrid",
    "MissionType",
    "OutcomeMap",
    "VehicleModel",
    "compute_outcome_map",
    "slope_at",
    "speed_at",
    "tile_ambush_areas",
    "LinearProgram",
    "MixedStrategy",
    "RedStrategy",
    "SolveReport",
    "build_game_lp",
    "duality_gap",
    "red_best_response",
    "solve_simplex",
    "strategic_outcome",
    "AmbushRule",
    "Method",
    "Network",
    "assemble_area_matrix",
    "assemble_flow",
    "assemble_outcome_matrix",
    "build_network",
    "delaunay_edges",
    "grid8_edges",
    "sample_nodes_random",
    "sample_nodes_uniform",
]

__version__ = "0.1.0"
