"""Command-line entry point: ``ambush-route {solve,sweep,simulate,validate}``.

Exit codes: 0 success, 1 invalid scenario or arguments, 2 solver failure,
3 unreadable or malformed input/output files.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import analysis, export, game, pipeline
from .environment import EnvKind, TerrainError
from .ingest import FormatError, IngestError, ParseError, Scenario, ValidationError, load_scenario, validate_fields
from .network import NetworkError

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 1, 2, 3
OUT_ENV = "AMBUSH_ROUTE_OUT"

log = logging.getLogger("ambush_routing")


class CliError(Exception):
    def __init__(self, code: int, msg: str):
        super().__init__(msg)
        self.code = code


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", required=True, help="scenario file (JSON)")
    common.add_argument("--out", default=os.environ.get(OUT_ENV, "out"),
                        help=f"output directory (default: ${OUT_ENV} or ./out)")
    common.add_argument("--lambda", dest="lam", type=float, help="energy coefficient in [0, 1)")
    common.add_argument("--method", help="network construction: rdm, uni8 or uniD")
    common.add_argument("--nodes", type=int, help="number of sampled nodes")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--reach", type=float, help="ambush area side in meters")
    common.add_argument("--trials", type=int, help="Monte Carlo trials")
    common.add_argument("--p-min", dest="p_min", type=float, help="entry threshold for spreading")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="ambush-route", description="Optimal stochastic routing against ambushes.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("solve", parents=[common], help="solve one scenario and export the strategy")
    sw = sub.add_parser("sweep", parents=[common], help="metrics over network sizes and methods")
    sw.add_argument("--sizes", default="100,400,900", help="comma-separated node counts")
    sw.add_argument("--methods", default="uniD", help="comma-separated methods")
    sw.add_argument("--seeds", type=int, default=10, help="repetitions for rdm")
    sub.add_parser("simulate", parents=[common], help="solve, realize paths and run convoys")
    sub.add_parser("validate", parents=[common], help="check the scenario and data without solving")
    return p


def _scenario(args) -> Scenario:
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            scn = load_scenario(args.scenario)
        for w in caught:
            print(f"warning: {w.message}", file=sys.stderr)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read scenario: {exc}") from None
    except (ValidationError, ParseError) as exc:
        raise CliError(EXIT_INVALID, f"invalid scenario: {exc}") from None
    over = {"lambda": args.lam, "method": args.method, "nodes": args.nodes, "seed": args.seed,
            "reach": args.reach, "trials": args.trials, "p_min": args.p_min}
    over = {k: v for k, v in over.items() if v is not None}
    problems = validate_fields(over)
    if problems:
        raise CliError(EXIT_INVALID, "invalid override: " + "; ".join(problems))
    if "lambda" in over:
        over["lam"] = over.pop("lambda")
    return replace(scn, **over)


def _terrain(scn: Scenario) -> pipeline.Terrain:
    try:
        return pipeline.load_terrain(scn)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read input data: {exc}") from None
    except (FormatError, ParseError) as exc:
        raise CliError(EXIT_IO, f"malformed input data: {exc}") from None
    except (ValidationError, IngestError, TerrainError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"invalid input data: {exc}") from None


def _run(scn: Scenario, terrain) -> pipeline.RunResult:
    try:
        res = pipeline.run(scn, terrain)
    except (game.SolverError, ArithmeticError) as exc:
        raise CliError(EXIT_SOLVER, f"solver failed: {exc}") from None
    except (NetworkError, TerrainError, game.GameError, IngestError, ValueError) as exc:
        raise CliError(EXIT_INVALID, f"invalid scenario: {exc}") from None
    if res.report.status is not game.Status.OPTIMAL:
        raise CliError(EXIT_SOLVER, f"solver ended with status {res.report.status.value}")
    return res


def _config(scn: Scenario, env) -> dict:
    cfg = scn.config()
    cfg["reach"] = pipeline.effective_reach(scn, env)
    if cfg["safe_radius"] is None:
        cfg["safe_radius"] = cfg["reach"]
    return cfg


def _write(out: Path, name: str, data):
    try:
        out.mkdir(parents=True, exist_ok=True)
        path = out / name
        if isinstance(data, bytes):
            path.write_bytes(data)
        else:
            path.write_text(data, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {name}: {exc}") from None
    return path


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def report_text(res: pipeline.RunResult, cfg: dict) -> str:
    m, r = res.metrics, res.report
    # the area duals are RED's equilibrium strategy and certify the optimum
    gap = game.duality_gap(res.strategy.p, res.S, res.D, res.lp.A, res.lp.b, res.lp.lam, res.lp.lengths,
                           q=r.area_duals)
    lines = [
        ("status", r.status.value),
        ("z_star", res.strategy.z_star),
        ("outcome", m.outcome),
        ("energy", m.energy),
        ("spreading", m.spreading),
        ("entropy", m.entropy),
        ("edge_entropy", m.edge_entropy),
        ("objective", r.objective),
        ("duality_gap", gap),
        ("flow_residual", r.flow_residual),
        ("iterations", r.iterations),
        ("degenerate_pivots", r.degenerate_pivots),
        ("bland_pivots", r.bland_pivots),
        ("nodes", res.network.n_nodes),
        ("edges", res.network.n_edges),
        ("areas", res.areas.n_areas),
        ("ambush_support", int(np.count_nonzero(res.red.q))),
        ("filled_voids", res.filled_voids),
    ]
    body = "\n".join(f"{k}: {_fmt(v)}" for k, v in lines)
    return body + "\nconfig: " + json.dumps(cfg, sort_keys=True) + "\n"


def cmd_solve(args) -> int:
    from .plotting import plot_strategy

    scn = _scenario(args)
    terrain = _terrain(scn)
    res = _run(scn, terrain)
    out = Path(args.out)
    p, q = res.strategy.p, res.red.q
    cfg = _config(scn, res.env)
    _write(out, "strategy.geojson", export.export_geojson(res.network, p, q, res.areas, res.alpha))
    bounds = (0.0, 0.0, res.env.width, res.env.height)
    _write(out, "strategy.svg", export.export_svg(res.network, p, q, res.areas, res.alpha, bounds=bounds))
    _write(out, "metrics.csv", export.write_sweep_csv([res.metrics]))
    text = report_text(res, cfg)
    _write(out, "report.txt", text)
    out.mkdir(parents=True, exist_ok=True)
    try:
        plot_strategy(out / "strategy.png", res.network, p, q, res.areas, res.alpha,
                      title=f"{scn.name}: V = {res.metrics.outcome:.4f}")
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write strategy.png: {exc}") from None
    sys.stdout.write(text)
    return EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise CliError(EXIT_INVALID, f"sizes must be integers, got {text!r}") from None
    return vals


def cmd_sweep(args) -> int:
    from .plotting import plot_sweep

    scn = _scenario(args)
    sizes = _int_list(args.sizes)
    if not sizes:
        raise CliError(EXIT_INVALID, "no network sizes given")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    problems = [p for m in methods for p in validate_fields({"method": m})]
    problems += [p for n in sizes for p in validate_fields({"nodes": n})]
    if not methods:
        problems.append("no methods given")
    if args.seeds < 1:
        problems.append("seeds must be at least 1")
    if problems:
        raise CliError(EXIT_INVALID, "; ".join(problems))
    terrain = _terrain(scn)
    if terrain.env.kind is EnvKind.ROAD:
        raise CliError(EXIT_INVALID, "sweeps need an off-road scenario")
    rows = pipeline.sweep(scn, sizes, methods, args.seeds, terrain)
    out = Path(args.out)
    text = export.write_sweep_csv(rows)
    _write(out, "sweep.csv", text)
    try:
        plot_sweep(out / "sweep.png", rows)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write sweep.png: {exc}") from None
    sys.stdout.write(text)
    return EXIT_OK


def cmd_simulate(args) -> int:
    scn = _scenario(args)
    res = _run(scn, _terrain(scn))
    pt, ens = analysis.realize(res.strategy.p, res.network)
    rule = scn.ambush_rule
    q = res.red.q
    analytic = game.strategic_outcome(pt, q, res.S, res.D)
    mean, se = analysis.simulate(ens, q, res.areas, res.alpha, scn.trials, scn.seed, rule)
    diff = abs(mean - analytic)
    ok = diff <= 3 * se if se > 0 else diff <= 1e-12
    lines = [
        ("analytic", analytic),
        ("empirical_mean", mean),
        ("standard_error", se),
        ("trials", scn.trials),
        ("paths", len(ens.paths)),
        ("cycle_flow_removed", ens.residual_cycle_flow),
        ("within_3_sigma", "yes" if ok else "no"),
    ]
    text = "\n".join(f"{k}: {_fmt(v)}" for k, v in lines) + "\n"
    _write(Path(args.out), "simulate.txt", text)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    scn = _scenario(args)
    terrain = _terrain(scn)
    env = terrain.env
    problems = []
    if env.kind is not EnvKind.ROAD:
        for name, pt in (("origin", scn.origin), ("destination", scn.destination)):
            if isinstance(pt, str):
                problems.append(f"{name} must be [x, y] in meters for off-road scenarios")
            elif not env.contains(*pt):
                problems.append(f"{name} {list(pt)} lies outside the bounds {env.width} x {env.height}")
    if problems:
        raise CliError(EXIT_INVALID, "; ".join(problems))
    sys.stdout.write(json.dumps(_config(scn, env), indent=1, sort_keys=True) + "\n")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "sweep": cmd_sweep, "simulate": cmd_simulate, "validate": cmd_validate}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
