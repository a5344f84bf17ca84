import json
import math
import re

import numpy as np
import pytest

from ambush_routing.analysis import MetricsReport
from ambush_routing.environment import Environment, tile_ambush_areas
from ambush_routing.export import (
    SWEEP_HEADER,
    ExportError,
    area_alpha,
    export_geojson,
    export_strategy,
    export_svg,
    read_geojson_flows,
    read_sweep_csv,
    to_geojson,
    write_sweep_csv,
)
from ambush_routing.game import solve_simplex
from ambush_routing.network import build_network

from fixtures import diamond, random_instance


def red_circles(svg):
    group = svg.split('<g id="ambush">')[1].split("</g>")[0]
    return re.findall(r"<circle [^>]*fill=\"red\"", group)


class TestGeoJson:
    def test_diamond_lines(self):
        inst = diamond()
        doc = to_geojson(inst.network, np.full(4, 0.5), np.zeros(4), inst.areas, inst.alpha)
        edges = [f for f in doc["features"] if f["properties"]["kind"] == "edge"]
        assert len(edges) == 4
        assert all(f["geometry"]["type"] == "LineString" and f["properties"]["flow"] == 0.5 for f in edges)

    def test_diamond_single_route(self):
        inst = diamond()
        doc = to_geojson(inst.network, np.array([1.0, 0, 1.0, 0]), np.zeros(4), inst.areas, inst.alpha)
        edges = [f for f in doc["features"] if f["properties"]["kind"] == "edge"]
        assert [f["properties"]["edge"] for f in edges] == [0, 2]

    def test_areas_and_terminals(self):
        env = Environment.flat(100, 100, 10)
        net = build_network("uni8", env, 25, 0, (10, 10), (90, 90))
        areas = tile_ambush_areas(env, 50, net.positions)
        q = np.array([0.25, 0.25, 0.5, 0.0])
        doc = to_geojson(net, np.zeros(net.n_edges), q, areas, np.ones(net.n_nodes))
        polys = [f for f in doc["features"] if f["geometry"]["type"] == "Polygon"]
        assert len(polys) == 4
        ring = polys[0]["geometry"]["coordinates"][0]
        assert ring[0] == ring[-1] and len(ring) == 5
        assert sorted(f["properties"]["q"] for f in polys) == [0.0, 0.25, 0.25, 0.5]
        kinds = [f["properties"]["kind"] for f in doc["features"]]
        assert kinds.count("origin") == 1 and kinds.count("destination") == 1

    @pytest.mark.parametrize("seed", range(5))
    def test_round_trip(self, seed):
        inst = random_instance(seed)
        ms, rep = solve_simplex(inst.lp(1e-3))
        q = rep.area_duals
        text = export_geojson(inst.network, ms.p, q, inst.areas, inst.alpha)
        back = read_geojson_flows(text, inst.network.n_edges)
        assert np.abs(back - ms.p).max() <= 1e-9
        assert text == export_geojson(inst.network, ms.p, q, inst.areas, inst.alpha)

    def test_bad_document(self):
        with pytest.raises(ExportError):
            read_geojson_flows('{"type": "Feature"}', 3)
        doc = {"type": "FeatureCollection", "features": [{"properties": {"kind": "edge", "edge": 9, "flow": 1}}]}
        with pytest.raises(ExportError):
            read_geojson_flows(json.dumps(doc), 3)

    def test_area_alpha_is_max(self):
        inst = random_instance(0)
        a = area_alpha(inst.areas, inst.alpha)
        for k in range(inst.areas.n_areas):
            assert a[k] == inst.alpha[inst.areas.node_area == k].max()


class TestSvg:
    def test_one_red_circle(self):
        inst = diamond()
        svg = export_svg(inst.network, np.full(4, 0.5), [0, 1, 0, 0], inst.areas, inst.alpha)
        assert len(red_circles(svg)) == 1
        assert svg.startswith("<?xml") and svg.rstrip().endswith("</svg>")

    def test_circles_follow_support(self):
        inst = diamond()
        svg = export_svg(inst.network, np.full(4, 0.5), [0, 0.5, 0.5, 0], inst.areas, inst.alpha)
        assert len(red_circles(svg)) == 2

    def test_grey_edges(self):
        inst = diamond()
        svg = export_svg(inst.network, [1.0, 0, 1.0, 0], np.zeros(4), inst.areas, inst.alpha)
        assert svg.count('stroke="#c8c8c8"') == 2
        assert svg.count('stroke-width="6"') == 2
        assert not red_circles(svg)

    def test_tile_tint(self):
        env = Environment.flat(100, 100, 10)
        net = build_network("uni8", env, 25, 0, (10, 10), (90, 90))
        areas = tile_ambush_areas(env, 50, net.positions)
        svg = export_svg(net, np.zeros(net.n_edges), np.zeros(4), areas, np.ones(net.n_nodes),
                         bounds=(0, 0, 100, 100))
        assert svg.count('fill-opacity="0.35"') == 4

    def test_dispatch(self):
        inst = diamond()
        args = (inst.network, np.full(4, 0.5), np.zeros(4), inst.areas, inst.alpha)
        assert export_strategy(*args, format="svg") == export_svg(*args)
        assert export_strategy(*args) == export_geojson(*args)
        with pytest.raises(ExportError):
            export_strategy(*args, format="kml")


def row(method="uniD", n=100, seed=0, outcome=0.25):
    return MetricsReport(outcome, 700.0, 0.1, math.log(7), n, 4 * n, 1e-4, method=method, seed=seed, n=n)


class TestSweepCsv:
    def test_single_row(self):
        text = write_sweep_csv([row()])
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(SWEEP_HEADER)
        rec = read_sweep_csv(text)[0]
        assert float(rec["sqrt_n"]) == 10.0
        assert float(rec["entropy"]) == math.log(7)
        assert float(rec["outcome"]) == 0.25

    def test_sorted(self):
        rng = np.random.default_rng(0)
        rows = [row(m, n, s) for m in ("rdm", "uniD", "uni8") for n in (100, 400, 900) for s in range(10)]
        rows = [rows[i] for i in rng.permutation(len(rows))]
        recs = read_sweep_csv(write_sweep_csv(rows))
        assert len(recs) == 90
        keys = [(r["method"], int(r["n"]), int(r["seed"])) for r in recs]
        assert keys == sorted(keys)

    def test_nan_and_status(self):
        bad = MetricsReport.failed("rdm", 400, 3, 1e-4, "ConnectivityError: no path")
        rec = read_sweep_csv(write_sweep_csv([bad]))[0]
        assert rec["outcome"] == "nan" and rec["status"].startswith("ConnectivityError")

    def test_empty(self):
        with pytest.raises(ExportError):
            write_sweep_csv([])
