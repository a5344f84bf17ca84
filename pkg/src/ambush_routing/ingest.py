"""Readers for terrain tiles, ASCII grids, road graphs and scenario files."""

from __future__ import annotations

import json
import math
import re
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .environment import DataVoidError, HeightGrid, MissionType, VehicleKind
from .network import AmbushRule, Method, Network

#: Meters per degree of latitude (and of longitude at the equator).
M_PER_DEG = 111320.0
HGT_VOID = -32768
HGT_SIZES = {"srtm3": 1201, "srtm1": 3601}
HGT_ARCSEC = {"srtm3": 3.0, "srtm1": 1.0}


class IngestError(ValueError):
    pass


class FormatError(IngestError):
    pass


class ParseError(IngestError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


class ValidationError(IngestError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class UnknownFieldWarning(UserWarning):
    pass


# -- SRTM tiles --------------------------------------------------------------


def hgt_latitude(name: str) -> Optional[float]:
    """Latitude of the tile centre from a name like ``N43E007.hgt``."""
    m = re.search(r"([NS])(\d{1,2})([EW])(\d{1,3})", Path(name).name.upper())
    if not m:
        return None
    lat = int(m.group(2)) * (1 if m.group(1) == "N" else -1)
    return lat + 0.5


def hgt_spacing(resolution: str, latitude: float) -> float:
    """Mean of the north-south and east-west post spacing, in meters."""
    step = HGT_ARCSEC[resolution] / 3600.0 * M_PER_DEG
    return 0.5 * (step + step * math.cos(math.radians(latitude)))


def read_hgt(data: bytes, resolution: Optional[str] = None, latitude: float = 0.0) -> HeightGrid:
    """Parse a raw SRTM tile: big-endian int16 samples, north-west corner first.

    ``resolution`` is ``"srtm1"`` or ``"srtm3"``; if omitted it is inferred
    from the byte count. Samples equal to -32768 are flagged as voids.
    """
    size = len(data)
    if resolution is None:
        resolution = next((r for r, k in HGT_SIZES.items() if size == 2 * k * k), None)
        if resolution is None:
            raise FormatError(f"tile has {size} bytes; expected {2 * 1201 ** 2} (srtm3) or {2 * 3601 ** 2} (srtm1)")
    if resolution not in HGT_SIZES:
        raise FormatError(f"unknown resolution {resolution!r}")
    k = HGT_SIZES[resolution]
    if size != 2 * k * k:
        raise FormatError(f"{resolution} tile must have {2 * k * k} bytes, got {size} (short by {2 * k * k - size})")
    raw = np.frombuffer(data, dtype=">i2").reshape(k, k)
    void = raw == HGT_VOID
    if void.all():
        raise DataVoidError("every sample of the tile is void")
    elev = raw.astype(float)
    elev[void] = np.nan
    return HeightGrid(elev, hgt_spacing(resolution, latitude), void)


def write_hgt(grid: HeightGrid) -> bytes:
    """Encode a square 1201 or 3601 grid as a raw tile; voids become -32768."""
    if grid.rows != grid.cols or grid.rows not in HGT_SIZES.values():
        raise FormatError(f"tile grids are 1201x1201 or 3601x3601, got {grid.rows}x{grid.cols}")
    out = np.where(grid.void_mask, HGT_VOID, np.nan_to_num(grid.elevations))
    if np.any(out[~grid.void_mask] != np.round(out[~grid.void_mask])):
        raise FormatError("tile elevations must be whole meters")
    if np.any(np.abs(out[~grid.void_mask]) > 32767):
        raise FormatError("elevation outside the int16 range")
    return out.astype(">i2").tobytes()


def load_hgt(path, resolution: Optional[str] = None, latitude: Optional[float] = None) -> HeightGrid:
    path = Path(path)
    if latitude is None:
        latitude = hgt_latitude(path.name)
        if latitude is None:
            raise FormatError(f"cannot infer the latitude of {path.name}; pass it explicitly")
    return read_hgt(path.read_bytes(), resolution, latitude)


# -- ASCII grids -------------------------------------------------------------


_HEADER = ("ncols", "nrows", "cellsize", "nodata_value")
_OPTIONAL = ("xllcorner", "yllcorner", "xllcenter", "yllcenter")


def read_ascii_grid(text: str) -> HeightGrid:
    """Parse an ESRI-style ASCII grid; NODATA samples become voids."""
    lines = text.splitlines()
    header = {}
    i = 0
    while i < len(lines):
        tok = lines[i].split()
        if not tok:
            i += 1
            continue
        key = tok[0].lower()
        if key not in _HEADER + _OPTIONAL:
            break
        if len(tok) != 2:
            raise ParseError(i + 1, f"header line needs a key and one value, got {lines[i]!r}")
        try:
            header[key] = float(tok[1])
        except ValueError:
            raise ParseError(i + 1, f"non-numeric header value {tok[1]!r}") from None
        i += 1
    missing = [k for k in _HEADER if k not in header]
    if missing:
        raise ParseError(i + 1, f"missing header fields: {', '.join(missing)}")
    ncols, nrows = int(header["ncols"]), int(header["nrows"])
    if ncols != header["ncols"] or nrows != header["nrows"] or ncols < 2 or nrows < 2:
        raise ParseError(1, "ncols and nrows must be integers >= 2")
    nodata = header["nodata_value"]
    rows = []
    for ln in range(i, len(lines)):
        tok = lines[ln].split()
        if not tok:
            continue
        if len(tok) != ncols:
            raise ParseError(ln + 1, f"expected {ncols} values, got {len(tok)}")
        try:
            rows.append([float(t) for t in tok])
        except ValueError:
            bad = next(t for t in tok if not _is_number(t))
            raise ParseError(ln + 1, f"non-numeric token {bad!r}") from None
        if len(rows) > nrows:
            raise ParseError(ln + 1, f"more than {nrows} data rows")
    if len(rows) != nrows:
        raise ParseError(len(lines), f"expected {nrows} data rows, got {len(rows)}")
    elev = np.array(rows)
    void = elev == nodata
    elev[void] = np.nan
    return HeightGrid(elev, header["cellsize"], void)


def _is_number(t: str) -> bool:
    try:
        float(t)
        return True
    except ValueError:
        return False


def write_ascii_grid(grid: HeightGrid, nodata: float = -9999.0) -> str:
    if np.any(grid.elevations[~grid.void_mask] == nodata):
        raise FormatError(f"grid contains the NODATA value {nodata}")
    out = [f"ncols {grid.cols}", f"nrows {grid.rows}", f"cellsize {grid.spacing!r}", f"NODATA_value {nodata!r}"]
    for r in range(grid.rows):
        vals = np.where(grid.void_mask[r], nodata, grid.elevations[r])
        out.append(" ".join(repr(float(v)) for v in vals))
    return "\n".join(out) + "\n"


# -- road graphs -------------------------------------------------------------


@dataclass(frozen=True)
class RoadGraph:
    """Directed road segments projected to local meters.

    ``positions`` are shifted so the south-west corner of the node bounding
    box is the origin; ``lat0`` is the latitude the projection is taken at.
    """

    node_ids: tuple
    lonlat: np.ndarray
    positions: np.ndarray
    tails: np.ndarray
    heads: np.ndarray
    lengths: np.ndarray
    speeds: np.ndarray
    way_ids: tuple
    lat0: float
    lon_min: float
    lat_min: float

    @property
    def n_edges(self) -> int:
        return len(self.tails)

    def index(self, node_id) -> int:
        try:
            return self.node_ids.index(node_id)
        except ValueError:
            raise IngestError(f"unknown road node {node_id!r}") from None

    def to_network(self, origin: int, destination: int) -> Network:
        return Network(self.positions, self.tails, self.heads, self.lengths, origin, destination, self.speeds)


def project(lon, lat, lat0: float):
    """Local equirectangular projection in meters (relative to lon=lat=0)."""
    k = M_PER_DEG
    return np.asarray(lon, float) * k * math.cos(math.radians(lat0)), np.asarray(lat, float) * k


def read_road_graph(text: str) -> RoadGraph:
    """Parse a road document with ``nodes`` (id, lat, lon) and ``ways``.

    Each way lists node ids, a ``maxspeed`` in m/s and an optional
    ``oneway`` flag; consecutive nodes become one directed segment, or two
    for two-way roads.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from None
    if not isinstance(doc, dict) or "nodes" not in doc or "ways" not in doc:
        raise ValidationError(["road graph needs 'nodes' and 'ways' arrays"])
    problems = []
    ids, lat, lon = [], [], []
    for node in doc["nodes"]:
        nid = node.get("id")
        if nid in ids:
            problems.append(f"duplicate node id {nid!r}")
            continue
        try:
            la, lo = float(node["lat"]), float(node["lon"])
        except (KeyError, TypeError, ValueError):
            problems.append(f"node {nid!r} lacks numeric lat/lon")
            continue
        if not (-90 <= la <= 90 and -180 <= lo <= 180):
            problems.append(f"node {nid!r} has coordinates out of range")
        ids.append(nid)
        lat.append(la)
        lon.append(lo)
    where = {nid: i for i, nid in enumerate(ids)}
    tails, heads, speeds, ways = [], [], [], []
    for w in doc["ways"]:
        wid = w.get("id")
        seq = w.get("nodes", [])
        speed = w.get("maxspeed")
        if not isinstance(speed, (int, float)) or not speed > 0:
            problems.append(f"way {wid!r} has nonpositive or missing maxspeed {speed!r}")
            continue
        if len(seq) < 2:
            problems.append(f"way {wid!r} needs at least two nodes")
            continue
        dangling = [n for n in seq if n not in where]
        if dangling:
            problems.append(f"way {wid!r} references unknown node {dangling[0]!r}")
            continue
        oneway = bool(w.get("oneway", False))
        for a, b in zip(seq[:-1], seq[1:]):
            if a == b:
                problems.append(f"way {wid!r} repeats node {a!r}")
                continue
            for t, h in ((a, b),) if oneway else ((a, b), (b, a)):
                tails.append(where[t])
                heads.append(where[h])
                speeds.append(float(speed))
                ways.append(wid)
    if problems:
        raise ValidationError(problems)
    if not ids:
        raise ValidationError(["road graph has no nodes"])
    lat_a, lon_a = np.array(lat), np.array(lon)
    lat0 = float(lat_a.mean())
    x, y = project(lon_a, lat_a, lat0)
    pos = np.column_stack([x - x.min(), y - y.min()])
    t, h = np.array(tails, np.int64), np.array(heads, np.int64)
    lengths = np.hypot(*(pos[h] - pos[t]).T) if len(t) else np.zeros(0)
    return RoadGraph(tuple(ids), np.column_stack([lon_a, lat_a]), pos, t, h, lengths, np.array(speeds),
                     tuple(ways), lat0, float(lon_a.min()), float(lat_a.min()))


# -- scenarios ---------------------------------------------------------------


DEFAULTS = {
    "lambda": 1e-4,
    "p_min": 1e-3,
    "method": "uniD",
    "mission": "transport",
    "vehicle": "car",
    "nodes": 900,
    "seed": 0,
    "ambush_rule": "entry",
    "trials": 100_000,
}
KNOWN = set(DEFAULTS) | {"name", "terrain", "roads", "origin", "destination", "reach", "safe_radius", "v_max"}


@dataclass
class Scenario:
    """Validated run configuration.

    ``reach`` of ``None`` means one seventh of the shorter side of the
    bounds; ``safe_radius`` of ``None`` means equal to the reach.
    """

    origin: object
    destination: object
    terrain: Optional[dict] = None
    roads: Optional[str] = None
    name: str = "scenario"
    vehicle: str = "car"
    v_max: Optional[float] = None
    mission: str = "transport"
    reach: Optional[float] = None
    safe_radius: Optional[float] = None
    lam: float = 1e-4
    method: str = "uniD"
    nodes: int = 900
    seed: int = 0
    p_min: float = 1e-3
    ambush_rule: str = "entry"
    trials: int = 100_000
    base_dir: str = field(default=".", repr=False)

    def config(self) -> dict:
        d = asdict(self)
        d.pop("base_dir")
        d["lambda"] = d.pop("lam")
        return d

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def _point_or_id(value, key, problems):
    if isinstance(value, str):
        return value
    if (isinstance(value, (list, tuple)) and len(value) == 2
            and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)):
        return (float(value[0]), float(value[1]))
    problems.append(f"{key} must be [x, y] in meters or a road node id")
    return None


def validate_fields(d: dict) -> list[str]:
    """Check override-able fields; returns a list of problems."""
    problems = []
    if "lambda" in d and not (isinstance(d["lambda"], (int, float)) and 0 <= d["lambda"] < 1):
        problems.append(f"lambda must lie in [0, 1), got {d['lambda']!r}")
    if "p_min" in d and not (isinstance(d["p_min"], (int, float)) and d["p_min"] > 0):
        problems.append(f"p_min must be positive, got {d['p_min']!r}")
    for key in ("reach", "v_max"):
        if d.get(key) is not None and not (isinstance(d[key], (int, float)) and d[key] > 0):
            problems.append(f"{key} must be positive, got {d[key]!r}")
    if d.get("safe_radius") is not None and not (isinstance(d["safe_radius"], (int, float)) and d["safe_radius"] >= 0):
        problems.append(f"safe_radius must be nonnegative, got {d['safe_radius']!r}")
    for key, lo in (("nodes", 2), ("seed", 0), ("trials", 1)):
        if key in d and not (isinstance(d[key], int) and not isinstance(d[key], bool) and d[key] >= lo):
            problems.append(f"{key} must be an integer >= {lo}, got {d[key]!r}")
    for key, enum_ in (("method", Method), ("mission", MissionType), ("vehicle", VehicleKind),
                       ("ambush_rule", AmbushRule)):
        if key in d:
            try:
                enum_(d[key])
            except ValueError:
                allowed = "|".join(e.value for e in enum_)
                problems.append(f"{key} must be one of {allowed}, got {d[key]!r}")
    return problems


def read_scenario(text: str, base_dir=".") -> Scenario:
    """Parse and validate a scenario document, applying defaults.

    Every problem is collected and reported in one ``ValidationError``.
    Unknown keys raise an ``UnknownFieldWarning`` and are ignored.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.lineno, exc.msg) from None
    if not isinstance(doc, dict):
        raise ValidationError(["scenario must be an object"])
    for key in sorted(set(doc) - KNOWN):
        warnings.warn(f"unknown scenario field {key!r} ignored", UnknownFieldWarning, stacklevel=2)
    problems = []
    missing = [k for k in ("origin", "destination") if k not in doc]
    if "terrain" not in doc and "roads" not in doc:
        missing.append("terrain or roads")
    if missing:
        problems.append("missing required fields: " + ", ".join(missing))
    if "terrain" in doc and "roads" in doc:
        problems.append("give either terrain or roads, not both")
    d = {**DEFAULTS, **{k: v for k, v in doc.items() if k in KNOWN}}
    problems += validate_fields(d)
    origin = _point_or_id(doc["origin"], "origin", problems) if "origin" in doc else None
    dest = _point_or_id(doc["destination"], "destination", problems) if "destination" in doc else None
    terrain = doc.get("terrain")
    if terrain is not None:
        kinds = [k for k in ("hgt", "ascii", "flat") if k in terrain] if isinstance(terrain, dict) else []
        if len(kinds) != 1:
            problems.append("terrain must have exactly one of hgt, ascii or flat")
        elif kinds == ["flat"]:
            flat = terrain["flat"]
            if not (isinstance(flat, dict) and all(isinstance(flat.get(k), (int, float)) and flat[k] > 0
                                                   for k in ("width", "height", "spacing"))):
                problems.append("terrain.flat needs positive width, height and spacing")
    roads = doc.get("roads")
    if roads is not None and not isinstance(roads, str):
        problems.append("roads must be a file path")
    if problems:
        raise ValidationError(problems)
    return Scenario(
        origin=origin, destination=dest, terrain=terrain, roads=roads,
        name=str(d.get("name", "scenario")), vehicle=d["vehicle"], v_max=d.get("v_max"),
        mission=d["mission"], reach=d.get("reach"), safe_radius=d.get("safe_radius"),
        lam=float(d["lambda"]), method=d["method"], nodes=d["nodes"], seed=d["seed"],
        p_min=float(d["p_min"]), ambush_rule=d["ambush_rule"], trials=d["trials"], base_dir=str(base_dir),
    )


def load_scenario(path) -> Scenario:
    path = Path(path)
    return read_scenario(path.read_text(encoding="utf-8"), base_dir=path.parent)
