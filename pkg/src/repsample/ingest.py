"""Grid generation, projection, POI/LULC assignment and the CSV file formats.

Units CSV::

    id,x,y,cell_side,builtup[,d0,d1,d2,mul][,stratum]

POI CSV is ``id,lon,lat,category`` (geographic) or ``id,x,y,category``
(planar meters). Labeled LULC points are ``x,y,builtup`` or
``lon,lat,builtup`` with a 0/1 flag.
"""

from __future__ import annotations

import csv
import json
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, TextIO

from .errors import DegenerateBox, FieldOutOfRange, MalformedRow, MissingColumn, PoleLatitude
from .geomodel import DiversityProfile, PlanarPoint, SamplingUnit

EARTH_RADIUS_M = 6_371_008.8
_DEG = math.pi / 180.0

UNIT_COLUMNS = ("id", "x", "y", "cell_side", "builtup")
PROFILE_COLUMNS = ("d0", "d1", "d2", "mul")


@dataclass(frozen=True)
class GeoOrigin:
    lon0: float
    lat0: float

    def __post_init__(self) -> None:
        if not abs(self.lat0) < 90:
            raise PoleLatitude(f"origin latitude {self.lat0} is at or beyond a pole")


@dataclass(frozen=True)
class BoundingBox:
    min_x: float
    min_y: float
    max_x: float
    max_y: float

    def __post_init__(self) -> None:
        if not (self.max_x > self.min_x and self.max_y > self.min_y):
            raise DegenerateBox(f"degenerate bounding box {self}")

    @property
    def width(self) -> float:
        return self.max_x - self.min_x

    @property
    def height(self) -> float:
        return self.max_y - self.min_y


@dataclass(frozen=True)
class Poi:
    id: int
    location: PlanarPoint
    category: str

    def __post_init__(self) -> None:
        if not self.category:
            raise FieldOutOfRange("category", self.category)


@dataclass(frozen=True)
class PoiTable:
    pois: list[Poi]
    origin: GeoOrigin | None = None
    origin_derived: bool = False


@dataclass(frozen=True)
class Assignment:
    units: list[SamplingUnit]
    assigned: int
    out_of_grid_count: int


# -- projection ---------------------------------------------------------------


def project_geographic(lon: float, lat: float, origin: GeoOrigin) -> PlanarPoint:
    """Local equirectangular projection around ``origin``."""
    if not abs(origin.lat0) < 90:
        raise PoleLatitude(f"origin latitude {origin.lat0}")
    if not abs(lat) < 90:
        raise PoleLatitude(f"latitude {lat}")
    x = EARTH_RADIUS_M * (lon - origin.lon0) * _DEG * math.cos(origin.lat0 * _DEG)
    y = EARTH_RADIUS_M * (lat - origin.lat0) * _DEG
    return PlanarPoint(x, y)


def unproject_planar(point: PlanarPoint, origin: GeoOrigin) -> tuple[float, float]:
    lon = origin.lon0 + point.x / (EARTH_RADIUS_M * _DEG * math.cos(origin.lat0 * _DEG))
    lat = origin.lat0 + point.y / (EARTH_RADIUS_M * _DEG)
    return lon, lat


# -- grid ---------------------------------------------------------------------


def _cells_along(length: float, side: float) -> int:
    # tolerate float noise so 2000/1000 does not become 3 cells
    return max(1, math.ceil(length / side - 1e-9))


def generate_grid(bbox: BoundingBox, cell_side: float) -> list[SamplingUnit]:
    """Row-major tiling from the lower-left corner; partial edge cells keep their nominal size."""
    if not (math.isfinite(cell_side) and cell_side > 0):
        raise DegenerateBox(f"cell_side must be positive, got {cell_side}")
    nx = _cells_along(bbox.width, cell_side)
    ny = _cells_along(bbox.height, cell_side)
    units = []
    for row in range(ny):
        for col in range(nx):
            cx = bbox.min_x + (col + 0.5) * cell_side
            cy = bbox.min_y + (row + 0.5) * cell_side
            units.append(SamplingUnit(id=row * nx + col, centroid=PlanarPoint(cx, cy), cell_side=cell_side))
    return units


class GridLookup:
    """Maps planar points to the unit whose half-open cell contains them.

    The lattice origin is recovered from the units themselves, so a grid with
    cells removed (e.g. by a boundary filter) still works.
    """

    def __init__(self, grid: Sequence[SamplingUnit]):
        if not grid:
            raise DegenerateBox("empty grid")
        side = grid[0].cell_side
        if any(u.cell_side != side for u in grid):
            raise FieldOutOfRange("cell_side", "grid cells differ in size")
        self.side = side
        self.x0 = min(u.x for u in grid) - side / 2
        self.y0 = min(u.y for u in grid) - side / 2
        self.cells: dict[tuple[int, int], int] = {}
        for k, u in enumerate(grid):
            key = (round((u.x - self.x0) / side - 0.5), round((u.y - self.y0) / side - 0.5))
            self.cells[key] = k

    def locate(self, p: PlanarPoint) -> int | None:
        col = math.floor((p.x - self.x0) / self.side)
        row = math.floor((p.y - self.y0) / self.side)
        return self.cells.get((col, row))


def assign_pois_to_cells(pois: Iterable[Poi], grid: Sequence[SamplingUnit]) -> Assignment:
    lookup = GridLookup(grid)
    counts: list[Counter] = [Counter(u.poi_counts) for u in grid]
    assigned = outside = 0
    for poi in pois:
        k = lookup.locate(poi.location)
        if k is None:
            outside += 1
        else:
            counts[k][poi.category] += 1
            assigned += 1
    units = [u.with_(poi_counts=dict(sorted(c.items()))) for u, c in zip(grid, counts)]
    return Assignment(units=units, assigned=assigned, out_of_grid_count=outside)


def compute_builtup(cell: SamplingUnit, labeled_points: Sequence[tuple[PlanarPoint, bool]]) -> tuple[float, bool]:
    """Built-up fraction of ``labeled_points`` and whether the cell had none (then 0.0)."""
    total = len(labeled_points)
    if total == 0:
        return 0.0, True
    built = sum(1 for _, flag in labeled_points if flag)
    return built / total, False


def assign_builtup(
    grid: Sequence[SamplingUnit], labeled_points: Iterable[tuple[PlanarPoint, bool]]
) -> tuple[list[SamplingUnit], int]:
    """Set every unit's built-up fraction from labeled points; returns (units, empty cell count)."""
    lookup = GridLookup(grid)
    per_cell: list[list[tuple[PlanarPoint, bool]]] = [[] for _ in grid]
    for p, flag in labeled_points:
        k = lookup.locate(p)
        if k is not None:
            per_cell[k].append((p, flag))
    out, empty = [], 0
    for u, pts in zip(grid, per_cell):
        frac, is_empty = compute_builtup(u, pts)
        empty += is_empty
        out.append(u.with_(builtup=frac))
    return out, empty


# -- boundary -----------------------------------------------------------------


def read_boundary_geojson(stream: TextIO, origin: GeoOrigin | None = None):
    """Read a GeoJSON Polygon/MultiPolygon (bare, Feature or FeatureCollection) as a shapely geometry.

    With ``origin`` the coordinates are taken as lon/lat and projected.
    """
    from shapely.geometry import shape
    from shapely.ops import transform, unary_union

    doc = json.load(stream)
    if doc.get("type") == "FeatureCollection":
        geoms = [shape(f["geometry"]) for f in doc["features"]]
    elif doc.get("type") == "Feature":
        geoms = [shape(doc["geometry"])]
    else:
        geoms = [shape(doc)]
    geom = unary_union(geoms)
    if geom.geom_type not in ("Polygon", "MultiPolygon"):
        raise FieldOutOfRange("boundary", geom.geom_type)
    if origin is not None:

        def proj(lon, lat, z=None):
            x = EARTH_RADIUS_M * (lon - origin.lon0) * _DEG * math.cos(origin.lat0 * _DEG)
            y = EARTH_RADIUS_M * (lat - origin.lat0) * _DEG
            return x, y

        geom = transform(proj, geom)
    return geom


def filter_by_boundary(units: Sequence[SamplingUnit], boundary) -> list[SamplingUnit]:
    """Keep units whose centroid lies inside (or on) ``boundary``."""
    from shapely import prepared
    from shapely.geometry import Point

    prep = prepared.prep(boundary)
    return [u for u in units if prep.covers(Point(u.x, u.y))]


# -- CSV ----------------------------------------------------------------------


def _reader(stream: TextIO, source: str | None, required: Sequence[str]) -> csv.DictReader:
    reader = csv.DictReader(stream)
    header = reader.fieldnames or []
    for name in required:
        if name not in header:
            raise MissingColumn(name, source)
    return reader


def _num(rec: Mapping[str, str], name: str, line: int, source: str | None, cast=float):
    raw = rec.get(name)
    try:
        v = cast(raw)
    except (TypeError, ValueError):
        raise MalformedRow(line, f"cannot parse {name}={raw!r}", source) from None
    if cast is float and not math.isfinite(v):
        raise MalformedRow(line, f"non-finite {name}={raw!r}", source)
    return v


def parse_units_csv(stream: TextIO, source: str | None = None) -> list[SamplingUnit]:
    reader = _reader(stream, source, UNIT_COLUMNS)
    has_profile = all(c in (reader.fieldnames or []) for c in PROFILE_COLUMNS)
    units = []
    for line, rec in enumerate(reader, start=2):
        uid = _num(rec, "id", line, source, int)
        x, y = _num(rec, "x", line, source), _num(rec, "y", line, source)
        side = _num(rec, "cell_side", line, source)
        builtup = _num(rec, "builtup", line, source)
        if not side > 0:
            raise MalformedRow(line, f"cell_side must be positive, got {side}", source)
        if not 0 <= builtup <= 1:
            raise MalformedRow(line, f"builtup out of [0,1]: {builtup}", source)
        profile = mul = None
        if has_profile and rec.get("mul", "") != "":
            try:
                profile = DiversityProfile(*(_num(rec, c, line, source) for c in ("d0", "d1", "d2")))
            except FieldOutOfRange as exc:
                raise MalformedRow(line, str(exc), source) from None
            mul = _num(rec, "mul", line, source)
            if not 0 <= mul <= 1:
                raise MalformedRow(line, f"mul out of [0,1]: {mul}", source)
        units.append(
            SamplingUnit(id=uid, centroid=PlanarPoint(x, y), cell_side=side, builtup=builtup, profile=profile, mul=mul)
        )
    return units


def unit_rows(units: Sequence[SamplingUnit], stratum: Mapping[int, str] | None = None) -> Iterable[list[str]]:
    enriched = bool(units) and all(u.mul is not None and u.profile is not None for u in units)
    header = list(UNIT_COLUMNS) + (list(PROFILE_COLUMNS) if enriched else []) + (["stratum"] if stratum else [])
    yield header
    for u in units:
        row = [str(u.id), repr(float(u.x)), repr(float(u.y)), repr(float(u.cell_side)), repr(float(u.builtup))]
        if enriched:
            row += [repr(float(v)) for v in u.profile.as_tuple()] + [repr(float(u.mul))]
        if stratum:
            row.append(stratum[u.id])
        yield row


def write_units_csv(units: Sequence[SamplingUnit], stream: TextIO, stratum: Mapping[int, str] | None = None) -> None:
    csv.writer(stream, lineterminator="\n").writerows(unit_rows(units, stratum))


def write_pois_csv(pois: Sequence[Poi], stream: TextIO) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(["id", "x", "y", "category"])
    for p in pois:
        w.writerow([p.id, repr(float(p.location.x)), repr(float(p.location.y)), p.category])


def _geo_or_planar(reader: csv.DictReader, source: str | None) -> bool:
    header = reader.fieldnames or []
    if "lon" in header and "lat" in header:
        return True
    for name in ("x", "y"):
        if name not in header:
            raise MissingColumn(name, source)
    return False


def _read_located(
    stream: TextIO, source: str | None, extra: str, origin: GeoOrigin | None
) -> tuple[list[tuple[int, float, float, Mapping[str, str]]], bool, GeoOrigin | None, bool]:
    reader = _reader(stream, source, (extra,))
    geographic = _geo_or_planar(reader, source)
    kx, ky = ("lon", "lat") if geographic else ("x", "y")
    rows = []
    for line, rec in enumerate(reader, start=2):
        a, b = _num(rec, kx, line, source), _num(rec, ky, line, source)
        if geographic and not abs(b) < 90:
            raise MalformedRow(line, f"latitude {b} at or beyond a pole", source)
        rows.append((line, a, b, rec))
    derived = False
    if geographic and origin is None:
        if not rows:
            raise MalformedRow(1, "cannot derive an origin from an empty file", source)
        origin = GeoOrigin(math.fsum(r[1] for r in rows) / len(rows), math.fsum(r[2] for r in rows) / len(rows))
        derived = True
    return rows, geographic, origin, derived


def parse_pois_csv(stream: TextIO, origin: GeoOrigin | None = None, source: str | None = None) -> PoiTable:
    """Read POIs; lon/lat files are projected around ``origin`` (default: the mean position)."""
    rows, geographic, origin, derived = _read_located(stream, source, "category", origin)
    pois = []
    for line, a, b, rec in rows:
        pid = _num(rec, "id", line, source, int) if "id" in rec else line - 1
        cat = (rec.get("category") or "").strip()
        if not cat:
            raise MalformedRow(line, "empty category", source)
        loc = project_geographic(a, b, origin) if geographic else PlanarPoint(a, b)
        pois.append(Poi(id=pid, location=loc, category=cat))
    return PoiTable(pois=pois, origin=origin if geographic else None, origin_derived=derived)


def parse_labeled_points_csv(
    stream: TextIO, origin: GeoOrigin | None = None, source: str | None = None
) -> tuple[list[tuple[PlanarPoint, bool]], GeoOrigin | None]:
    rows, geographic, origin, _ = _read_located(stream, source, "builtup", origin)
    out = []
    for line, a, b, rec in rows:
        flag = (rec.get("builtup") or "").strip()
        if flag not in ("0", "1"):
            raise MalformedRow(line, f"builtup flag must be 0 or 1, got {flag!r}", source)
        loc = project_geographic(a, b, origin) if geographic else PlanarPoint(a, b)
        out.append((loc, flag == "1"))
    return out, origin if geographic else None
