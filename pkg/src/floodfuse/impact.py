"""Exposure of population, roads and schools to a flood mask, and per-zone reports."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np
import shapely
from rasterio import features as rio_features
from shapely.geometry import MultiPolygon, shape

from . import kernels
from .errors import CRSMismatchError, GeometryError, ParameterError, ZoneMismatchError
from .geodesy import distance_m, is_geographic, length_km
from .raster import FloodMask, Raster, crs_equal
from .vector import Feature, Kind, VectorLayer, union


def _check_crs(*pairs):
    first_name, first = pairs[0]
    for name, crs in pairs[1:]:
        if not crs_equal(first, crs):
            raise CRSMismatchError(f"{name} CRS {crs} != {first_name} CRS {first}")


def vectorize(mask: FloodMask) -> VectorLayer:
    """One (multi)polygon feature per 8-connected FLOODED region.

    Regions joined only through a diagonal come out as a MultiPolygon whose
    parts touch at a corner. Features are ordered by the raster position of
    each region's first cell.
    """
    labels, n = kernels.label8(mask.flooded)
    if n == 0:
        return VectorLayer(Kind.POLYGON, (), mask.grid.crs)
    pieces = {}
    for geom, value in rio_features.shapes(
        labels.astype(np.int32), mask=labels > 0, connectivity=4, transform=mask.grid.transform
    ):
        pieces.setdefault(int(value), []).append(shape(geom))
    counts = np.bincount(labels.ravel())
    feats = []
    for lab in range(1, n + 1):
        parts = sorted(pieces[lab], key=lambda p: (-p.bounds[3], p.bounds[0]))
        geom = parts[0] if len(parts) == 1 else MultiPolygon(parts)
        feats.append(Feature(geom, {"region": lab, "cells": int(counts[lab])}))
    return VectorLayer(Kind.POLYGON, feats, mask.grid.crs)


def _zone_items(zones: VectorLayer, zone_field):
    if zones.kind is not Kind.POLYGON:
        raise GeometryError("zones must be a polygon layer")
    names = zones.names(zone_field)
    if len(set(names)) != len(names):
        raise ZoneMismatchError("zone names must be unique")
    return list(zip(names, zones.geometries))


def _cells_in_zone(grid, geom, valid):
    """Row/col indices of valid cells whose centre lies in ``geom`` (boundary included)."""
    west, south, east, north = geom.bounds
    c0 = max(0, int(math.floor((west - grid.origin_x) / grid.pixel_dx)) - 1)
    c1 = min(grid.width, int(math.ceil((east - grid.origin_x) / grid.pixel_dx)) + 1)
    r0 = max(0, int(math.floor((grid.origin_y - north) / grid.pixel_dy)) - 1)
    r1 = min(grid.height, int(math.ceil((grid.origin_y - south) / grid.pixel_dy)) + 1)
    if c0 >= c1 or r0 >= r1:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    cols, rows = np.meshgrid(np.arange(c0, c1), np.arange(r0, r1))
    x, y = grid.center(cols, rows)
    inside = shapely.intersects_xy(geom, x, y) & valid[r0:r1, c0:c1]
    return rows[inside], cols[inside]


def affected_population(
    mask: FloodMask, population: Raster, zones: VectorLayer, zone_field="name"
) -> dict:
    """Per zone ``(total, affected)`` persons.

    A population cell belongs to a zone when its centre does. Its affected
    share is the fraction of its area covered by FLOODED mask cells, so the
    mask may be on a finer (or any) grid in the same CRS.
    """
    _check_crs(("mask", mask.grid.crs), ("population", population.grid.crs), ("zones", zones.crs))
    valid = population.valid
    pop = population.samples
    if np.any(pop[valid] < 0):
        raise ParameterError("population raster has negative values")
    pg = population.grid
    flooded = mask.flooded
    out = {}
    for name, geom in _zone_items(zones, zone_field):
        rows, cols = _cells_in_zone(pg, geom, valid)
        values = pop[rows, cols]
        covered = kernels.covered_area(rows, cols, pg.params(), flooded, mask.grid.params())
        frac = np.minimum(covered / pg.cell_area, 1.0)
        out[name] = (math.fsum(values), math.fsum(values * frac))
    return out


def affected_roads(
    flood_polygons: VectorLayer, roads: VectorLayer, zones: VectorLayer, zone_field="name"
) -> dict:
    """Per zone ``(total_km, affected_km)`` of road clipped to the zone and to
    zone-and-flood. Geodesic on WGS84 for geographic CRSs, planar otherwise."""
    if roads.kind is not Kind.POLYLINE:
        raise GeometryError("roads must be a polyline layer")
    _check_crs(("zones", zones.crs), ("roads", roads.crs), ("flood polygons", flood_polygons.crs))
    crs = zones.crs
    lines = np.array(roads.geometries, dtype=object)
    tree = shapely.STRtree(lines) if len(lines) else None
    flood = union(flood_polygons)
    out = {}
    for name, zone in _zone_items(zones, zone_field):
        if tree is None:
            out[name] = (0.0, 0.0)
            continue
        idx = np.sort(tree.query(zone, predicate="intersects"))
        clipped = shapely.intersection(lines[idx], zone)
        total = math.fsum(length_km(g, crs) for g in clipped)
        if flood.is_empty:
            affected = 0.0
        else:
            wet = shapely.intersection(clipped, flood)
            affected = math.fsum(length_km(g, crs) for g in wet)
        out[name] = (total, min(affected, total))
    return out


def affected_points(flood_polygons: VectorLayer, points: VectorLayer, buffer_m: float = 0.0) -> VectorLayer:
    """Points within ``buffer_m`` metres of a flood polygon (boundary counts as inside)."""
    if buffer_m < 0:
        raise ParameterError("buffer_m must be >= 0")
    _check_crs(("flood polygons", flood_polygons.crs), ("points", points.crs))
    hit = _affected_flags(union(flood_polygons), points, buffer_m)
    return VectorLayer(Kind.POINT, [f for f, h in zip(points.features, hit) if h], points.crs)


def _affected_flags(flood, points: VectorLayer, buffer_m):
    geoms = np.array(points.geometries, dtype=object)
    if flood.is_empty or not len(geoms):
        return np.zeros(len(geoms), dtype=bool)
    inside = shapely.intersects(flood, geoms)
    if buffer_m == 0:
        return inside
    if is_geographic(points.crs):
        links = shapely.shortest_line(geoms, flood)
        a = shapely.get_point(links, 0)
        b = shapely.get_point(links, 1)
        d = distance_m(shapely.get_x(a), shapely.get_y(a), shapely.get_x(b), shapely.get_y(b))
    else:
        d = shapely.distance(geoms, flood)
    return inside | (d <= buffer_m)


def school_counts(
    flood_polygons: VectorLayer, schools: VectorLayer, zones: VectorLayer,
    zone_field="name", buffer_m: float = 0.0,
) -> dict:
    """Per zone ``(total, affected)`` school counts; each school goes to the
    first zone (in layer order) that covers it."""
    if schools.kind is not Kind.POINT:
        raise GeometryError("schools must be a point layer")
    _check_crs(("zones", zones.crs), ("schools", schools.crs), ("flood polygons", flood_polygons.crs))
    items = _zone_items(zones, zone_field)
    geoms = np.array(schools.geometries, dtype=object)
    hit = _affected_flags(union(flood_polygons), schools, buffer_m)
    taken = np.zeros(len(geoms), dtype=bool)
    out = {}
    for name, zone in items:
        inside = shapely.intersects(zone, geoms) & ~taken if len(geoms) else np.zeros(0, bool)
        taken |= inside
        out[name] = (int(inside.sum()), int((inside & hit).sum()))
    return out


# --------------------------------------------------------------------------
# Report
# --------------------------------------------------------------------------

HEADER = (
    "Study area (districts)",
    "Actual population",
    "Affected population",
    "Actual road length (km)",
    "Affected road length (km)",
    "Total schools",
    "Affected schools",
)
SHARE_LABEL = "Affected population share (%)"


@dataclass(frozen=True)
class ZoneRow:
    zone_name: str
    total_population: Optional[float] = None
    affected_population: Optional[float] = None
    total_road_km: Optional[float] = None
    affected_road_km: Optional[float] = None
    total_schools: Optional[int] = None
    affected_schools: Optional[int] = None


def _sum(values):
    vals = [v for v in values if v is not None]
    return math.fsum(vals) if vals else None


@dataclass(frozen=True)
class ImpactReport:
    rows: tuple

    def column_total(self, column):
        return _sum(getattr(r, column) for r in self.rows)

    @property
    def share_pct(self):
        total = self.column_total("total_population") or 0.0
        affected = self.column_total("affected_population") or 0.0
        return 100.0 * affected / total if total > 0 else 0.0

    def to_csv(self) -> str:
        """Locale-independent CSV: fixed header, one row per zone, a Total row and a share row."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(HEADER)
        for r in self.rows:
            w.writerow(_format_row(r))
        totals = ZoneRow(
            "Total",
            *(self.column_total(c) for c in (
                "total_population", "affected_population", "total_road_km", "affected_road_km",
            )),
            *(None if t is None else int(t) for t in (
                self.column_total("total_schools"), self.column_total("affected_schools"),
            )),
        )
        w.writerow(_format_row(totals))
        w.writerow([SHARE_LABEL, f"{self.share_pct:.2f}"])
        return buf.getvalue()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())


def _fmt(value, decimals):
    if value is None:
        return ""
    if decimals == 0:
        return str(int(value))
    return f"{value:.{decimals}f}"


def _format_row(r: ZoneRow):
    return [
        r.zone_name,
        _fmt(r.total_population, 2),
        _fmt(r.affected_population, 2),
        _fmt(r.total_road_km, 2),
        _fmt(r.affected_road_km, 2),
        _fmt(r.total_schools, 0),
        _fmt(r.affected_schools, 0),
    ]


def build_report(
    population: Optional[Mapping] = None,
    roads: Optional[Mapping] = None,
    schools: Optional[Mapping] = None,
) -> ImpactReport:
    """Assemble per-zone ``(total, affected)`` mappings into a report.

    Any of the three inputs may be omitted (its columns stay empty), but those
    given must cover the same zones. Rows are sorted by affected population,
    then affected road length, then affected schools (all descending), then name.
    """
    given = {k: v for k, v in (("population", population), ("roads", roads), ("schools", schools)) if v is not None}
    if not given:
        raise ParameterError("build_report needs at least one input")
    zone_sets = {k: set(v) for k, v in given.items()}
    ref_key, ref = next(iter(zone_sets.items()))
    for k, s in zone_sets.items():
        if s != ref:
            raise ZoneMismatchError(f"zones of {k} {sorted(s ^ ref)} differ from {ref_key}")
    for k, data in given.items():
        for name, (total, affected) in data.items():
            if total < 0 or affected < 0 or affected > total:
                raise ParameterError(f"{k}[{name}]: need 0 <= affected <= total, got {affected} / {total}")

    def pair(data, name):
        return data[name] if data is not None else (None, None)

    rows = []
    for name in ref:
        tp, ap = pair(population, name)
        tr, ar = pair(roads, name)
        ts, as_ = pair(schools, name)
        rows.append(ZoneRow(
            str(name), tp, ap, tr, ar,
            None if ts is None else int(ts), None if as_ is None else int(as_),
        ))
    rows.sort(key=lambda r: (
        -(r.affected_population or 0.0), -(r.affected_road_km or 0.0), -(r.affected_schools or 0), r.zone_name,
    ))
    return ImpactReport(tuple(rows))
