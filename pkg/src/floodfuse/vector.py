"""Vector layers (points, polylines, polygons) and GeoJSON I/O."""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import shapely
from shapely.geometry import mapping, shape

from .errors import GeometryError

DEFAULT_CRS = "EPSG:4326"


class Kind(str, enum.Enum):
    POINT = "POINT"
    POLYLINE = "POLYLINE"
    POLYGON = "POLYGON"


_KIND_OF = {
    "Point": Kind.POINT,
    "MultiPoint": Kind.POINT,
    "LineString": Kind.POLYLINE,
    "MultiLineString": Kind.POLYLINE,
    "Polygon": Kind.POLYGON,
    "MultiPolygon": Kind.POLYGON,
}


@dataclass(frozen=True)
class Feature:
    geometry: Any  # shapely geometry
    properties: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class VectorLayer:
    kind: Kind
    features: tuple
    crs: str = DEFAULT_CRS

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        object.__setattr__(self, "features", tuple(self.features))
        for i, f in enumerate(self.features):
            k = _KIND_OF.get(f.geometry.geom_type)
            if k is not self.kind:
                raise GeometryError(f"feature {i}: {f.geometry.geom_type} in a {self.kind.value} layer")

    def __len__(self):
        return len(self.features)

    def __iter__(self):
        return iter(self.features)

    @property
    def geometries(self):
        return [f.geometry for f in self.features]

    def names(self, field="name"):
        out = []
        for i, f in enumerate(self.features):
            if field not in f.properties:
                raise GeometryError(f"feature {i} has no {field!r} attribute")
            out.append(str(f.properties[field]))
        return out


def _crs_member(crs):
    return {"type": "name", "properties": {"name": crs}}


def read_geojson(path, kind=None) -> VectorLayer:
    """Read a FeatureCollection. The legacy ``crs`` member is honoured; absent means EPSG:4326."""
    data = json.loads(Path(path).read_text())
    if data.get("type") != "FeatureCollection":
        raise GeometryError(f"{path}: expected a FeatureCollection")
    crs = (data.get("crs") or {}).get("properties", {}).get("name", DEFAULT_CRS)
    feats = []
    for i, f in enumerate(data.get("features", [])):
        try:
            geom = shape(f["geometry"])
        except (KeyError, TypeError, ValueError, shapely.errors.GEOSException) as exc:
            raise GeometryError(f"{path}: feature {i}: invalid geometry ({exc})") from None
        feats.append(Feature(geom, dict(f.get("properties") or {})))
    if kind is None:
        kinds = {_KIND_OF.get(f.geometry.geom_type) for f in feats}
        if len(kinds) > 1:
            raise GeometryError(f"{path}: mixed geometry kinds")
        kind = kinds.pop() if kinds else Kind.POLYGON
    for i, f in enumerate(feats):
        g = f.geometry
        if _KIND_OF.get(g.geom_type) is Kind.POLYLINE:
            parts = getattr(g, "geoms", [g])
            if any(len(p.coords) < 2 for p in parts):
                raise GeometryError(f"{path}: feature {i} polyline has fewer than 2 vertices")
    return VectorLayer(Kind(kind), feats, crs)


def write_geojson(layer: VectorLayer, path) -> None:
    data = {
        "type": "FeatureCollection",
        "crs": _crs_member(layer.crs),
        "features": [
            {"type": "Feature", "properties": dict(f.properties), "geometry": mapping(f.geometry)}
            for f in layer.features
        ],
    }
    Path(path).write_text(json.dumps(data, sort_keys=True, separators=(",", ":")) + "\n")


def union(layer: VectorLayer):
    if not len(layer):
        return shapely.Polygon()
    return shapely.unary_union(layer.geometries)
