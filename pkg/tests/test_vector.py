import json

import pytest
from shapely.geometry import LineString, Point, box

from floodfuse.errors import GeometryError
from floodfuse.vector import Feature, Kind, VectorLayer, read_geojson, write_geojson


def test_roundtrip(tmp_path):
    layer = VectorLayer(Kind.POLYGON, [Feature(box(0, 0, 1, 1), {"name": "A", "n": 3})], "EPSG:32643")
    write_geojson(layer, tmp_path / "a.geojson")
    back = read_geojson(tmp_path / "a.geojson")
    assert back.kind is Kind.POLYGON and back.crs == "EPSG:32643"
    assert back.features[0].properties == {"name": "A", "n": 3}
    assert back.features[0].geometry.equals(box(0, 0, 1, 1))


def test_default_crs_and_kind_inference(tmp_path):
    fc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {}, "geometry": {"type": "Point", "coordinates": [1, 2]}}]}
    (tmp_path / "p.geojson").write_text(json.dumps(fc))
    layer = read_geojson(tmp_path / "p.geojson")
    assert layer.kind is Kind.POINT and layer.crs == "EPSG:4326"


def test_kind_enforced():
    with pytest.raises(GeometryError):
        VectorLayer(Kind.POINT, [Feature(LineString([(0, 0), (1, 1)]))])


def test_short_polyline_rejected(tmp_path):
    fc = {"type": "FeatureCollection", "features": [
        {"type": "Feature", "properties": {}, "geometry": {"type": "LineString", "coordinates": [[0, 0]]}}]}
    (tmp_path / "l.geojson").write_text(json.dumps(fc))
    with pytest.raises(GeometryError):
        read_geojson(tmp_path / "l.geojson")


def test_missing_name_field():
    layer = VectorLayer(Kind.POINT, [Feature(Point(0, 0), {})])
    with pytest.raises(GeometryError):
        layer.names("name")
