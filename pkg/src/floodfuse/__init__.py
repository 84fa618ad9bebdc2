"""Flood extent from fused optical and SAR masks, and exposure of population,
roads and schools per district."""

__version__ = "0.1.0"

from .errors import FloodFuseError
from .raster import (
    DRY,
    FLOODED,
    NO_OBS,
    FloodMask,
    GeoGrid,
    Raster,
    SceneMeta,
    Sensor,
    align,
    map_binary,
    mosaic,
    read_mask,
    read_raster,
    write_mask,
    write_raster,
)
from .optical import OpticalParams, ndwi, optical_flood_mask
from .sar import SarParams, refine_mask, sar_flood_mask, speckle_filter, to_db
from .fusion import Rule, availability, fuse
from .impact import (
    affected_points,
    affected_population,
    affected_roads,
    build_report,
    vectorize,
)
from .poi import MatchParams, TileExtent, dedupe_min_distance, extract_pois, match_template, pixels_to_geo

__all__ = [
    "FloodFuseError",
    "DRY", "FLOODED", "NO_OBS", "FloodMask", "GeoGrid", "Raster", "SceneMeta", "Sensor",
    "align", "map_binary", "mosaic", "read_mask", "read_raster", "write_mask", "write_raster",
    "OpticalParams", "ndwi", "optical_flood_mask",
    "SarParams", "refine_mask", "sar_flood_mask", "speckle_filter", "to_db",
    "Rule", "availability", "fuse",
    "affected_points", "affected_population", "affected_roads", "build_report", "vectorize",
    "MatchParams", "TileExtent", "dedupe_min_distance", "extract_pois", "match_template", "pixels_to_geo",
]
