"""Synthetic flood scene for tests, demos and benchmarks.

A 128x128 EPSG:4326 grid with a planted elliptical flood region. Optical NDWI
rises by 0.5 inside the region between the pre and post scenes; SAR backscatter
drops by 8 dB inside it, and both SAR scenes carry 1 dB zero-mean speckle noise.
10% of post-scene optical cells are flagged cloudy. Population sits on a 4x
coarser grid. Everything is generated from one seed.
"""

from __future__ import annotations

import datetime as dt
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .raster import GeoGrid, Raster, write_raster

ORIGIN = (68.0, 25.0)
PIXEL = 0.0001
POP_FACTOR = 4
POST_DATES = {"SENTINEL2": dt.date(2022, 8, 28), "SENTINEL1": dt.date(2022, 8, 30)}
PRE_DATES = {"SENTINEL2": dt.date(2022, 7, 18), "SENTINEL1": dt.date(2022, 7, 20)}


@dataclass
class SyntheticScene:
    grid: GeoGrid
    pop_grid: GeoGrid
    truth: np.ndarray  # bool, planted flood region
    green_pre: np.ndarray
    nir_pre: np.ndarray
    green_post: np.ndarray
    nir_post: np.ndarray
    cloud_post: np.ndarray  # 1 = cloud
    sar_pre: np.ndarray  # linear backscatter
    sar_post: np.ndarray
    population: np.ndarray
    zones: list  # (name, (west, south, east, north))
    roads: list  # (name, [(lon, lat), ...])
    schools: list  # (name, (lon, lat))

    def planted_population(self, zone_bounds=None):
        """Persons inside the planted region, by exact fine-cell area fraction."""
        f = POP_FACTOR
        h, w = self.population.shape
        frac = self.truth.reshape(h, f, w, f).mean(axis=(1, 3))
        weights = self.population * frac
        if zone_bounds is not None:
            xs, ys = self.pop_grid.centers()
            west, south, east, north = zone_bounds
            weights = weights * ((xs >= west) & (xs <= east) & (ys >= south) & (ys <= north))
        return math.fsum(weights.ravel())


def _reflectances(ndwi_values, nir):
    # Solve (g - n) / (g + n) = d for g.
    return nir * (1 + ndwi_values) / (1 - ndwi_values)


def make_scene(seed: int = 0, size: int = 128) -> SyntheticScene:
    rng = np.random.default_rng(seed)
    grid = GeoGrid(size, size, ORIGIN[0], ORIGIN[1], PIXEL, PIXEL, "EPSG:4326")
    pop_grid = GeoGrid(
        size // POP_FACTOR, size // POP_FACTOR, ORIGIN[0], ORIGIN[1],
        PIXEL * POP_FACTOR, PIXEL * POP_FACTOR, "EPSG:4326",
    )
    rows, cols = np.mgrid[0:size, 0:size]
    cy, cx = 0.5 * size, 0.47 * size
    ry, rx = 0.27 * size, 0.20 * size
    truth = ((rows + 0.5 - cy) / ry) ** 2 + ((cols + 0.5 - cx) / rx) ** 2 <= 1.0

    ndwi_pre = rng.uniform(-0.5, -0.2, grid.shape)
    ndwi_post = ndwi_pre + np.where(truth, 0.5, 0.0) + rng.normal(0, 0.02, grid.shape)
    nir_pre = rng.uniform(0.2, 0.3, grid.shape)
    nir_post = rng.uniform(0.2, 0.3, grid.shape)
    cloud = (rng.random(grid.shape) < 0.10).astype(np.float64)

    base_db = -8.0 + rng.uniform(-2.0, 2.0, grid.shape)
    pre_db = base_db + rng.normal(0, 1.0, grid.shape)
    post_db = base_db - np.where(truth, 8.0, 0.0) + rng.normal(0, 1.0, grid.shape)

    population = np.round(rng.uniform(0, 50, pop_grid.shape), 1)

    west, south, east, north = grid.bounds
    split = west + 0.75 * (east - west)
    zones = [("Floodplain", (west, south, split, north)), ("Upland", (split, south, east, north))]
    lat_mid = ORIGIN[1] - 0.5 * size * PIXEL
    roads = [
        ("trunk", [(west + 0.0002, lat_mid), (east - 0.0002, lat_mid + 0.00013)]),
        ("link", [(west + 0.003, north - 0.0005), (west + 0.006, south + 0.0006), (west + 0.009, south + 0.0004)]),
        ("hill", [(split + 0.0005, north - 0.001), (east - 0.0003, south + 0.002)]),
    ]
    schools = []
    for k in range(12):
        lon = west + (0.05 + 0.9 * rng.random()) * (east - west)
        lat = south + (0.05 + 0.9 * rng.random()) * (north - south)
        schools.append((f"school-{k:02d}", (round(lon, 7), round(lat, 7))))

    return SyntheticScene(
        grid=grid,
        pop_grid=pop_grid,
        truth=truth,
        green_pre=_reflectances(ndwi_pre, nir_pre),
        nir_pre=nir_pre,
        green_post=_reflectances(ndwi_post, nir_post),
        nir_post=nir_post,
        cloud_post=cloud,
        sar_pre=10.0 ** (pre_db / 10.0),
        sar_post=10.0 ** (post_db / 10.0),
        population=population,
        zones=zones,
        roads=roads,
        schools=schools,
    )


def _feature_collection(features):
    return {
        "type": "FeatureCollection",
        "crs": {"type": "name", "properties": {"name": "EPSG:4326"}},
        "features": features,
    }


def _box(b):
    w, s, e, n = b
    return [[[w, s], [e, s], [e, n], [w, n], [w, s]]]


CONFIG_TEMPLATE = """\
# Synthetic end-to-end fixture written by floodfuse.synthetic.
[output]
dir = "out"

[fusion]
rule = "intersect"
period = [2022-07-15, 2022-08-31]

[optical]
threshold = 0.2

[sar]
threshold_db = 1.25
window = 5
kind = "median"
min_cluster_px = 8

[[scenes]]
sensor = "SENTINEL2"
epoch = "pre"
date = {s2_pre}
green = {{path = "s2_pre.tif", band = 1}}
nir = {{path = "s2_pre.tif", band = 2}}

[[scenes]]
sensor = "SENTINEL2"
epoch = "post"
date = {s2_post}
green = {{path = "s2_post.tif", band = 1}}
nir = {{path = "s2_post.tif", band = 2}}
cloud_mask = "s2_post_cloud.tif"

[[scenes]]
sensor = "SENTINEL1"
epoch = "pre"
date = {s1_pre}
vh = "s1_pre_vh.tif"

[[scenes]]
sensor = "SENTINEL1"
epoch = "post"
date = {s1_post}
vh = "s1_post_vh.tif"

[impact]
zones = "zones.geojson"
population = "population.tif"
roads = "roads.geojson"
schools = "schools.geojson"
zone_field = "name"
"""


def _write_bands(grid, bands, path):
    import rasterio
    from rasterio.crs import CRS

    with rasterio.open(
        path, "w", driver="GTiff", width=grid.width, height=grid.height, count=len(bands),
        dtype="float64", crs=CRS.from_user_input(grid.crs), transform=grid.transform,
    ) as dst:
        for i, b in enumerate(bands, start=1):
            dst.write(b, i)


def write_fixture(directory, seed: int = 0) -> Path:
    """Write the synthetic scene's rasters, vectors and ``config.toml``; returns the config path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    sc = make_scene(seed)
    _write_bands(sc.grid, [sc.green_pre, sc.nir_pre], d / "s2_pre.tif")
    _write_bands(sc.grid, [sc.green_post, sc.nir_post], d / "s2_post.tif")
    write_raster(Raster(sc.grid, sc.cloud_post), d / "s2_post_cloud.tif")
    write_raster(Raster(sc.grid, sc.sar_pre), d / "s1_pre_vh.tif")
    write_raster(Raster(sc.grid, sc.sar_post), d / "s1_post_vh.tif")
    write_raster(Raster(sc.pop_grid, sc.population, -1.0), d / "population.tif")

    zones = [
        {"type": "Feature", "properties": {"name": n}, "geometry": {"type": "Polygon", "coordinates": _box(b)}}
        for n, b in sc.zones
    ]
    roads = [
        {"type": "Feature", "properties": {"name": n}, "geometry": {"type": "LineString", "coordinates": c}}
        for n, c in sc.roads
    ]
    schools = [
        {"type": "Feature", "properties": {"name": n}, "geometry": {"type": "Point", "coordinates": list(c)}}
        for n, c in sc.schools
    ]
    for name, feats in (("zones", zones), ("roads", roads), ("schools", schools)):
        (d / f"{name}.geojson").write_text(json.dumps(_feature_collection(feats), indent=1) + "\n")

    cfg = d / "config.toml"
    cfg.write_text(CONFIG_TEMPLATE.format(
        s2_pre=PRE_DATES["SENTINEL2"], s2_post=POST_DATES["SENTINEL2"],
        s1_pre=PRE_DATES["SENTINEL1"], s1_post=POST_DATES["SENTINEL1"],
    ))
    return cfg
