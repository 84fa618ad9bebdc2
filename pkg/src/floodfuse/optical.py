"""Optical flood mapping: NDWI change between dry (pre) and wet (post) scenes.

Band conventions (not enforced, the scene band map decides):
Sentinel-2 GREEN=B3, NIR=B8; Landsat-9 GREEN=B3, NIR=B5.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CRSMismatchError, GridMismatchError, ParameterError, SceneError
from .raster import (
    DRY,
    FLOODED,
    NO_OBS,
    FloodMask,
    Raster,
    Reducer,
    Resample,
    Scene,
    Sensor,
    align,
    map_binary,
    mosaic,
    require_same_grid,
)


@dataclass(frozen=True)
class OpticalParams:
    ndwi_diff_threshold: float = 0.20
    sensor: Sensor = Sensor.SENTINEL2
    # Threshold post-event NDWI directly instead of the post - pre difference.
    absolute: bool = False

    def __post_init__(self):
        if not (0 < self.ndwi_diff_threshold <= 2):
            raise ParameterError(
                f"ndwi_diff_threshold must be in (0, 2], got {self.ndwi_diff_threshold}"
            )
        if not Sensor(self.sensor).optical:
            raise ParameterError(f"{self.sensor} is not an optical sensor")


def ndwi(green: Raster, nir: Raster) -> Raster:
    """(GREEN - NIR) / (GREEN + NIR); a zero denominator gives nodata."""
    require_same_grid(green.grid, nir.grid)
    g, n = green.samples, nir.samples
    denom = g + n
    ok = green.valid & nir.valid & (denom != 0)
    with np.errstate(all="ignore"):
        out = np.clip((g - n) / np.where(denom != 0, denom, 1.0), -1.0, 1.0)
    fill = green.nodata if green.nodata is not None else (nir.nodata if nir.nodata is not None else np.nan)
    return Raster(green.grid, np.where(ok, out, fill), fill)


def _scene_ndwi(scene: Scene, grid) -> Raster:
    g = scene.band("GREEN")
    n = scene.band("NIR")
    if g.grid != grid:
        g = align(g, grid, Resample.BILINEAR)
    if n.grid != grid:
        n = align(n, grid, Resample.BILINEAR)
    return ndwi(g, n)


def _cloud(scene: Scene, grid) -> Optional[np.ndarray]:
    if scene.cloud is None:
        return None
    c = scene.cloud
    if c.grid != grid:
        c = align(c, grid, Resample.NEAREST)
    return c.valid & (c.samples == 1)


def optical_flood_mask(
    pre_scenes: Sequence[Scene], post_scenes: Sequence[Scene], params: OpticalParams = OpticalParams()
) -> FloodMask:
    """Flood mask from the NDWI rise between pre- and post-event median mosaics.

    All bands are brought onto the grid of the first post scene's GREEN band.
    A cell is NO_OBS if the difference is undefined there or any scene flags it
    as cloud.
    """
    if not pre_scenes or not post_scenes:
        raise SceneError("optical mapping needs at least one pre and one post scene")
    sensor = Sensor(params.sensor)
    for s in (*pre_scenes, *post_scenes):
        if s.sensor is not sensor:
            raise SceneError(f"expected {sensor.value} scenes, got {s.sensor.value}")
    grid = post_scenes[0].band("GREEN").grid
    for s in (*pre_scenes, *post_scenes):
        for b in s.bands.values():
            if not b.grid.same_crs(grid):
                raise CRSMismatchError(f"scene {s.date}: CRS {b.grid.crs} != {grid.crs}")

    pre = mosaic([_scene_ndwi(s, grid) for s in pre_scenes], Reducer.MEDIAN)
    post = mosaic([_scene_ndwi(s, grid) for s in post_scenes], Reducer.MEDIAN)
    if pre.grid != post.grid:
        raise GridMismatchError("pre and post mosaics are on different grids")
    diff = post if params.absolute else map_binary(post, pre, "sub")

    ok = diff.valid
    for s in (*pre_scenes, *post_scenes):
        cloudy = _cloud(s, grid)
        if cloudy is not None:
            ok &= ~cloudy
    states = np.full(grid.shape, NO_OBS, dtype=np.uint8)
    states[ok] = np.where(diff.samples[ok] >= params.ndwi_diff_threshold, FLOODED, DRY)
    dates = [s.date for s in post_scenes if s.date is not None]
    date_range = (min(dates), max(dates)) if dates else None
    return FloodMask(grid, states, frozenset({sensor.value}), date_range)
