"""SAR change detection: dB conversion, focal speckle filter, pre-minus-post
differencing and cluster/mask refinement.

Open water is a specular reflector, so new flooding shows up as a drop in
backscatter; the difference is taken as ``pre_db - post_db`` so that the
threshold is positive.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels
from .errors import GridMismatchError, ParameterError, SceneError
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
)


class SpeckleKind(str, enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"


@dataclass(frozen=True)
class SarParams:
    speckle_window: int = 5
    speckle_kind: SpeckleKind = SpeckleKind.MEDIAN
    diff_db_threshold: float = 1.25
    min_cluster_px: int = 8
    permanent_water: Optional[Raster] = None
    slope_mask: Optional[Raster] = None

    def __post_init__(self):
        if self.speckle_window < 3 or self.speckle_window % 2 == 0:
            raise ParameterError(f"speckle_window must be odd and >= 3, got {self.speckle_window}")
        if not self.diff_db_threshold > 0:
            raise ParameterError(f"diff_db_threshold must be > 0, got {self.diff_db_threshold}")
        if self.min_cluster_px < 1:
            raise ParameterError(f"min_cluster_px must be >= 1, got {self.min_cluster_px}")
        object.__setattr__(self, "speckle_kind", SpeckleKind(self.speckle_kind))


def to_db(linear: Raster) -> Raster:
    x = linear.samples
    ok = linear.valid & (x > 0)
    with np.errstate(all="ignore"):
        out = 10.0 * np.log10(np.where(ok, x, 1.0))
    return linear.with_samples(out, ok)


def speckle_filter(raster: Raster, params: SarParams = SarParams()) -> Raster:
    """Focal mean/median over ``params.speckle_window``, skipping nodata neighbours."""
    w = params.speckle_window
    if w < 3 or w % 2 == 0:
        raise ParameterError(f"speckle window must be odd and >= 3, got {w}")
    out, ok = kernels.focal_stat(
        raster.samples, raster.valid, w, params.speckle_kind is SpeckleKind.MEDIAN
    )
    return raster.with_samples(out, ok)


def _polarization(scene: Scene):
    pol = scene.meta.polarization
    if pol is None:
        raise SceneError(f"SAR scene {scene.date} has no VH/VV band")
    return pol


def _db_filtered(scene: Scene, grid, params) -> Raster:
    band = scene.band(_polarization(scene))
    if band.grid != grid:
        band = align(band, grid, Resample.BILINEAR)
    return speckle_filter(to_db(band), params)


def sar_flood_mask(
    pre_scenes: Sequence[Scene], post_scenes: Sequence[Scene], params: SarParams = SarParams()
) -> FloodMask:
    if not pre_scenes or not post_scenes:
        raise SceneError("SAR mapping needs at least one pre and one post scene")
    scenes = (*pre_scenes, *post_scenes)
    for s in scenes:
        if s.sensor is not Sensor.SENTINEL1:
            raise SceneError(f"expected SENTINEL1 scenes, got {s.sensor.value}")
    pols = {_polarization(s) for s in scenes}
    if len(pols) != 1:
        raise SceneError(f"mixed polarizations: {sorted(pols)}")
    pol = pols.pop()
    grid = post_scenes[0].band(pol).grid

    pre = mosaic([_db_filtered(s, grid, params) for s in pre_scenes], Reducer.MEDIAN)
    post = mosaic([_db_filtered(s, grid, params) for s in post_scenes], Reducer.MEDIAN)
    drop = map_binary(pre, post, "sub")

    ok = drop.valid
    states = np.full(grid.shape, NO_OBS, dtype=np.uint8)
    states[ok] = np.where(drop.samples[ok] >= params.diff_db_threshold, FLOODED, DRY)
    dates = [s.date for s in post_scenes if s.date is not None]
    date_range = (min(dates), max(dates)) if dates else None
    mask = FloodMask(grid, states, frozenset({Sensor.SENTINEL1.value}), date_range)
    return refine_mask(mask, params)


def _flag(raster: Optional[Raster], grid, name) -> Optional[np.ndarray]:
    if raster is None:
        return None
    if raster.grid != grid:
        if not raster.grid.same_crs(grid):
            raise GridMismatchError(f"{name} CRS {raster.grid.crs} != mask CRS {grid.crs}")
        raster = align(raster, grid, Resample.NEAREST)
    return raster.valid & (raster.samples == 1)


def refine_mask(mask: FloodMask, params: SarParams = SarParams()) -> FloodMask:
    """Drop FLOODED clusters below ``min_cluster_px`` (8-connected), then clear
    permanent water and steep-slope cells. Never touches NO_OBS or DRY cells."""
    states = np.array(mask.states)
    flooded = states == FLOODED
    if params.min_cluster_px > 1 and flooded.any():
        labels, _ = kernels.label8(flooded)
        sizes = np.bincount(labels.ravel())
        small = sizes < params.min_cluster_px
        small[0] = False
        states[small[labels]] = DRY
    for name, raster in (("permanent_water", params.permanent_water), ("slope_mask", params.slope_mask)):
        hit = _flag(raster, mask.grid, name)
        if hit is not None:
            states[hit & (states == FLOODED)] = DRY
    return mask.replace(states)
