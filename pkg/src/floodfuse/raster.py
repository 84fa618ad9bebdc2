"""Grid and raster data model, GeoTIFF I/O, alignment and mosaicking.

Samples are stored row-major with the origin at the top-left (north-west)
corner. A sample equal to the raster's ``nodata`` sentinel (or NaN) is
invalid, and invalid inputs make arithmetic outputs invalid.
"""

from __future__ import annotations

import datetime as dt
import enum
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

import numpy as np
import rasterio
from rasterio.crs import CRS
from rasterio.errors import NotGeoreferencedWarning, RasterioIOError
from rasterio.transform import Affine

from .errors import (
    BandIndexError,
    CRSMismatchError,
    GeoreferenceError,
    GridMismatchError,
    ParameterError,
    RasterFileNotFound,
    RasterIOError,
    SceneError,
    UnsupportedFormatError,
)

# Mask state encoding, also the on-disk 8-bit values.
DRY = 0
FLOODED = 1
NO_OBS = 255


@dataclass(frozen=True)
class GeoGrid:
    width: int
    height: int
    origin_x: float
    origin_y: float
    pixel_dx: float
    pixel_dy: float
    crs: str = "EPSG:4326"

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ParameterError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        if not (self.pixel_dx > 0 and self.pixel_dy > 0):
            raise ParameterError("pixel sizes must be positive")

    @property
    def shape(self):
        return (self.height, self.width)

    @property
    def transform(self) -> Affine:
        return Affine(self.pixel_dx, 0.0, self.origin_x, 0.0, -self.pixel_dy, self.origin_y)

    @property
    def bounds(self):
        """(west, south, east, north)."""
        return (
            self.origin_x,
            self.origin_y - self.height * self.pixel_dy,
            self.origin_x + self.width * self.pixel_dx,
            self.origin_y,
        )

    @property
    def cell_area(self):
        return self.pixel_dx * self.pixel_dy

    def params(self):
        return (self.origin_x, self.origin_y, self.pixel_dx, self.pixel_dy)

    def center(self, col, row):
        """CRS coordinates of pixel centres; accepts scalars or arrays."""
        x = self.origin_x + (np.asarray(col) + 0.5) * self.pixel_dx
        y = self.origin_y - (np.asarray(row) + 0.5) * self.pixel_dy
        return x, y

    def index(self, x, y):
        """Fractional (col, row) of CRS coordinates; inverse of :meth:`center` up to the 0.5 shift."""
        col = (np.asarray(x) - self.origin_x) / self.pixel_dx - 0.5
        row = (self.origin_y - np.asarray(y)) / self.pixel_dy - 0.5
        return col, row

    def centers(self):
        cols, rows = np.meshgrid(np.arange(self.width), np.arange(self.height))
        return self.center(cols, rows)

    def same_crs(self, other):
        return crs_equal(self.crs, other.crs)

    @classmethod
    def from_transform(cls, transform, width, height, crs):
        if transform.b != 0 or transform.d != 0:
            raise UnsupportedFormatError("rotated geotransforms are not supported")
        if transform.a <= 0 or transform.e >= 0:
            raise UnsupportedFormatError("geotransform must be north-up with positive pixel size")
        return cls(int(width), int(height), transform.c, transform.f, transform.a, -transform.e, crs)


def crs_equal(a, b):
    if a == b:
        return True
    try:
        return CRS.from_user_input(a) == CRS.from_user_input(b)
    except Exception:
        return False


def require_same_grid(*grids):
    first = grids[0]
    for g in grids[1:]:
        if g != first:
            raise GridMismatchError(f"grid mismatch: {first} vs {g}")


@dataclass(frozen=True, eq=False)
class Raster:
    grid: GeoGrid
    samples: np.ndarray
    nodata: Optional[float] = None

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True)
        if arr.shape != self.grid.shape:
            raise GridMismatchError(f"samples shape {arr.shape} != grid shape {self.grid.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        if self.nodata is not None:
            object.__setattr__(self, "nodata", float(self.nodata))

    @property
    def valid(self) -> np.ndarray:
        ok = ~np.isnan(self.samples)
        if self.nodata is not None and not math.isnan(self.nodata):
            ok &= self.samples != self.nodata
        return ok

    @property
    def fill(self):
        """Sentinel used for invalid cells in derived rasters."""
        return self.nodata if self.nodata is not None else np.nan

    def with_samples(self, samples, valid=None, nodata=None):
        """New raster on the same grid; cells where ``valid`` is False get the sentinel."""
        fill = self.fill if nodata is None else nodata
        out = np.array(samples, dtype=np.float64)
        if valid is not None:
            out[~valid] = fill
        return Raster(self.grid, out, None if (nodata is None and self.nodata is None) else fill)

    def __eq__(self, other):
        if not isinstance(other, Raster):
            return NotImplemented
        same_nodata = (self.nodata is None and other.nodata is None) or (
            self.nodata is not None
            and other.nodata is not None
            and (self.nodata == other.nodata or (math.isnan(self.nodata) and math.isnan(other.nodata)))
        )
        return (
            self.grid == other.grid
            and same_nodata
            and np.array_equal(self.samples, other.samples, equal_nan=True)
        )


class Sensor(str, enum.Enum):
    SENTINEL1 = "SENTINEL1"
    SENTINEL2 = "SENTINEL2"
    LANDSAT9 = "LANDSAT9"

    @property
    def optical(self):
        return self is not Sensor.SENTINEL1

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        key = str(value).strip().upper().replace("-", "").replace("_", "")
        aliases = {"S1": "SENTINEL1", "S2": "SENTINEL2", "L9": "LANDSAT9"}
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            raise ParameterError(f"unknown sensor {value!r}") from None


class Epoch(str, enum.Enum):
    PRE = "PRE"
    POST = "POST"


POLARIZATIONS = ("VH", "VV")


@dataclass(frozen=True)
class BandRef:
    path: str
    band: int = 1


@dataclass(frozen=True)
class SceneMeta:
    sensor: Sensor
    acquisition_date: Optional[dt.date]
    band_map: Mapping[str, BandRef]
    epoch: Epoch
    cloud_mask: Optional[str] = None

    def __post_init__(self):
        keys = {k.upper() for k in self.band_map}
        if self.sensor.optical:
            missing = {"GREEN", "NIR"} - keys
            if missing:
                raise SceneError(f"{self.sensor.value} scene lacks bands {sorted(missing)}")
        else:
            pols = keys & set(POLARIZATIONS)
            if len(pols) != 1:
                raise SceneError("SAR scene must map exactly one polarization (VH or VV)")

    @property
    def polarization(self):
        for k in self.band_map:
            if k.upper() in POLARIZATIONS:
                return k.upper()
        return None


@dataclass(frozen=True)
class Scene:
    """A scene's metadata plus its loaded bands (keys upper-case)."""

    meta: SceneMeta
    bands: Mapping[str, Raster]
    cloud: Optional[Raster] = None

    @property
    def sensor(self):
        return self.meta.sensor

    @property
    def date(self):
        return self.meta.acquisition_date

    def band(self, name):
        try:
            return self.bands[name.upper()]
        except KeyError:
            raise SceneError(f"scene {self.meta.sensor.value} {self.date} has no {name} band") from None


def load_scene(meta: SceneMeta) -> Scene:
    bands = {k.upper(): read_raster(ref.path, ref.band) for k, ref in meta.band_map.items()}
    cloud = read_raster(meta.cloud_mask) if meta.cloud_mask else None
    return Scene(meta, bands, cloud)


@dataclass(frozen=True, eq=False)
class FloodMask:
    grid: GeoGrid
    states: np.ndarray
    provenance: frozenset = field(default_factory=frozenset)
    date_range: Optional[tuple] = None

    def __post_init__(self):
        arr = np.array(self.states, dtype=np.uint8, copy=True)
        if arr.shape != self.grid.shape:
            raise GridMismatchError(f"states shape {arr.shape} != grid shape {self.grid.shape}")
        bad = ~np.isin(arr, (DRY, FLOODED, NO_OBS))
        if bad.any():
            raise ParameterError("mask states must be 0 (dry), 1 (flooded) or 255 (no observation)")
        arr.setflags(write=False)
        object.__setattr__(self, "states", arr)
        object.__setattr__(self, "provenance", frozenset(str(p) for p in self.provenance))

    @property
    def flooded(self):
        return self.states == FLOODED

    @property
    def observed(self):
        return self.states != NO_OBS

    def replace(self, states=None, **kw):
        return FloodMask(
            kw.get("grid", self.grid),
            self.states if states is None else states,
            kw.get("provenance", self.provenance),
            kw.get("date_range", self.date_range),
        )

    def __eq__(self, other):
        if not isinstance(other, FloodMask):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.states, other.states)
            and self.provenance == other.provenance
            and self.date_range == other.date_range
        )


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------

_WRITE_OPTS = dict(driver="GTiff", compress="deflate", tiled=False)


def _open(path):
    path = Path(path)
    if not path.exists():
        raise RasterFileNotFound(f"raster not found: {path}")
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", NotGeoreferencedWarning)
            return rasterio.open(path)
    except RasterioIOError as exc:
        raise UnsupportedFormatError(f"{path}: not a supported raster format ({exc})") from None


def _grid_of(src, path):
    if src.crs is None and src.transform.is_identity:
        raise GeoreferenceError(f"{path}: no geotransform")
    if src.crs is None:
        raise GeoreferenceError(f"{path}: no coordinate reference system")
    return GeoGrid.from_transform(src.transform, src.width, src.height, src.crs.to_string())


def read_grid(path) -> GeoGrid:
    with _open(path) as src:
        return _grid_of(src, path)


def read_raster(path, band: int = 1) -> Raster:
    """Read one band of a georeferenced raster file (1-based band index)."""
    with _open(path) as src:
        grid = _grid_of(src, path)
        if not 1 <= band <= src.count:
            raise BandIndexError(f"{path}: band {band} out of range 1..{src.count}")
        samples = src.read(band).astype(np.float64)
        nodata = src.nodatavals[band - 1]
    return Raster(grid, samples, nodata)


def _profile(grid, dtype, nodata, count=1):
    return dict(
        _WRITE_OPTS,
        width=grid.width,
        height=grid.height,
        count=count,
        dtype=dtype,
        crs=CRS.from_user_input(grid.crs),
        transform=grid.transform,
        nodata=nodata,
    )


def write_raster(raster: Raster, path) -> None:
    """Write a single-band float64 GeoTIFF."""
    path = Path(path)
    try:
        with rasterio.open(path, "w", **_profile(raster.grid, "float64", raster.nodata)) as dst:
            dst.write(np.asarray(raster.samples), 1)
    except (RasterioIOError, OSError) as exc:
        raise RasterIOError(f"cannot write {path}: {exc}") from None
    except Exception as exc:
        raise RasterIOError(f"cannot encode raster to {path}: {exc}") from None


def write_mask(mask: FloodMask, path) -> None:
    """Write an 8-bit mask (0 dry, 1 flooded, 255 no observation) with provenance tags."""
    path = Path(path)
    tags = {"FLOODFUSE_PROVENANCE": ",".join(sorted(mask.provenance))}
    if mask.date_range:
        tags["FLOODFUSE_DATE_RANGE"] = "/".join(d.isoformat() for d in mask.date_range)
    try:
        with rasterio.open(path, "w", **_profile(mask.grid, "uint8", NO_OBS)) as dst:
            dst.write(np.asarray(mask.states), 1)
            dst.update_tags(**tags)
    except (RasterioIOError, OSError) as exc:
        raise RasterIOError(f"cannot write {path}: {exc}") from None


def read_mask(path) -> FloodMask:
    with _open(path) as src:
        grid = _grid_of(src, path)
        states = src.read(1)
        tags = src.tags()
    prov = tags.get("FLOODFUSE_PROVENANCE", "")
    dr = tags.get("FLOODFUSE_DATE_RANGE")
    date_range = tuple(dt.date.fromisoformat(s) for s in dr.split("/")) if dr else None
    return FloodMask(grid, states, frozenset(p for p in prov.split(",") if p), date_range)


def as_mask(raster: Raster) -> FloodMask:
    """Interpret a 0/1/255-valued raster as a mask; other invalid cells become NO_OBS."""
    states = np.full(raster.grid.shape, NO_OBS, dtype=np.uint8)
    v = raster.valid
    states[v & (raster.samples == FLOODED)] = FLOODED
    states[v & (raster.samples == DRY)] = DRY
    return FloodMask(raster.grid, states)


# --------------------------------------------------------------------------
# Operations
# --------------------------------------------------------------------------


class Resample(str, enum.Enum):
    NEAREST = "nearest"
    BILINEAR = "bilinear"


_SNAP = 1e-9


def _snap(frac):
    near = np.rint(frac)
    return np.where(np.abs(frac - near) < _SNAP, near, frac)


def align(source: Raster, target: GeoGrid, method=Resample.NEAREST) -> Raster:
    """Resample ``source`` onto ``target`` (same CRS, no reprojection).

    Output cells whose centre falls outside the source footprint are nodata.
    BILINEAR uses the four surrounding source centres (clamped at the edges);
    any contributing nodata neighbour makes the output nodata.
    """
    method = Resample(method)
    if not source.grid.same_crs(target):
        raise CRSMismatchError(f"cannot align {source.grid.crs} onto {target.crs}")
    if source.grid == target:
        return source
    src = source.grid
    x, y = target.centers()
    fc, fr = src.index(x, y)
    fc, fr = _snap(fc), _snap(fr)
    inside = (fc >= -0.5) & (fc < src.width - 0.5) & (fr >= -0.5) & (fr < src.height - 0.5)
    vals = source.samples
    valid = source.valid
    out = np.zeros(target.shape)
    ok = np.zeros(target.shape, dtype=bool)
    if method is Resample.NEAREST:
        c = np.clip(np.floor(fc + 0.5).astype(np.int64), 0, src.width - 1)
        r = np.clip(np.floor(fr + 0.5).astype(np.int64), 0, src.height - 1)
        out = vals[r, c]
        ok = inside & valid[r, c]
    else:
        fc = np.clip(fc, 0, src.width - 1)
        fr = np.clip(fr, 0, src.height - 1)
        c0 = np.floor(fc).astype(np.int64)
        r0 = np.floor(fr).astype(np.int64)
        wc = fc - c0
        wr = fr - r0
        c1 = np.minimum(c0 + 1, src.width - 1)
        r1 = np.minimum(r0 + 1, src.height - 1)
        ok = inside.copy()
        acc = np.zeros(target.shape)
        for rr, cc, wt in (
            (r0, c0, (1 - wr) * (1 - wc)),
            (r0, c1, (1 - wr) * wc),
            (r1, c0, wr * (1 - wc)),
            (r1, c1, wr * wc),
        ):
            used = wt > 0
            ok &= ~used | valid[rr, cc]
            acc = acc + np.where(used, vals[rr, cc] * wt, 0.0)
        out = acc
    result = np.where(ok, out, source.fill)
    return Raster(target, result, source.nodata if source.nodata is not None else np.nan)


def finest_grid(grids: Sequence[GeoGrid]) -> GeoGrid:
    """Grid with the smallest cell area; the earliest wins ties."""
    best = grids[0]
    for g in grids[1:]:
        if g.cell_area < best.cell_area:
            best = g
    return best


class Reducer(str, enum.Enum):
    MEAN = "mean"
    MEDIAN = "median"
    MIN = "min"
    MAX = "max"


def mosaic(rasters: Sequence[Raster], reducer=Reducer.MEDIAN) -> Raster:
    """Per-cell reduction over the valid inputs.

    Values are sorted per cell before reducing so results do not depend on
    input order. A cell is nodata only where every input is nodata.
    """
    reducer = Reducer(reducer)
    if not rasters:
        raise ParameterError("mosaic needs at least one raster")
    require_same_grid(*(r.grid for r in rasters))
    if len(rasters) == 1:
        return rasters[0]
    stack = np.stack([np.where(r.valid, r.samples, np.nan) for r in rasters])
    stack.sort(axis=0)  # NaNs sort last
    count = np.sum(~np.isnan(stack), axis=0)
    ok = count > 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        if reducer is Reducer.MEAN:
            total = np.zeros(stack.shape[1:])
            for layer in stack:
                total += np.where(np.isnan(layer), 0.0, layer)
            out = np.where(ok, total / np.maximum(count, 1), 0.0)
        elif reducer is Reducer.MEDIAN:
            out = np.nanmedian(stack, axis=0)
        elif reducer is Reducer.MIN:
            out = np.nanmin(stack, axis=0)
        else:
            out = np.nanmax(stack, axis=0)
    first = rasters[0]
    fill = next((r.nodata for r in rasters if r.nodata is not None), np.nan)
    return Raster(first.grid, np.where(ok, out, fill), fill)


class BinaryOp(str, enum.Enum):
    ADD = "add"
    SUB = "sub"
    DIV = "div"


def map_binary(a: Raster, b: Raster, op) -> Raster:
    """Cell-wise ``a op b``; nodata absorbing, division by zero gives nodata."""
    op = BinaryOp(op)
    require_same_grid(a.grid, b.grid)
    ok = a.valid & b.valid
    x, y = a.samples, b.samples
    with np.errstate(all="ignore"):
        if op is BinaryOp.ADD:
            out = x + y
        elif op is BinaryOp.SUB:
            out = x - y
        else:
            ok &= y != 0
            out = x / np.where(y != 0, y, 1.0)
    fill = a.nodata if a.nodata is not None else (b.nodata if b.nodata is not None else np.nan)
    return Raster(a.grid, np.where(ok, out, fill), fill)
