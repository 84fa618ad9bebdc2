"""Point-of-interest extraction from map tiles by template matching.

Tiles come with a manifest of geographic extents (``path,west,south,east,north,zoom``).
Each tile is matched against an icon template with zero-mean normalized
cross-correlation, hits are placed at the icon centre, converted to lon/lat by
linear interpolation of the tile extent, and deduplicated globally so that no
two kept points are within ``min_separation_m`` of each other.

At zoom 21 a tile pixel is about 0.075 m on the ground at the equator.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from PIL import Image
from shapely.geometry import Point

from . import kernels
from .errors import FloodFuseError, ParameterError, TemplateError
from .geodesy import distance_m
from .vector import Feature, Kind, VectorLayer

# Rec. 601 luma weights.
LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True)
class TileExtent:
    path: str
    width: int
    height: int
    west: float
    south: float
    east: float
    north: float
    zoom: Optional[int] = None

    def __post_init__(self):
        if not (self.west < self.east and self.south < self.north):
            raise ParameterError(f"{self.path}: degenerate extent")
        if self.width < 1 or self.height < 1:
            raise ParameterError(f"{self.path}: empty image")


@dataclass(frozen=True)
class MatchParams:
    score_threshold: float = 0.95
    min_separation_m: float = 10.0

    def __post_init__(self):
        if not (0 < self.score_threshold <= 1):
            raise ParameterError(f"score_threshold must be in (0, 1], got {self.score_threshold}")
        if self.min_separation_m < 0:
            raise ParameterError("min_separation_m must be >= 0")


def to_gray(pixels) -> np.ndarray:
    arr = np.asarray(pixels, dtype=np.float64)
    if arr.ndim == 2:
        return arr
    if arr.ndim == 3 and arr.shape[2] in (3, 4):
        return arr[..., :3] @ LUMA
    if arr.ndim == 3 and arr.shape[2] == 1:
        return arr[..., 0]
    raise ParameterError(f"unsupported image shape {arr.shape}")


def load_gray(path) -> np.ndarray:
    """Grayscale float image from PNG/JPEG (Pillow) or a 1/3/4-band GeoTIFF."""
    path = Path(path)
    if not path.exists():
        raise FloodFuseError(f"tile not readable: {path}")
    if path.suffix.lower() in (".tif", ".tiff"):
        import rasterio

        with rasterio.open(path) as src:
            data = src.read()
        return to_gray(np.moveaxis(data, 0, -1))
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "RGB", "RGBA", "I", "F"):
                im = im.convert("RGB")
            return to_gray(np.asarray(im))
    except OSError as exc:
        raise FloodFuseError(f"tile not readable: {path} ({exc})") from None


def match_template(image, template, threshold: float = 0.95):
    """Placements whose NCC score exceeds ``threshold``, as ``(col, row, score)``.

    ``(col, row)`` is the top-left corner of the template placement, in
    row-major order. Image windows with no variance score 0.
    """
    image = np.asarray(image, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    if image.ndim != 2 or template.ndim != 2:
        raise TemplateError("image and template must be 2-D grayscale arrays")
    if template.shape[0] >= image.shape[0] or template.shape[1] >= image.shape[1]:
        raise TemplateError(f"template {template.shape} must be smaller than image {image.shape}")
    if np.all(template == template.flat[0]):
        raise TemplateError("template is constant")
    scores = kernels.ncc_scores(image, template)
    rows, cols = np.nonzero(scores > threshold)
    return [(int(c), int(r), float(scores[r, c])) for r, c in zip(rows, cols)]


def pixels_to_geo(hits: Iterable, extent: TileExtent):
    """Pixel (col, row) to (lon, lat) of that pixel's centre. Fractional pixels allowed."""
    out = []
    for col, row in hits:
        if not (0 <= col <= extent.width - 1 and 0 <= row <= extent.height - 1):
            raise ParameterError(f"pixel ({col}, {row}) outside {extent.width}x{extent.height} tile")
        lon = extent.west + (col + 0.5) / extent.width * (extent.east - extent.west)
        lat = extent.north - (row + 0.5) / extent.height * (extent.north - extent.south)
        out.append((lon, lat))
    return out


def geo_to_pixels(coords: Iterable, extent: TileExtent):
    return [
        (
            (lon - extent.west) / (extent.east - extent.west) * extent.width - 0.5,
            (extent.north - lat) / (extent.north - extent.south) * extent.height - 0.5,
        )
        for lon, lat in coords
    ]


def dedupe_min_distance(points: Sequence, min_separation_m: float = 10.0):
    """Greedy thinning: highest score first (ties by lon, then lat); a point is
    kept only if it is more than ``min_separation_m`` from every kept point.

    ``points`` are ``(lon, lat, score, ...)`` tuples; extra fields ride along.
    """
    ordered = sorted(points, key=lambda p: (-p[2], p[0], p[1], tuple(map(str, p[3:]))))
    kept = []
    klon = np.empty(len(ordered))
    klat = np.empty(len(ordered))
    for p in ordered:
        n = len(kept)
        if n:
            d = distance_m(p[0], p[1], klon[:n], klat[:n])
            if np.any(d <= min_separation_m):
                continue
        klon[n], klat[n] = p[0], p[1]
        kept.append(p)
    return kept


def read_manifest(path) -> list:
    """Tile extents from a ``path,west,south,east,north,zoom`` CSV; relative
    paths resolve against the manifest's directory. Image sizes are read from the tiles."""
    path = Path(path)
    tiles = []
    with open(path, newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            try:
                tile_path = row["path"].strip()
                full = Path(tile_path)
                if not full.is_absolute():
                    full = path.parent / full
                gray = load_gray(full)
                zoom = row.get("zoom", "").strip()
                tiles.append(TileExtent(
                    str(full), gray.shape[1], gray.shape[0],
                    float(row["west"]), float(row["south"]), float(row["east"]), float(row["north"]),
                    int(zoom) if zoom else None,
                ))
            except (KeyError, ValueError) as exc:
                raise ParameterError(f"{path}: manifest row {i + 1}: {exc}") from None
    return tiles


def extract_pois(tiles: Sequence[TileExtent], template, params: MatchParams = MatchParams(), crs="EPSG:4326") -> VectorLayer:
    """Match every tile, georeference hits at the icon centre, then dedupe across all tiles."""
    template = to_gray(template)
    th, tw = template.shape
    candidates = []
    for tile in tiles:
        image = load_gray(tile.path)
        if image.shape != (tile.height, tile.width):
            raise ParameterError(f"{tile.path}: image is {image.shape[::-1]}, manifest says {tile.width}x{tile.height}")
        hits = match_template(image, template, params.score_threshold)
        centres = [(c + (tw - 1) / 2, r + (th - 1) / 2) for c, r, _ in hits]
        for (lon, lat), (_, _, score) in zip(pixels_to_geo(centres, tile), hits):
            candidates.append((lon, lat, score, tile.path))
    kept = dedupe_min_distance(candidates, params.min_separation_m)
    feats = [Feature(Point(lon, lat), {"score": round(score, 6), "tile": Path(src).name}) for lon, lat, score, src in kept]
    return VectorLayer(Kind.POINT, feats, crs)
