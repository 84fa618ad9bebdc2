"""WGS84 distances and lengths, shared by road measurement and POI dedup."""

from functools import lru_cache

import numpy as np
from pyproj import CRS, Geod

WGS84 = Geod(ellps="WGS84")


@lru_cache(maxsize=64)
def is_geographic(crs: str) -> bool:
    return CRS.from_user_input(crs).is_geographic


def distance_m(lon1, lat1, lon2, lat2):
    """Geodesic distance in metres; broadcasts over array inputs."""
    lon1, lat1, lon2, lat2 = np.broadcast_arrays(
        *(np.asarray(a, dtype=np.float64) for a in (lon1, lat1, lon2, lat2))
    )
    shape = lon1.shape
    if lon1.size == 1:
        # pyproj takes its scalar path for one-element input
        _, _, d = WGS84.inv(*(float(a.flat[0]) for a in (lon1, lat1, lon2, lat2)))
    else:
        _, _, d = WGS84.inv(*(a.ravel() for a in (lon1, lat1, lon2, lat2)))
    d = np.asarray(d, dtype=np.float64).reshape(shape)
    return d if shape else float(d)


def length_km(geom, crs: str) -> float:
    """Length of a (multi)linestring: geodesic on WGS84 for geographic CRSs,
    planar (CRS units taken as metres) otherwise."""
    if geom is None or geom.is_empty:
        return 0.0
    if is_geographic(crs):
        return WGS84.geometry_length(geom) / 1000.0
    return geom.length / 1000.0
