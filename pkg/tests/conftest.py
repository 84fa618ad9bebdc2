import numpy as np
import pytest

from floodfuse import _accel
from floodfuse.raster import GeoGrid

BACKENDS = ["numpy"] + (["numba"] if _accel.HAS_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request, monkeypatch):
    """Run the test once per kernel backend."""
    monkeypatch.setenv("FLOODFUSE_BACKEND", request.param)
    return request.param


def make_grid(width, height, origin=(0.0, 0.0), pixel=1.0, crs="EPSG:32643"):
    dx, dy = (pixel, pixel) if np.isscalar(pixel) else pixel
    return GeoGrid(width, height, origin[0], origin[1], dx, dy, crs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def optical_scene(green, nir, epoch, cloud=None, sensor="SENTINEL2", date=None, grid=None):
    from floodfuse.raster import BandRef, Epoch, Raster, Scene, SceneMeta, Sensor

    green = np.atleast_2d(np.asarray(green, dtype=float))
    grid = grid or make_grid(green.shape[1], green.shape[0])
    meta = SceneMeta(Sensor.parse(sensor), date, {"GREEN": BandRef("-"), "NIR": BandRef("-")}, Epoch(epoch.upper()))
    bands = {"GREEN": Raster(grid, green, -9999.0), "NIR": Raster(grid, np.atleast_2d(nir), -9999.0)}
    cl = None if cloud is None else Raster(grid, np.atleast_2d(cloud))
    return Scene(meta, bands, cl)


def sar_scene(linear, epoch, pol="VH", date=None, grid=None):
    from floodfuse.raster import BandRef, Epoch, Raster, Scene, SceneMeta, Sensor

    linear = np.atleast_2d(np.asarray(linear, dtype=float))
    grid = grid or make_grid(linear.shape[1], linear.shape[0])
    meta = SceneMeta(Sensor.SENTINEL1, date, {pol: BandRef("-")}, Epoch(epoch.upper()))
    return Scene(meta, {pol: Raster(grid, linear, -9999.0)})


def ndwi_to_bands(values, nir=0.25):
    """GREEN/NIR reflectances with the given NDWI."""
    values = np.asarray(values, dtype=float)
    n = np.full(values.shape, nir)
    return n * (1 + values) / (1 - values), n


# -- acceptance reporting: one line per criterion at the end of the run --------

_criteria = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _criteria.setdefault(number, {"title": title, "ok": True, "ran": False, "detail": ""})
    if call.when == "call" or call.excinfo is not None:
        entry["ran"] = True
        if call.excinfo is not None and not call.excinfo.errisinstance(pytest.skip.Exception):
            entry["ok"] = False
            entry["detail"] = str(call.excinfo.value).splitlines()[0][:120] if str(call.excinfo.value) else ""


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        e = _criteria[number]
        status = "PASS" if e["ok"] and e["ran"] else "FAIL"
        line = f"[{status}] criterion {number:2d}: {e['title']}"
        if status == "FAIL" and e["detail"]:
            line += f"  ({e['detail']})"
        terminalreporter.write_line(line)
