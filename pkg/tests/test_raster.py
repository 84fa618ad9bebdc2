
import numpy as np
import pytest
import rasterio
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from floodfuse.errors import (
    BandIndexError,
    CRSMismatchError,
    GeoreferenceError,
    GridMismatchError,
    ParameterError,
    RasterFileNotFound,
    RasterIOError,
    UnsupportedFormatError,
)
from floodfuse.raster import (
    FloodMask,
    GeoGrid,
    Raster,
    align,
    map_binary,
    mosaic,
    read_mask,
    read_raster,
    write_mask,
    write_raster,
)

from conftest import make_grid

ND = -9999.0
ORIGIN = (500000.0, 2800000.0)


def test_grid_invariants():
    with pytest.raises(ParameterError):
        GeoGrid(0, 1, 0, 0, 1, 1)
    with pytest.raises(ParameterError):
        GeoGrid(1, 1, 0, 0, 1, -1)


def test_pixel_center_roundtrip():
    g = make_grid(7, 5, origin=(100.0, 50.0), pixel=(2.0, 3.0))
    cols, rows = np.meshgrid(np.arange(7), np.arange(5))
    x, y = g.center(cols, rows)
    assert x[0, 0] == 101.0 and y[0, 0] == 48.5
    c, r = g.index(x, y)
    np.testing.assert_allclose(c, cols)
    np.testing.assert_allclose(r, rows)


def test_read_2x2(tmp_path):
    g = make_grid(2, 2, origin=ORIGIN)
    write_raster(Raster(g, [[1, 2], [3, 4]], ND), tmp_path / "a.tif")
    r = read_raster(tmp_path / "a.tif")
    np.testing.assert_array_equal(r.samples, [[1, 2], [3, 4]])
    assert r.nodata == ND
    assert r.grid == g


def test_roundtrip_identity(tmp_path, rng):
    g = make_grid(13, 9, origin=(68.123, 25.5), pixel=(1e-4, 2e-4), crs="EPSG:4326")
    vals = rng.normal(size=g.shape)
    vals[3, 4] = ND
    r = Raster(g, vals, ND)
    write_raster(r, tmp_path / "r.tif")
    back = read_raster(tmp_path / "r.tif")
    assert back == r
    write_raster(back, tmp_path / "r2.tif")
    assert read_raster(tmp_path / "r2.tif") == r


def test_write_1x1_zero(tmp_path):
    r = Raster(make_grid(1, 1, origin=ORIGIN), [[0.0]])
    write_raster(r, tmp_path / "z.tif")
    assert read_raster(tmp_path / "z.tif").samples[0, 0] == 0.0


def test_mask_roundtrip(tmp_path):
    import datetime as dt

    g = make_grid(3, 2, origin=ORIGIN)
    m = FloodMask(g, [[0, 1, 255], [1, 1, 0]], {"SENTINEL1"}, (dt.date(2022, 8, 1), dt.date(2022, 8, 3)))
    write_mask(m, tmp_path / "m.tif")
    with rasterio.open(tmp_path / "m.tif") as src:
        assert src.dtypes[0] == "uint8" and src.nodata == 255
    assert read_mask(tmp_path / "m.tif") == m
    raw = read_raster(tmp_path / "m.tif")
    np.testing.assert_array_equal(raw.samples, [[0, 1, 255], [1, 1, 0]])


def test_read_errors(tmp_path):
    with pytest.raises(RasterFileNotFound):
        read_raster(tmp_path / "nope.tif")
    (tmp_path / "junk.tif").write_bytes(b"not a tiff at all")
    with pytest.raises(UnsupportedFormatError):
        read_raster(tmp_path / "junk.tif")
    write_raster(Raster(make_grid(2, 2, origin=ORIGIN), np.zeros((2, 2))), tmp_path / "ok.tif")
    with pytest.raises(BandIndexError):
        read_raster(tmp_path / "ok.tif", band=2)


@pytest.mark.filterwarnings("ignore::rasterio.errors.NotGeoreferencedWarning")
def test_read_without_geotransform(tmp_path):
    with rasterio.open(tmp_path / "plain.tif", "w", driver="GTiff", width=2, height=2, count=1, dtype="float64") as d:
        d.write(np.ones((2, 2)), 1)
    with pytest.raises(GeoreferenceError):
        read_raster(tmp_path / "plain.tif")


def test_write_io_error(tmp_path):
    with pytest.raises(RasterIOError):
        write_raster(Raster(make_grid(1, 1), [[1.0]]), tmp_path / "missing-dir" / "x.tif")


# -- align ----------------------------------------------------------------


@pytest.mark.parametrize("method", ["nearest", "bilinear"])
def test_align_identity(method, rng):
    r = Raster(make_grid(6, 4, origin=(0.1, 0.7), pixel=0.3), rng.normal(size=(4, 6)))
    out = align(r, r.grid, method)
    np.testing.assert_array_equal(out.samples, r.samples)


@pytest.mark.parametrize("method", ["nearest", "bilinear"])
def test_align_identity_through_resampling_path(method, rng):
    # A grid equal in value but built separately still goes through the sampler.
    g = make_grid(6, 4, origin=(0.1, 0.7), pixel=0.3)
    r = Raster(g, rng.normal(size=(4, 6)))
    shifted = GeoGrid(6, 4, 0.1 + 1e-13, 0.7, 0.3, 0.3, g.crs)
    out = align(r, shifted, method)
    np.testing.assert_array_equal(out.samples, r.samples)


def test_align_nearest_upsample():
    r = Raster(make_grid(2, 2, origin=(0, 2)), [[0, 10], [0, 10]])
    out = align(r, make_grid(4, 4, origin=(0, 2), pixel=0.5), "nearest")
    expected = np.array([[0, 0, 10, 10]] * 4, dtype=float)
    np.testing.assert_array_equal(out.samples, expected)


def test_align_bilinear_midpoint():
    r = Raster(make_grid(2, 1, origin=(0, 1)), [[0.0, 10.0]])
    # one-cell target centred at x = 1.0, halfway between source centres 0.5 and 1.5
    target = GeoGrid(1, 1, 0.5, 1.0, 1.0, 1.0, "EPSG:32643")
    assert align(r, target, "bilinear").samples[0, 0] == pytest.approx(5.0)


def test_align_outside_is_nodata():
    r = Raster(make_grid(2, 2, origin=(0, 2)), np.ones((2, 2)), ND)
    out = align(r, make_grid(2, 2, origin=(5, 2)), "nearest")
    assert not out.valid.any()


def test_align_crs_mismatch():
    r = Raster(make_grid(2, 2), np.ones((2, 2)))
    with pytest.raises(CRSMismatchError):
        align(r, make_grid(2, 2, crs="EPSG:4326"))


# -- mosaic / map_binary ----------------------------------------------------


def _cell(values, nodata=ND):
    g = make_grid(1, 1)
    return [Raster(g, [[v]], nodata) for v in values]


@pytest.mark.parametrize("reducer", ["mean", "median", "min", "max"])
def test_mosaic_single(reducer, rng):
    r = Raster(make_grid(3, 3), rng.normal(size=(3, 3)))
    assert mosaic([r], reducer) == r


def test_mosaic_mean_skips_nodata():
    assert mosaic(_cell([3, 5, ND]), "mean").samples[0, 0] == 4


def test_mosaic_median():
    assert mosaic(_cell([1, 9, 5]), "median").samples[0, 0] == 5


def test_mosaic_all_nodata():
    out = mosaic(_cell([ND, ND]), "max")
    assert not out.valid.any()


def test_mosaic_errors():
    with pytest.raises(ParameterError):
        mosaic([], "mean")
    with pytest.raises(GridMismatchError):
        mosaic([Raster(make_grid(1, 1), [[1]]), Raster(make_grid(2, 1), [[1, 2]])])


def test_map_binary_examples(rng):
    a = Raster(make_grid(3, 2), rng.normal(size=(2, 3)))
    assert np.all(map_binary(a, a, "sub").samples == 0)
    five, three, zero = (Raster(make_grid(1, 1), [[v]], ND) for v in (5, 3, 0))
    assert map_binary(five, three, "sub").samples[0, 0] == 2
    assert map_binary(five, three, "add").samples[0, 0] == 8
    q = map_binary(Raster(make_grid(1, 1), [[1]], ND), zero, "div")
    assert not q.valid[0, 0] and q.samples[0, 0] == ND


grid_values = arrays(np.float64, (4, 5), elements=st.floats(-1e6, 1e6))


@settings(max_examples=50, deadline=None)
@given(grid_values, grid_values, st.lists(st.tuples(st.integers(0, 3), st.integers(0, 4)), max_size=6),
       st.sampled_from(["add", "sub", "div"]))
def test_map_binary_nodata_absorbing(a, b, holes, op):
    for r, c in holes:
        a[r, c] = ND
    ra, rb = Raster(make_grid(5, 4), a, ND), Raster(make_grid(5, 4), b, ND)
    out = map_binary(ra, rb, op)
    assert not out.valid[~(ra.valid & rb.valid)].any()


@settings(max_examples=50, deadline=None)
@given(st.lists(arrays(np.float64, (3, 3), elements=st.floats(-1e3, 1e3) | st.just(ND)), min_size=1, max_size=5),
       st.sampled_from(["mean", "median", "min", "max"]), st.randoms(use_true_random=False))
def test_mosaic_permutation_invariant(layers, reducer, random):
    g = make_grid(3, 3)
    rasters = [Raster(g, a, ND) for a in layers]
    shuffled = rasters[:]
    random.shuffle(shuffled)
    assert mosaic(rasters, reducer) == mosaic(shuffled, reducer)


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (5, 6), elements=st.floats(-1e3, 1e3)), st.sampled_from(["nearest", "bilinear"]))
def test_align_identity_property(vals, method):
    g = make_grid(6, 5, origin=(0.3, 9.1), pixel=0.7)
    r = Raster(g, vals)
    other = GeoGrid(6, 5, 0.3, 9.1 + 2e-14, 0.7, 0.7, g.crs)
    np.testing.assert_array_equal(align(r, other, method).samples, vals)
