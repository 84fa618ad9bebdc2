import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from floodfuse.errors import ParameterError, SceneError
from floodfuse.optical import OpticalParams, ndwi, optical_flood_mask
from floodfuse.raster import DRY, FLOODED, NO_OBS, Raster, Sensor

from conftest import make_grid, ndwi_to_bands, optical_scene

ND = -9999.0


def _r(v):
    return Raster(make_grid(1, 1), [[v]], ND)


@pytest.mark.parametrize("g, n, expected", [(0.2, 0.2, 0.0), (0.6, 0.2, 0.5)])
def test_ndwi_examples(g, n, expected):
    assert ndwi(_r(g), _r(n)).samples[0, 0] == pytest.approx(expected, abs=1e-15)


def test_ndwi_zero_denominator():
    assert not ndwi(_r(0.0), _r(0.0)).valid[0, 0]


reflect = arrays(np.float64, (3, 4), elements=st.floats(0.0, 1e4))


@settings(max_examples=60, deadline=None)
@given(reflect, reflect, st.floats(1e-3, 1e3))
def test_ndwi_invariants(g, n, c):
    grid = make_grid(4, 3)
    a = ndwi(Raster(grid, g, ND), Raster(grid, n, ND))
    b = ndwi(Raster(grid, n, ND), Raster(grid, g, ND))
    ok = a.valid
    np.testing.assert_array_equal(ok, b.valid)
    np.testing.assert_allclose(a.samples[ok], -b.samples[ok], atol=1e-12)
    assert np.all((a.samples[ok] >= -1) & (a.samples[ok] <= 1))
    s = ndwi(Raster(grid, g * c, ND), Raster(grid, n * c, ND))
    np.testing.assert_allclose(s.samples[ok], a.samples[ok], atol=1e-12)


def test_params_validation():
    with pytest.raises(ParameterError):
        OpticalParams(0.0)
    with pytest.raises(ParameterError):
        OpticalParams(2.5)
    with pytest.raises(ParameterError):
        OpticalParams(0.2, Sensor.SENTINEL1)
    OpticalParams(2.0)


def test_no_change_all_dry(rng):
    g, n = ndwi_to_bands(rng.uniform(-0.6, 0.6, (5, 6)))
    m = optical_flood_mask([optical_scene(g, n, "pre")], [optical_scene(g, n, "post")])
    assert (m.states == DRY).all()
    assert m.provenance == {"SENTINEL2"}


def test_single_cell_rise_floods():
    pre = optical_scene(*ndwi_to_bands([[-0.3]]), "pre")
    post = optical_scene(*ndwi_to_bands([[0.4]]), "post")
    assert optical_flood_mask([pre], [post], OpticalParams(0.2)).states[0, 0] == FLOODED


def test_cloud_forces_no_obs():
    pre = optical_scene(*ndwi_to_bands([[-0.3, -0.3]]), "pre")
    post = optical_scene(*ndwi_to_bands([[0.4, 0.4]]), "post", cloud=[[1, 0]])
    np.testing.assert_array_equal(optical_flood_mask([pre], [post]).states, [[NO_OBS, FLOODED]])


def test_absolute_mode():
    pre = optical_scene(*ndwi_to_bands([[0.3, -0.5]]), "pre")
    post = optical_scene(*ndwi_to_bands([[0.35, -0.1]]), "post")
    rel = optical_flood_mask([pre], [post], OpticalParams(0.2)).states
    ab = optical_flood_mask([pre], [post], OpticalParams(0.2, absolute=True)).states
    np.testing.assert_array_equal(rel, [[DRY, FLOODED]])
    np.testing.assert_array_equal(ab, [[FLOODED, DRY]])


def test_median_mosaic_of_posts():
    pre = optical_scene(*ndwi_to_bands([[-0.3]]), "pre")
    posts = [optical_scene(*ndwi_to_bands([[v]]), "post") for v in (-0.3, 0.4, 0.5)]
    assert optical_flood_mask([pre], posts).states[0, 0] == FLOODED


def test_wrong_sensor_rejected():
    s = optical_scene([[0.3]], [[0.2]], "pre", sensor="LANDSAT9")
    with pytest.raises(SceneError):
        optical_flood_mask([s], [s], OpticalParams(sensor=Sensor.SENTINEL2))


@settings(max_examples=25, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-0.9, 0.9)),
       arrays(np.float64, (6, 6), elements=st.floats(-0.9, 0.9)))
def test_monotone_in_threshold(a, b):
    pre = optical_scene(*ndwi_to_bands(a), "pre")
    post = optical_scene(*ndwi_to_bands(b), "post")
    prev = None
    for t in np.linspace(0.05, 2.0, 12):
        flooded = optical_flood_mask([pre], [post], OpticalParams(t)).flooded
        if prev is not None:
            assert not (flooded & ~prev).any()
        prev = flooded
