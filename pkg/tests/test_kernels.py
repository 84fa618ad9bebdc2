"""Kernel backends against brute-force oracles and against each other."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy import ndimage

from floodfuse import _accel, kernels

from conftest import make_grid
from oracles import ncc_naive


def brute_focal(values, valid, window, median):
    h, w = values.shape
    r = window // 2
    out = np.full(values.shape, np.nan)
    for i in range(h):
        for j in range(w):
            win = values[max(0, i - r): i + r + 1, max(0, j - r): j + r + 1]
            ok = valid[max(0, i - r): i + r + 1, max(0, j - r): j + r + 1]
            if valid[i, j] and ok.any():
                vals = win[ok]
                out[i, j] = np.median(vals) if median else vals.mean()
    return out


@pytest.mark.parametrize("median", [True, False])
@pytest.mark.parametrize("window", [3, 5, 7])
def test_focal_matches_oracle(backend, median, window, rng):
    values = rng.normal(size=(23, 17))
    valid = rng.random(values.shape) > 0.15
    out, ok = kernels.focal_stat(values, valid, window, median)
    expected = brute_focal(values, valid, window, median)
    np.testing.assert_array_equal(ok, ~np.isnan(expected))
    np.testing.assert_allclose(out[ok], expected[ok], rtol=1e-12, atol=1e-12)


def _both(fn, *args, monkeypatch):
    results = []
    for b in ("numpy", "numba"):
        monkeypatch.setenv("FLOODFUSE_BACKEND", b)
        results.append(fn(*args))
    return results


needs_numba = pytest.mark.skipif(not _accel.HAS_NUMBA, reason="numba not installed")


@needs_numba
@pytest.mark.parametrize("median", [True, False])
def test_focal_backends_bit_identical(median, rng, monkeypatch):
    values = rng.normal(size=(300, 41))
    valid = rng.random(values.shape) > 0.1
    (a, oka), (b, okb) = _both(kernels.focal_stat, values, valid, 5, median, monkeypatch=monkeypatch)
    np.testing.assert_array_equal(oka, okb)
    assert np.array_equal(a, b, equal_nan=True)


def test_label8_matches_scipy(backend, rng):
    fg = rng.random((60, 45)) > 0.55
    labels, n = kernels.label8(fg)
    ref, m = ndimage.label(fg, structure=np.ones((3, 3)))
    assert n == m
    # same partition: each scipy label maps to exactly one of ours
    pairs = set(zip(ref[fg].tolist(), labels[fg].tolist()))
    assert len(pairs) == n
    assert (labels[~fg] == 0).all()


def test_label8_numbering_by_first_appearance(backend):
    fg = np.array([[0, 0, 1], [1, 0, 0], [0, 1, 0]], bool)
    labels, n = kernels.label8(fg)
    assert n == 2
    np.testing.assert_array_equal(labels, [[0, 0, 1], [2, 0, 0], [0, 2, 0]])


@needs_numba
def test_label8_backends_identical(rng, monkeypatch):
    fg = rng.random((120, 130)) > 0.5
    (a, na), (b, nb) = _both(kernels.label8, fg, monkeypatch=monkeypatch)
    assert na == nb
    np.testing.assert_array_equal(a, b)


def test_ncc_matches_naive(backend, rng):
    image = rng.random((30, 25))
    template = rng.random((6, 4))
    np.testing.assert_allclose(kernels.ncc_scores(image, template), ncc_naive(image, template), atol=1e-12)


@needs_numba
def test_ncc_backends_agree(rng, monkeypatch):
    image = rng.random((80, 70))
    template = rng.random((9, 7))
    a, b = _both(kernels.ncc_scores, image, template, monkeypatch=monkeypatch)
    np.testing.assert_allclose(a, b, atol=1e-12)


def brute_covered(rows, cols, coarse, flooded, fine):
    """Per coarse cell, summed overlap area of FLOODED fine cells, by explicit rectangles."""
    cx0, cy0, cdx, cdy = coarse
    fx0, fy0, fdx, fdy = fine
    fh, fw = flooded.shape
    out = []
    for r, c in zip(rows, cols):
        x0, x1 = cx0 + c * cdx, cx0 + (c + 1) * cdx
        y1, y0 = cy0 - r * cdy, cy0 - (r + 1) * cdy
        total = 0.0
        for i in range(fh):
            for j in range(fw):
                if not flooded[i, j]:
                    continue
                a0, a1 = fx0 + j * fdx, fx0 + (j + 1) * fdx
                b1, b0 = fy0 - i * fdy, fy0 - (i + 1) * fdy
                ox = max(0.0, min(x1, a1) - max(x0, a0))
                oy = max(0.0, min(y1, b1) - max(y0, b0))
                total += ox * oy
        out.append(total)
    return np.array(out)


def test_covered_area_matches_rectangles(backend, rng):
    coarse = make_grid(5, 4, origin=(0.0, 8.0), pixel=2.0)
    fine = make_grid(13, 11, origin=(0.5, 8.5), pixel=0.75)
    flooded = rng.random((11, 13)) > 0.4
    rows, cols = np.divmod(np.arange(20), 5)
    got = kernels.covered_area(rows, cols, coarse.params(), flooded, fine.params())
    np.testing.assert_allclose(got, brute_covered(rows, cols, coarse.params(), flooded, fine.params()), atol=1e-12)


@needs_numba
def test_covered_area_backends_identical(rng, monkeypatch):
    coarse = make_grid(16, 16, pixel=4.0, origin=(0.0, 64.0))
    fine = make_grid(64, 64, pixel=1.0, origin=(0.0, 64.0))
    flooded = rng.random((64, 64)) > 0.5
    rows, cols = np.divmod(np.arange(256), 16)
    a, b = _both(kernels.covered_area, rows, cols, coarse.params(), flooded, fine.params(), monkeypatch=monkeypatch)
    np.testing.assert_array_equal(a, b)


@settings(max_examples=40, deadline=None)
@given(arrays(bool, st.tuples(st.integers(1, 20), st.integers(1, 20))))
def test_label8_property(fg):
    labels, n = kernels.label8(fg)
    ref, m = ndimage.label(fg, structure=np.ones((3, 3)))
    assert n == m
    assert len(set(zip(ref[fg].tolist(), labels[fg].tolist()))) == n


def test_label8_serpentine(backend):
    # one long snake: the worst case for iterative propagation
    fg = np.zeros((41, 40), bool)
    fg[::4, :] = True
    fg[1::8, -1] = fg[2::8, -1] = fg[3::8, -1] = True
    fg[5::8, 0] = fg[6::8, 0] = fg[7::8, 0] = True
    labels, n = kernels.label8(fg)
    assert n == 1
    assert (labels[fg] == 1).all()
