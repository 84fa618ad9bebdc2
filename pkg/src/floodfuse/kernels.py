"""Hot inner loops, each with a numba path and a pure-array fallback.

The public functions dispatch on :func:`floodfuse._accel.use_numba`. The focal
statistics and connected-component labels are bit-identical between the two
paths; NCC scores and covered areas agree to rounding (summation order differs).
"""

import warnings

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import sparse

from ._accel import njit, prange, use_numba

_ROW_CHUNK = 256


# --------------------------------------------------------------------------
# Focal mean / median over an odd square window, ignoring invalid cells.
# --------------------------------------------------------------------------


@njit(parallel=True, cache=True)
def _focal_numba(values, valid, half, median):
    h, w = values.shape
    out = np.zeros((h, w))
    ok = np.zeros((h, w), dtype=np.bool_)
    k = 2 * half + 1
    for r in prange(h):
        buf = np.empty(k * k)
        r0 = max(0, r - half)
        r1 = min(h, r + half + 1)
        for c in range(w):
            if not valid[r, c]:
                continue
            c0 = max(0, c - half)
            c1 = min(w, c + half + 1)
            n = 0
            s = 0.0
            for rr in range(r0, r1):
                for cc in range(c0, c1):
                    if valid[rr, cc]:
                        buf[n] = values[rr, cc]
                        s += values[rr, cc]
                        n += 1
            if n == 0:
                continue
            ok[r, c] = True
            if median:
                vals = np.sort(buf[:n])
                if n % 2 == 1:
                    out[r, c] = vals[n // 2]
                else:
                    out[r, c] = (vals[n // 2 - 1] + vals[n // 2]) / 2
            else:
                out[r, c] = s / n
    return out, ok


def _focal_mean_numpy(values, valid, half):
    h, w = values.shape
    vals = np.where(valid, values, 0.0)
    pv = np.pad(vals, half)
    pm = np.pad(valid, half)
    total = np.zeros((h, w))
    count = np.zeros((h, w), dtype=np.int64)
    # Same per-cell addition order as the loop kernel: window rows, then columns.
    for dy in range(2 * half + 1):
        for dx in range(2 * half + 1):
            total += pv[dy:dy + h, dx:dx + w]
            count += pm[dy:dy + h, dx:dx + w]
    ok = (count > 0) & valid
    out = np.zeros((h, w))
    out[ok] = total[ok] / count[ok]
    return out, ok


def _focal_median_numpy(values, valid, half):
    h, w = values.shape
    padded = np.pad(np.where(valid, values, np.nan), half, constant_values=np.nan)
    k = 2 * half + 1
    out = np.zeros((h, w))
    for r0 in range(0, h, _ROW_CHUNK):
        r1 = min(h, r0 + _ROW_CHUNK)
        view = sliding_window_view(padded[r0:r1 + 2 * half], (k, k))
        block = view.reshape(r1 - r0, w, k * k)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            out[r0:r1] = np.nanmedian(block, axis=2)
    ok = ~np.isnan(out) & valid
    out[~ok] = 0.0
    return out, ok


def focal_stat(values, valid, window, median):
    """Focal mean or median of ``values`` over a ``window`` x ``window`` box.

    Invalid neighbours are skipped and windows are truncated at the edges.
    Invalid cells stay invalid. Returns ``(out, ok)``; ``out`` is 0 where
    ``ok`` is False.
    """
    values = np.ascontiguousarray(values, dtype=np.float64)
    valid = np.ascontiguousarray(valid, dtype=np.bool_)
    half = window // 2
    if use_numba():
        return _focal_numba(values, valid, half, bool(median))
    if median:
        return _focal_median_numpy(values, valid, half)
    return _focal_mean_numpy(values, valid, half)


# --------------------------------------------------------------------------
# 8-connected component labels, numbered 1..n in raster order of first cell.
# --------------------------------------------------------------------------


@njit(cache=True)
def _label8_numba(fg):
    h, w = fg.shape
    labels = np.zeros((h, w), dtype=np.int64)
    stack = np.empty(h * w, dtype=np.int64)
    current = 0
    for r in range(h):
        for c in range(w):
            if not fg[r, c] or labels[r, c] != 0:
                continue
            current += 1
            labels[r, c] = current
            top = 0
            stack[top] = r * w + c
            top += 1
            while top > 0:
                top -= 1
                idx = stack[top]
                pr = idx // w
                pc = idx % w
                for dr in range(-1, 2):
                    rr = pr + dr
                    if rr < 0 or rr >= h:
                        continue
                    for dc in range(-1, 2):
                        cc = pc + dc
                        if cc < 0 or cc >= w:
                            continue
                        if fg[rr, cc] and labels[rr, cc] == 0:
                            labels[rr, cc] = current
                            stack[top] = rr * w + cc
                            top += 1
    return labels, current


def _label8_numpy(fg):
    h, w = fg.shape
    if not fg.any():
        return np.zeros((h, w), dtype=np.int64), 0
    # Vectorized union-find: hook the larger root onto the smaller across every
    # 8-neighbour edge, then compress paths, until edges agree. Each component
    # ends up rooted at its smallest flat index, i.e. its first raster cell.
    flat = np.arange(h * w, dtype=np.int64).reshape(h, w)
    us, vs = [], []
    for dy, dx in ((0, 1), (1, -1), (1, 0), (1, 1)):
        a = fg[: h - dy, max(0, -dx): w - max(0, dx)]
        b = fg[dy:, max(0, dx): w - max(0, -dx)]
        both = a & b
        us.append(flat[: h - dy, max(0, -dx): w - max(0, dx)][both])
        vs.append(flat[dy:, max(0, dx): w - max(0, -dx)][both])
    u = np.concatenate(us)
    v = np.concatenate(vs)
    parent = flat.ravel().copy()
    while True:
        ru, rv = parent[u], parent[v]
        differ = ru != rv
        if not differ.any():
            break
        ru, rv = ru[differ], rv[differ]
        np.minimum.at(parent, np.maximum(ru, rv), np.minimum(ru, rv))
        while True:
            nxt = parent[parent]
            if np.array_equal(nxt, parent):
                break
            parent = nxt
    roots = parent[fg.ravel()]
    uniq, inverse = np.unique(roots, return_inverse=True)
    labels = np.zeros(h * w, dtype=np.int64)
    labels[fg.ravel()] = inverse + 1
    return labels.reshape(h, w), len(uniq)


def label8(fg):
    """Label 8-connected True regions of ``fg``; returns ``(labels, count)``."""
    fg = np.ascontiguousarray(fg, dtype=np.bool_)
    if use_numba():
        labels, n = _label8_numba(fg)
        return labels, int(n)
    return _label8_numpy(fg)


# --------------------------------------------------------------------------
# Zero-mean normalized cross-correlation at every valid placement.
# --------------------------------------------------------------------------


@njit(parallel=True, cache=True)
def _ncc_numba(image, tz, tss):
    H, W = image.shape
    h, w = tz.shape
    n = h * w
    out = np.zeros((H - h + 1, W - w + 1))
    for v in prange(H - h + 1):
        for u in range(W - w + 1):
            s = 0.0
            lo = image[v, u]
            hi = lo
            for i in range(h):
                for j in range(w):
                    x = image[v + i, u + j]
                    s += x
                    if x < lo:
                        lo = x
                    if x > hi:
                        hi = x
            if lo == hi:
                continue
            m = s / n
            num = 0.0
            den = 0.0
            for i in range(h):
                for j in range(w):
                    d = image[v + i, u + j] - m
                    num += tz[i, j] * d
                    den += d * d
            score = num / np.sqrt(tss * den)
            if score > 1.0:
                score = 1.0
            elif score < -1.0:
                score = -1.0
            out[v, u] = score
    return out


def _ncc_numpy(image, tz, tss):
    H, W = image.shape
    h, w = tz.shape
    out = np.zeros((H - h + 1, W - w + 1))
    rows = max(1, (1 << 22) // max(1, (W - w + 1) * h * w))
    for v0 in range(0, H - h + 1, rows):
        v1 = min(H - h + 1, v0 + rows)
        win = sliding_window_view(image[v0:v1 + h - 1], (h, w))
        const = win.min(axis=(2, 3)) == win.max(axis=(2, 3))
        d = win - win.mean(axis=(2, 3), keepdims=True)
        num = np.einsum("abij,ij->ab", d, tz)
        den = np.einsum("abij,abij->ab", d, d)
        with np.errstate(divide="ignore", invalid="ignore"):
            score = num / np.sqrt(tss * den)
        score[const] = 0.0
        out[v0:v1] = np.clip(score, -1.0, 1.0)
    return out


def ncc_scores(image, template):
    """NCC score map of shape ``(H-h+1, W-w+1)``; constant windows score 0."""
    image = np.ascontiguousarray(image, dtype=np.float64)
    template = np.asarray(template, dtype=np.float64)
    tz = np.ascontiguousarray(template - template.mean())
    tss = float(np.sum(tz * tz))
    if use_numba():
        return _ncc_numba(image, tz, tss)
    return _ncc_numpy(image, tz, tss)


# --------------------------------------------------------------------------
# Flooded area (in CRS units^2) inside selected coarse cells.
# --------------------------------------------------------------------------


@njit(cache=True)
def _covered_numba(rows, cols, cgrid, flooded, fgrid):
    cox, coy, cdx, cdy = cgrid[0], cgrid[1], cgrid[2], cgrid[3]
    fox, foy, fdx, fdy = fgrid[0], fgrid[1], fgrid[2], fgrid[3]
    fh, fw = flooded.shape
    out = np.zeros(rows.shape[0])
    for k in range(rows.shape[0]):
        x0 = cox + cols[k] * cdx
        x1 = cox + (cols[k] + 1) * cdx
        y1 = coy - rows[k] * cdy
        y0 = coy - (rows[k] + 1) * cdy
        j0 = max(0, int(np.floor((x0 - fox) / fdx)) - 1)
        j1 = min(fw, int(np.ceil((x1 - fox) / fdx)) + 1)
        i0 = max(0, int(np.floor((foy - y1) / fdy)) - 1)
        i1 = min(fh, int(np.ceil((foy - y0) / fdy)) + 1)
        acc = 0.0
        for i in range(i0, i1):
            fy1 = foy - i * fdy
            fy0 = foy - (i + 1) * fdy
            oy = min(y1, fy1) - max(y0, fy0)
            if oy <= 0.0:
                continue
            for j in range(j0, j1):
                if not flooded[i, j]:
                    continue
                fx0 = fox + j * fdx
                fx1 = fox + (j + 1) * fdx
                ox = min(x1, fx1) - max(x0, fx0)
                if ox <= 0.0:
                    continue
                acc += ox * oy
        out[k] = acc
    return out


def _overlap_matrix(n_coarse, c_origin, c_step, n_fine, f_origin, f_step):
    # Sparse (n_coarse x n_fine) matrix of 1-D interval overlap lengths along an
    # axis where cell i spans [origin + i*step, origin + (i+1)*step].
    span = int(np.ceil(c_step / f_step)) + 3
    ci = np.arange(n_coarse)
    lo = c_origin + ci * c_step
    hi = c_origin + (ci + 1) * c_step
    start = np.maximum(0, np.floor((lo - f_origin) / f_step).astype(np.int64) - 1)
    js = start[:, None] + np.arange(span)[None, :]
    inside = js < n_fine
    js = np.minimum(js, n_fine - 1)
    flo = f_origin + js * f_step
    fhi = f_origin + (js + 1) * f_step
    ov = np.maximum(0.0, np.minimum(hi[:, None], fhi) - np.maximum(lo[:, None], flo))
    keep = inside & (ov > 0)
    rows = np.broadcast_to(ci[:, None], js.shape)[keep]
    return sparse.csr_matrix((ov[keep], (rows, js[keep])), shape=(n_coarse, n_fine))


def _covered_numpy(rows, cols, cgrid, flooded, fgrid, cshape):
    cox, coy, cdx, cdy = cgrid
    fox, foy, fdx, fdy = fgrid
    ch, cw = cshape
    fh, fw = flooded.shape
    ox = _overlap_matrix(cw, cox, cdx, fw, fox, fdx)
    # Rows run southward: measure along -y so both axes increase with index.
    oy = _overlap_matrix(ch, -coy, cdy, fh, -foy, fdy)
    area = oy @ sparse.csr_matrix(flooded.astype(np.float64)) @ ox.T
    return np.asarray(area[rows, cols]).ravel()


def covered_area(rows, cols, coarse_grid, flooded, fine_grid):
    """Area of FLOODED fine cells inside each listed coarse cell.

    ``coarse_grid`` / ``fine_grid`` are ``(origin_x, origin_y, dx, dy)`` and
    ``flooded`` is the fine boolean grid. Returns one area per ``(rows[k], cols[k])``.
    """
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    cols = np.ascontiguousarray(cols, dtype=np.int64)
    flooded = np.ascontiguousarray(flooded, dtype=np.bool_)
    cg = np.asarray(coarse_grid[:4], dtype=np.float64)
    fg = np.asarray(fine_grid[:4], dtype=np.float64)
    if len(rows) == 0:
        return np.zeros(0)
    if use_numba():
        return _covered_numba(rows, cols, cg, flooded, fg)
    cshape = (int(rows.max()) + 1, int(cols.max()) + 1)
    return _covered_numpy(rows, cols, tuple(cg), flooded, tuple(fg), cshape)
