"""Hot numeric kernels with two interchangeable backends.

Every kernel here exists twice: a loop version compiled with numba's
``@njit`` and a vectorized pure-numpy version.  The public names
(``gaussian_map``, ``erode3x3``, ...) dispatch to the jitted build unless
numba is unavailable or the environment variable ``CLICKFORGE_NO_NUMBA``
is set to ``1``/``true``/``yes``.  Both backends compute the same result
(bit-exact for integer outputs, last-ulp for float accumulations) and are
schedule-independent, so swapping them never changes program behaviour.

``clickforge bench --mode kernels`` compares the two backends.
"""

import os

import numpy as np

_DISABLE = os.environ.get("CLICKFORGE_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

if not _DISABLE:
    try:
        from numba import njit, prange

        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a hard dep, but stay importable
        NUMBA_ENABLED = False
else:
    NUMBA_ENABLED = False

if not NUMBA_ENABLED:
    prange = range

    def njit(*args, **kwargs):
        def wrap(f):
            return f

        if args and callable(args[0]):
            return args[0]
        return wrap


# ---------------------------------------------------------------------------
# Gaussian click maps


def _gaussian_loops(height, width, rows, cols, sigma, use_max):
    out = np.zeros((height, width), dtype=np.float64)
    inv = 1.0 / (2.0 * sigma * sigma)
    for i in prange(height):
        for j in range(width):
            acc = 0.0
            for k in range(rows.shape[0]):
                dr = i - rows[k]
                dc = j - cols[k]
                v = np.exp(-(dr * dr + dc * dc) * inv)
                if use_max:
                    if v > acc:
                        acc = v
                else:
                    acc += v
            out[i, j] = acc
    return out


_gaussian_jit = njit(cache=True, parallel=True)(_gaussian_loops)


def gaussian_map_numpy(height, width, rows, cols, sigma, use_max):
    out = np.zeros((height, width), dtype=np.float64)
    if rows.shape[0] == 0:
        return out
    rr = np.arange(height, dtype=np.float64)[:, None]
    cc = np.arange(width, dtype=np.float64)[None, :]
    inv = 1.0 / (2.0 * sigma * sigma)
    for k in range(rows.shape[0]):
        v = np.exp(-((rr - rows[k]) ** 2 + (cc - cols[k]) ** 2) * inv)
        if use_max:
            np.maximum(out, v, out=out)
        else:
            out += v
    return out


# ---------------------------------------------------------------------------
# 3x3 binary erosion (out-of-image treated as background)


def _erode_loops(mask):
    h, w = mask.shape
    out = np.zeros((h, w), dtype=np.uint8)
    for i in prange(1, h - 1):
        for j in range(1, w - 1):
            keep = True
            for u in range(-1, 2):
                for v in range(-1, 2):
                    if mask[i + u, j + v] == 0:
                        keep = False
                        break
                if not keep:
                    break
            if keep:
                out[i, j] = 1
    return out


_erode_jit = njit(cache=True, parallel=True)(_erode_loops)


def erode3x3_numpy(mask):
    h, w = mask.shape
    padded = np.zeros((h + 2, w + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask != 0
    out = np.ones((h, w), dtype=bool)
    for u in range(3):
        for v in range(3):
            out &= padded[u : u + h, v : v + w]
    return out.astype(np.uint8)


# ---------------------------------------------------------------------------
# Nearest-center assignment (centers pre-sorted by instance id so that the
# first minimal distance wins ties, i.e. smallest id)


def _assign_loops(thing, offsets, crows, ccols, cids):
    h, w = thing.shape
    out = np.zeros((h, w), dtype=np.int32)
    n = crows.shape[0]
    for i in prange(h):
        for j in range(w):
            if thing[i, j] == 0:
                continue
            rr = i + offsets[i, j, 0]
            cc = j + offsets[i, j, 1]
            best = np.inf
            best_id = 0
            for k in range(n):
                dr = rr - crows[k]
                dc = cc - ccols[k]
                d = dr * dr + dc * dc
                if d < best:
                    best = d
                    best_id = cids[k]
            out[i, j] = best_id
    return out


_assign_jit = njit(cache=True, parallel=True)(_assign_loops)


def assign_nearest_numpy(thing, offsets, crows, ccols, cids):
    h, w = thing.shape
    out = np.zeros((h, w), dtype=np.int32)
    fg = thing != 0
    if not fg.any() or crows.shape[0] == 0:
        return out
    ii, jj = np.nonzero(fg)
    rr = ii + offsets[ii, jj, 0]
    cc = jj + offsets[ii, jj, 1]
    # (K, P) squared distances; argmin returns the first (smallest-id) center
    d = (rr[None, :] - crows[:, None]) ** 2 + (cc[None, :] - ccols[:, None]) ** 2
    out[ii, jj] = cids[np.argmin(d, axis=0)]
    return out


# ---------------------------------------------------------------------------
# Local peak detection: a pixel survives iff no window neighbour is larger
# and no earlier (scan-order) neighbour is equal.


def _peaks_loops(heatmap, threshold, window):
    h, w = heatmap.shape
    r = window // 2
    out = np.zeros((h, w), dtype=np.uint8)
    for i in prange(h):
        for j in range(w):
            v = heatmap[i, j]
            if v <= threshold:
                continue
            keep = True
            for u in range(-r, r + 1):
                ii = i + u
                if ii < 0 or ii >= h:
                    continue
                for s in range(-r, r + 1):
                    jj = j + s
                    if jj < 0 or jj >= w or (u == 0 and s == 0):
                        continue
                    q = heatmap[ii, jj]
                    if q > v or (q == v and (u < 0 or (u == 0 and s < 0))):
                        keep = False
                        break
                if not keep:
                    break
            if keep:
                out[i, j] = 1
    return out


_peaks_jit = njit(cache=True, parallel=True)(_peaks_loops)


def local_peaks_numpy(heatmap, threshold, window):
    h, w = heatmap.shape
    r = window // 2
    padded = np.full((h + 2 * r, w + 2 * r), -np.inf)
    padded[r : r + h, r : r + w] = heatmap
    ok = heatmap > threshold
    for u in range(-r, r + 1):
        for s in range(-r, r + 1):
            if u == 0 and s == 0:
                continue
            shifted = padded[r + u : r + u + h, r + s : r + s + w]
            bad = shifted > heatmap
            if u < 0 or (u == 0 and s < 0):
                bad |= shifted == heatmap
            ok &= ~bad
    return ok.astype(np.uint8)


# ---------------------------------------------------------------------------
# Same-padding 2-D convolution over channel-last rasters.  The jitted
# kernels take weights transposed to (cout, kh, kw, cin) so the innermost
# channel loop reads both operands contiguously.


def _conv2d_loops(x, w, b):
    h, ww, cin = x.shape
    kh, kw, _, cout = w.shape
    ph = kh // 2
    pw = kw // 2
    out = np.empty((h, ww, cout), dtype=np.float64)
    for i in prange(h):
        acc = np.empty(cout, dtype=np.float64)
        for j in range(ww):
            for o in range(cout):
                acc[o] = b[o]
            for u in range(kh):
                ii = i + u - ph
                if ii < 0 or ii >= h:
                    continue
                for v in range(kw):
                    jj = j + v - pw
                    if jj < 0 or jj >= ww:
                        continue
                    for c in range(cin):
                        xv = x[ii, jj, c]
                        for o in range(cout):
                            acc[o] += xv * w[u, v, c, o]
            for o in range(cout):
                out[i, j, o] = acc[o]
    return out


_conv2d_jit = njit(cache=True, parallel=True)(_conv2d_loops)


def conv2d_numba(x, w, b):
    return _conv2d_jit(x, w, b)


def _im2col(x, kh, kw):
    h, w, cin = x.shape
    ph, pw = kh // 2, kw // 2
    xp = np.pad(x, ((ph, ph), (pw, pw), (0, 0)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(0, 1))
    # (h, w, cin, kh, kw) -> rows flattened in (kh, kw, cin) order to match
    # the weight layout (kh, kw, cin, cout)
    return win.transpose(0, 1, 3, 4, 2).reshape(h * w, kh * kw * cin)


def conv2d_numpy(x, w, b):
    h, ww, _ = x.shape
    kh, kw, cin, cout = w.shape
    cols = _im2col(x, kh, kw)
    y = cols @ w.reshape(kh * kw * cin, cout) + b
    return y.reshape(h, ww, cout)


def _conv2d_wgrad_loops(x, g, kh, kw):
    h, w, cin = x.shape
    cout = g.shape[2]
    ph = kh // 2
    pw = kw // 2
    dw = np.empty((kh, kw, cin, cout), dtype=np.float64)
    for t in prange(kh * kw):
        u = t // kw
        v = t % kw
        buf = np.zeros((cin, cout), dtype=np.float64)
        for i in range(max(0, ph - u), min(h, h + ph - u)):
            ii = i + u - ph
            for j in range(max(0, pw - v), min(w, w + pw - v)):
                jj = j + v - pw
                for c in range(cin):
                    xv = x[ii, jj, c]
                    for o in range(cout):
                        buf[c, o] += xv * g[i, j, o]
        for c in range(cin):
            for o in range(cout):
                dw[u, v, c, o] = buf[c, o]
    return dw


_conv2d_wgrad_jit = njit(cache=True, parallel=True)(_conv2d_wgrad_loops)


def conv2d_wgrad_numba(x, g, kh, kw):
    return _conv2d_wgrad_jit(x, np.ascontiguousarray(g), kh, kw)


def conv2d_wgrad_numpy(x, g, kh, kw):
    h, w, cin = x.shape
    cout = g.shape[2]
    cols = _im2col(x, kh, kw)
    dw = cols.T @ g.reshape(h * w, cout)
    return dw.reshape(kh, kw, cin, cout)


# ---------------------------------------------------------------------------
# Dispatch

if NUMBA_ENABLED:
    gaussian_map = _gaussian_jit
    erode3x3 = _erode_jit
    assign_nearest = _assign_jit
    local_peaks = _peaks_jit
    conv2d = conv2d_numba
    conv2d_wgrad = conv2d_wgrad_numba
else:
    gaussian_map = gaussian_map_numpy
    erode3x3 = erode3x3_numpy
    assign_nearest = assign_nearest_numpy
    local_peaks = local_peaks_numpy
    conv2d = conv2d_numpy
    conv2d_wgrad = conv2d_wgrad_numpy

BACKEND = "numba" if NUMBA_ENABLED else "numpy"

DUAL_KERNELS = {
    "gaussian_map": (_gaussian_jit, gaussian_map_numpy),
    "erode3x3": (_erode_jit, erode3x3_numpy),
    "assign_nearest": (_assign_jit, assign_nearest_numpy),
    "local_peaks": (_peaks_jit, local_peaks_numpy),
    "conv2d": (conv2d_numba, conv2d_numpy),
    "conv2d_wgrad": (conv2d_wgrad_numba, conv2d_wgrad_numpy),
}
