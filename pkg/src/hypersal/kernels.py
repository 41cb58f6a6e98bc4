"""Hot numeric kernels: 2-D convolution, bilinear resampling, global pooling.

Two interchangeable backends live here. The default is numba ``@njit`` loops;
setting ``HYPERSAL_BACKEND=numpy`` selects a pure-numpy path (used automatically
when numba is not importable). ``HYPERSAL_BACKEND=numba`` makes a missing numba
a hard error.

Both backends accumulate in the same fixed order (kernel row, kernel col,
input channel), so for identical inputs they produce bit-identical forward
results, and both match a plain nested-loop reference written in that order.
"""

import os

import numpy as np

_ENV_KEY = "HYPERSAL_BACKEND"


def _resolve_backend():
    choice = os.environ.get(_ENV_KEY, "").strip().lower()
    if choice not in ("", "numba", "numpy"):
        raise ValueError(f"{_ENV_KEY} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numpy":
        return "numpy", None
    try:
        import numba
    except ImportError:
        if choice == "numba":
            raise
        return "numpy", None
    return "numba", numba


_BACKEND, _numba = _resolve_backend()


def active_backend():
    """Name of the backend the dispatching kernels run on."""
    return _BACKEND


def conv_output_side(size, kernel, stride):
    """Spatial output extent: same-padding for 3x3, none for 1x1 (= ceil(size/stride))."""
    pad = 1 if kernel == 3 else 0
    return (size + 2 * pad - kernel) // stride + 1


# ---------------------------------------------------------------------------
# pure-numpy backend
# ---------------------------------------------------------------------------

def _pad_hw(x, pad):
    if pad == 0:
        return x
    h, w, c = x.shape
    out = np.zeros((h + 2 * pad, w + 2 * pad, c), dtype=x.dtype)
    out[pad:pad + h, pad:pad + w] = x
    return out


def conv2d_forward_numpy(x, w, b, stride):
    h, wd, cin = x.shape
    k = w.shape[0]
    pad = 1 if k == 3 else 0
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = _pad_hw(x, pad)
    out = np.empty((ho, wo, w.shape[3]), dtype=x.dtype)
    out[:] = b
    for p in range(k):
        for q in range(k):
            patch = xp[p:p + stride * ho:stride, q:q + stride * wo:stride]
            for ci in range(cin):
                out += patch[:, :, ci, None] * w[p, q, ci]
    return out


def conv2d_backward_numpy(x, w, stride, gout):
    h, wd, cin = x.shape
    k = w.shape[0]
    pad = 1 if k == 3 else 0
    ho, wo = gout.shape[:2]
    xp = _pad_hw(x, pad)
    gxp = np.zeros_like(xp)
    gw = np.empty_like(w)
    gb = gout.sum(axis=(0, 1))
    for p in range(k):
        for q in range(k):
            rows = slice(p, p + stride * ho, stride)
            cols = slice(q, q + stride * wo, stride)
            patch = xp[rows, cols]
            gw[p, q] = np.tensordot(patch, gout, axes=([0, 1], [0, 1]))
            gxp[rows, cols] += gout @ w[p, q].T
    gx = gxp[pad:pad + h, pad:pad + wd] if pad else gxp
    return gx, gw, gb


def _bilinear_axis(in_size, out_size):
    """Half-pixel source coordinates: low index, high index, fraction."""
    src = (np.arange(out_size) + 0.5) * (in_size / out_size) - 0.5
    src = np.maximum(src, 0.0)
    i0 = src.astype(np.int64)
    i0 = np.minimum(i0, in_size - 1)
    i1 = np.minimum(i0 + 1, in_size - 1)
    return i0, i1, src - i0


def bilinear_forward_numpy(x, out_h, out_w):
    h, w, _ = x.shape
    y0, y1, dy = _bilinear_axis(h, out_h)
    x0, x1, dx = _bilinear_axis(w, out_w)
    dy = dy[:, None, None]
    dx = dx[None, :, None]
    a = x[y0][:, x0]
    b = x[y0][:, x1]
    c = x[y1][:, x0]
    d = x[y1][:, x1]
    top = (1.0 - dx) * a + dx * b
    bot = (1.0 - dx) * c + dx * d
    return ((1.0 - dy) * top + dy * bot).astype(x.dtype)


def bilinear_backward_numpy(gout, in_h, in_w):
    out_h, out_w, c = gout.shape
    y0, y1, dy = _bilinear_axis(in_h, out_h)
    x0, x1, dx = _bilinear_axis(in_w, out_w)
    dy = dy[:, None, None]
    dx = dx[None, :, None]
    gx = np.zeros((in_h, in_w, c), dtype=gout.dtype)
    yy0 = np.broadcast_to(y0[:, None], (out_h, out_w)).ravel()
    yy1 = np.broadcast_to(y1[:, None], (out_h, out_w)).ravel()
    xx0 = np.broadcast_to(x0[None, :], (out_h, out_w)).ravel()
    xx1 = np.broadcast_to(x1[None, :], (out_h, out_w)).ravel()
    def scatter(rows, cols, weighted):
        np.add.at(gx, (rows, cols), weighted.reshape(out_h * out_w, c).astype(gout.dtype))
    scatter(yy0, xx0, (1.0 - dy) * (1.0 - dx) * gout)
    scatter(yy0, xx1, (1.0 - dy) * dx * gout)
    scatter(yy1, xx0, dy * (1.0 - dx) * gout)
    scatter(yy1, xx1, dy * dx * gout)
    return gx


def gap_sum_numpy(x):
    h, w, c = x.shape
    flat = x.reshape(h * w, c)
    # add.accumulate is strictly sequential, matching a row-major scalar loop
    return np.add.accumulate(flat, axis=0)[-1].copy()


# ---------------------------------------------------------------------------
# numba backend
# ---------------------------------------------------------------------------

if _BACKEND == "numba":
    _njit = _numba.njit(cache=True)

    @_njit
    def _conv2d_forward_nb(x, w, b, stride, pad):
        h, wd, cin = x.shape
        k = w.shape[0]
        cout = w.shape[3]
        ho = (h + 2 * pad - k) // stride + 1
        wo = (wd + 2 * pad - k) // stride + 1
        out = np.empty((ho, wo, cout), dtype=x.dtype)
        for i in range(ho):
            for j in range(wo):
                acc = out[i, j]
                for co in range(cout):
                    acc[co] = b[co]
                for p in range(k):
                    hi = i * stride + p - pad
                    if hi < 0 or hi >= h:
                        continue
                    for q in range(k):
                        wi = j * stride + q - pad
                        if wi < 0 or wi >= wd:
                            continue
                        for ci in range(cin):
                            v = x[hi, wi, ci]
                            wv = w[p, q, ci]
                            for co in range(cout):
                                acc[co] += v * wv[co]
        return out

    @_njit
    def _conv2d_backward_nb(x, w, stride, pad, gout):
        h, wd, cin = x.shape
        k = w.shape[0]
        cout = w.shape[3]
        ho, wo = gout.shape[:2]
        gx = np.zeros((h, wd, cin), dtype=x.dtype)
        gw = np.zeros(w.shape, dtype=x.dtype)
        gb = np.zeros(cout, dtype=x.dtype)
        for i in range(ho):
            for j in range(wo):
                g = gout[i, j]
                for co in range(cout):
                    gb[co] += g[co]
                for p in range(k):
                    hi = i * stride + p - pad
                    if hi < 0 or hi >= h:
                        continue
                    for q in range(k):
                        wi = j * stride + q - pad
                        if wi < 0 or wi >= wd:
                            continue
                        for ci in range(cin):
                            xv = x[hi, wi, ci]
                            s = gx[hi, wi, ci]
                            wrow = w[p, q, ci]
                            grow = gw[p, q, ci]
                            for co in range(cout):
                                gv = g[co]
                                s += wrow[co] * gv
                                grow[co] += xv * gv
                            gx[hi, wi, ci] = s
        return gx, gw, gb

    @_njit
    def _bilinear_forward_nb(x, out_h, out_w):
        h, w, c = x.shape
        out = np.empty((out_h, out_w, c), dtype=x.dtype)
        sh = h / out_h
        sw = w / out_w
        for i in range(out_h):
            sy = (i + 0.5) * sh - 0.5
            if sy < 0.0:
                sy = 0.0
            y0 = int(sy)
            if y0 > h - 1:
                y0 = h - 1
            y1 = y0 + 1 if y0 < h - 1 else y0
            dy = sy - y0
            for j in range(out_w):
                sx = (j + 0.5) * sw - 0.5
                if sx < 0.0:
                    sx = 0.0
                x0 = int(sx)
                if x0 > w - 1:
                    x0 = w - 1
                x1 = x0 + 1 if x0 < w - 1 else x0
                dx = sx - x0
                for ch in range(c):
                    top = (1.0 - dx) * x[y0, x0, ch] + dx * x[y0, x1, ch]
                    bot = (1.0 - dx) * x[y1, x0, ch] + dx * x[y1, x1, ch]
                    out[i, j, ch] = (1.0 - dy) * top + dy * bot
        return out

    @_njit
    def _bilinear_backward_nb(gout, in_h, in_w):
        out_h, out_w, c = gout.shape
        gx = np.zeros((in_h, in_w, c), dtype=gout.dtype)
        sh = in_h / out_h
        sw = in_w / out_w
        for i in range(out_h):
            sy = (i + 0.5) * sh - 0.5
            if sy < 0.0:
                sy = 0.0
            y0 = int(sy)
            if y0 > in_h - 1:
                y0 = in_h - 1
            y1 = y0 + 1 if y0 < in_h - 1 else y0
            dy = sy - y0
            for j in range(out_w):
                sx = (j + 0.5) * sw - 0.5
                if sx < 0.0:
                    sx = 0.0
                x0 = int(sx)
                if x0 > in_w - 1:
                    x0 = in_w - 1
                x1 = x0 + 1 if x0 < in_w - 1 else x0
                dx = sx - x0
                for ch in range(c):
                    g = gout[i, j, ch]
                    gx[y0, x0, ch] += (1.0 - dy) * (1.0 - dx) * g
                    gx[y0, x1, ch] += (1.0 - dy) * dx * g
                    gx[y1, x0, ch] += dy * (1.0 - dx) * g
                    gx[y1, x1, ch] += dy * dx * g
        return gx

    @_njit
    def _gap_sum_nb(x):
        h, w, c = x.shape
        acc = np.zeros(c, dtype=x.dtype)
        for i in range(h):
            for j in range(w):
                for ch in range(c):
                    acc[ch] += x[i, j, ch]
        return acc

    def conv2d_forward_numba(x, w, b, stride):
        pad = 1 if w.shape[0] == 3 else 0
        return _conv2d_forward_nb(x, w, b, stride, pad)

    def conv2d_backward_numba(x, w, stride, gout):
        pad = 1 if w.shape[0] == 3 else 0
        return _conv2d_backward_nb(x, w, stride, pad, gout)

    def bilinear_forward_numba(x, out_h, out_w):
        return _bilinear_forward_nb(x, out_h, out_w)

    def bilinear_backward_numba(gout, in_h, in_w):
        return _bilinear_backward_nb(gout, in_h, in_w)

    def gap_sum_numba(x):
        return _gap_sum_nb(np.ascontiguousarray(x))

    conv2d_forward = conv2d_forward_numba
    conv2d_backward = conv2d_backward_numba
    bilinear_forward = bilinear_forward_numba
    bilinear_backward = bilinear_backward_numba
    gap_sum = gap_sum_numba
else:
    conv2d_forward = conv2d_forward_numpy
    conv2d_backward = conv2d_backward_numpy
    bilinear_forward = bilinear_forward_numpy
    bilinear_backward = bilinear_backward_numpy
    gap_sum = gap_sum_numpy


def backend_pairs():
    """(name, forward-ops dict) for every available backend; used by the bench."""
    pairs = [("numpy", {
        "conv2d_forward": conv2d_forward_numpy,
        "conv2d_backward": conv2d_backward_numpy,
        "bilinear_forward": bilinear_forward_numpy,
        "bilinear_backward": bilinear_backward_numpy,
        "gap_sum": gap_sum_numpy,
    })]
    if _BACKEND == "numba":
        pairs.append(("numba", {
            "conv2d_forward": conv2d_forward_numba,
            "conv2d_backward": conv2d_backward_numba,
            "bilinear_forward": bilinear_forward_numba,
            "bilinear_backward": bilinear_backward_numba,
            "gap_sum": gap_sum_numba,
        }))
    return pairs
