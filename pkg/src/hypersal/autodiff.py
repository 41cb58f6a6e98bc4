"""Minimal reverse-mode tensor engine over numpy, with just the operations the
saliency network needs: elementwise arithmetic, activations, reductions,
softmax, channel concatenation, 2-D convolution, bilinear resampling, global
average pooling and a fixed-window smoothing filter.

Tensors wrap dense float32/float64 numpy arrays of up to 4 axes. Each op
records its parents and a backward closure; ``Tensor.backward()`` walks the
graph in reverse topological order. Gradient accumulation is ordered and
single-threaded, so repeated runs are bit-identical.
"""

import contextlib

import numpy as np

from . import kernels


class ShapeError(ValueError):
    """Operand shapes are incompatible for the requested op."""


class GraphError(RuntimeError):
    """The autodiff graph was used incorrectly (e.g. backward on a non-scalar)."""


class NonFiniteError(FloatingPointError):
    """An op produced NaN/Inf while debug checks were enabled."""


_grad_enabled = True
_debug_checks = False


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference mode)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def set_debug_checks(on):
    """When on, every op output is checked for NaN/Inf (slow; tests only)."""
    global _debug_checks
    _debug_checks = bool(on)


class KinkTracker:
    """Records how close any relu/clamp/sqrt input came to its kink; the
    finite-difference suite rejects sample points that sit too close for the
    step size to stay on one smooth piece."""

    def __init__(self):
        self.min_distance = float("inf")

    def note(self, distance):
        if distance < self.min_distance:
            self.min_distance = float(distance)


_kink_tracker = None


@contextlib.contextmanager
def track_kinks():
    global _kink_tracker
    prev = _kink_tracker
    tracker = KinkTracker()
    _kink_tracker = tracker
    try:
        yield tracker
    finally:
        _kink_tracker = prev


def _check_finite(data):
    if _debug_checks and not np.all(np.isfinite(data)):
        raise NonFiniteError("op produced non-finite values")


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad=False):
        arr = np.asarray(data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if arr.ndim > 4:
            raise ShapeError(f"tensors are limited to 4 axes, got shape {arr.shape}")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward_fn = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    @property
    def size(self):
        return self.data.size

    def item(self):
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    def backward(self):
        backward(self)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.dtype.name}, grad={self.requires_grad})"

    # operator sugar; full semantics live in the module-level functions
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __rsub__(self, other):
        return add(mul(self, -1.0), other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        return div(self, other)


def _wrap(value, like=None):
    if isinstance(value, Tensor):
        return value
    dtype = like.dtype if like is not None else np.float32
    return Tensor(np.asarray(value, dtype=dtype))


def _make(data, parents, backward_fn):
    _check_finite(data)
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward_fn = backward_fn
    return out


def _accum(t, g):
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g, shape):
    """Reduce gradient g of a broadcast result back to an operand shape."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, (gs, ss) in enumerate(zip(g.shape, shape)):
        if ss == 1 and gs != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def backward(out):
    """Backpropagate from a scalar output to every requires_grad tensor."""
    if out.size != 1:
        raise GraphError(f"backward requires a scalar output, got shape {out.shape}")
    topo = []
    visited = set()
    stack = [(out, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    out.grad = np.ones_like(out.data)
    for node in reversed(topo):
        if node._backward_fn is not None:
            node._backward_fn()


# ---------------------------------------------------------------------------
# elementwise / broadcast
# ---------------------------------------------------------------------------

def _broadcast_ok(a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"shapes {a.shape} and {b.shape} do not broadcast") from None


def add(a, b):
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _broadcast_ok(a, b)
    out_data = a.data + b.data

    def bw():
        _accum(a, _unbroadcast(out.grad, a.shape))
        _accum(b, _unbroadcast(out.grad, b.shape))

    out = _make(out_data, (a, b), bw)
    return out


def mul(a, b):
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _broadcast_ok(a, b)
    out_data = a.data * b.data

    def bw():
        _accum(a, _unbroadcast(out.grad * b.data, a.shape))
        _accum(b, _unbroadcast(out.grad * a.data, b.shape))

    out = _make(out_data, (a, b), bw)
    return out


def div(a, b):
    a = _wrap(a, b if isinstance(b, Tensor) else None)
    b = _wrap(b, a)
    _broadcast_ok(a, b)
    out_data = a.data / b.data

    def bw():
        _accum(a, _unbroadcast(out.grad / b.data, a.shape))
        _accum(b, _unbroadcast(-out.grad * a.data / (b.data * b.data), b.shape))

    out = _make(out_data, (a, b), bw)
    return out


def relu(x):
    out_data = np.maximum(x.data, 0)
    if _kink_tracker is not None and x.size:
        _kink_tracker.note(np.abs(x.data).min())

    def bw():
        _accum(x, (x.data > 0) * out.grad)

    out = _make(out_data, (x,), bw)
    return out


def sigmoid(x):
    d = x.data
    out_data = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                        np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d)))).astype(d.dtype)

    def bw():
        _accum(x, out.data * (1.0 - out.data) * out.grad)

    out = _make(out_data, (x,), bw)
    return out


def exp(x):
    out_data = np.exp(x.data)

    def bw():
        _accum(x, out.data * out.grad)

    out = _make(out_data, (x,), bw)
    return out


def log(x):
    out_data = np.log(x.data)

    def bw():
        _accum(x, out.grad / x.data)

    out = _make(out_data, (x,), bw)
    return out


def sqrt(x, grad_floor=1e-12):
    """Square root with a guarded backward (denominator floored away from 0)."""
    root = np.sqrt(x.data)
    if _kink_tracker is not None and x.size:
        _kink_tracker.note(np.abs(x.data).min() / 16.0)  # curvature blows up near 0

    def bw():
        denom = 2.0 * np.maximum(root, grad_floor)
        _accum(x, out.grad / denom)

    out = _make(root, (x,), bw)
    return out


def clamp(x, lo, hi):
    out_data = np.clip(x.data, lo, hi)
    if _kink_tracker is not None and x.size:
        _kink_tracker.note(min(np.abs(x.data - lo).min(), np.abs(x.data - hi).min()))

    def bw():
        inside = (x.data >= lo) & (x.data <= hi)
        _accum(x, inside * out.grad)

    out = _make(out_data, (x,), bw)
    return out


# ---------------------------------------------------------------------------
# reductions / shape
# ---------------------------------------------------------------------------

def tsum(x):
    out_data = np.asarray(x.data.sum(), dtype=x.dtype)

    def bw():
        _accum(x, np.broadcast_to(out.grad, x.shape).astype(x.dtype))

    out = _make(out_data, (x,), bw)
    return out


def sum_axis(x, axis=-1, keepdims=True):
    out_data = x.data.sum(axis=axis, keepdims=keepdims)

    def bw():
        g = out.grad
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accum(x, np.broadcast_to(g, x.shape).astype(x.dtype))

    out = _make(out_data, (x,), bw)
    return out


def mean(x):
    n = x.size
    return mul(tsum(x), 1.0 / n)


def reshape(x, shape):
    out_data = x.data.reshape(shape)

    def bw():
        _accum(x, out.grad.reshape(x.shape))

    out = _make(out_data, (x,), bw)
    return out


def concat(tensors, axis=-1):
    if not tensors:
        raise ShapeError("concat needs at least one tensor")
    out_data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]

    def bw():
        offset = 0
        for t, size in zip(tensors, sizes):
            index = [slice(None)] * out.grad.ndim
            index[axis if axis >= 0 else out.grad.ndim + axis] = slice(offset, offset + size)
            _accum(t, out.grad[tuple(index)])
            offset += size

    out = _make(out_data, tuple(tensors), bw)
    return out


def softmax(x, axis=-1):
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=axis, keepdims=True)

    def bw():
        g = out.grad
        s = out.data
        inner = (g * s).sum(axis=axis, keepdims=True)
        _accum(x, s * (g - inner))

    out = _make(out_data, (x,), bw)
    return out


# ---------------------------------------------------------------------------
# spatial ops (numba/numpy kernels)
# ---------------------------------------------------------------------------

def conv2d(x, weight, bias, stride=1):
    """Cross-correlation over an HxWxC map; 3x3 uses zero same-padding, 1x1 none.

    ``weight`` has shape (k, k, c_in, c_out); output extent is ceil(in/stride).
    """
    if x.ndim != 3:
        raise ShapeError(f"conv2d input must be HxWxC, got shape {x.shape}")
    if weight.ndim != 4 or weight.shape[0] != weight.shape[1]:
        raise ShapeError(f"conv2d weight must be (k,k,c_in,c_out), got {weight.shape}")
    k = weight.shape[0]
    if k not in (1, 3):
        raise ShapeError(f"conv2d kernel must be 1 or 3, got {k}")
    if stride not in (1, 2):
        raise ShapeError(f"conv2d stride must be 1 or 2, got {stride}")
    if weight.shape[2] != x.shape[2]:
        raise ShapeError(
            f"channel axis mismatch: input has {x.shape[2]} channels "
            f"(shape {x.shape}), weight expects {weight.shape[2]} (shape {weight.shape})")
    if bias.shape != (weight.shape[3],):
        raise ShapeError(
            f"bias axis mismatch: got shape {bias.shape}, "
            f"weight produces {weight.shape[3]} channels")
    if x.dtype != weight.dtype or x.dtype != bias.dtype:
        raise ShapeError("conv2d operands must share one dtype")

    out_data = kernels.conv2d_forward(x.data, weight.data, bias.data, stride)

    def bw():
        gx, gw, gb = kernels.conv2d_backward(x.data, weight.data, stride, out.grad)
        _accum(x, gx)
        _accum(weight, gw)
        _accum(bias, gb)

    out = _make(out_data, (x, weight, bias), bw)
    return out


def bilinear_resize(x, out_h, out_w):
    """Bilinear resampling with half-pixel centers (no corner alignment)."""
    if x.ndim != 3:
        raise ShapeError(f"bilinear_resize input must be HxWxC, got shape {x.shape}")
    if out_h < 1 or out_w < 1:
        raise ShapeError(f"target extent must be positive, got {out_h}x{out_w}")
    in_h, in_w = x.shape[:2]
    if (out_h, out_w) == (in_h, in_w):
        out_data = x.data.copy()

        def bw():
            _accum(x, out.grad)
    else:
        out_data = kernels.bilinear_forward(x.data, out_h, out_w)

        def bw():
            _accum(x, kernels.bilinear_backward(out.grad, in_h, in_w))

    out = _make(out_data, (x,), bw)
    return out


def global_avg_pool(x):
    """Per-channel arithmetic mean over the spatial axes: HxWxC -> 1x1xC."""
    if x.ndim != 3:
        raise ShapeError(f"global_avg_pool input must be HxWxC, got shape {x.shape}")
    h, w, c = x.shape
    total = kernels.gap_sum(x.data)
    out_data = (total / x.dtype.type(h * w)).reshape(1, 1, c)

    def bw():
        g = out.grad.reshape(c) / x.dtype.type(h * w)
        _accum(x, np.broadcast_to(g, x.shape).astype(x.dtype))

    out = _make(out_data, (x,), bw)
    return out


def _correlate_axis(data, taps, axis):
    """1-D correlation along an axis, zero same-padding, fixed tap order."""
    k = len(taps)
    pad = k // 2
    pad_width = [(0, 0)] * data.ndim
    pad_width[axis] = (pad, pad)
    padded = np.pad(data, pad_width)
    out = np.zeros_like(data)
    view = [slice(None)] * data.ndim
    n = data.shape[axis]
    for t in range(k):
        view[axis] = slice(t, t + n)
        out += taps[t] * padded[tuple(view)]
    return out


def smooth2d(x, taps):
    """Separable fixed-kernel smoothing (symmetric taps), zero same-padding.

    The kernel is a constant, not a learned tensor; because it is symmetric the
    adjoint is the same filter, applied to the incoming gradient.
    """
    if x.ndim != 3:
        raise ShapeError(f"smooth2d input must be HxWxC, got shape {x.shape}")
    taps = np.asarray(taps, dtype=x.dtype)
    if taps.ndim != 1 or len(taps) % 2 == 0:
        raise ShapeError("smooth2d taps must be a 1-D odd-length kernel")
    if not np.allclose(taps, taps[::-1]):
        raise ShapeError("smooth2d taps must be symmetric")
    out_data = _correlate_axis(_correlate_axis(x.data, taps, 0), taps, 1)

    def bw():
        _accum(x, _correlate_axis(_correlate_axis(out.grad, taps, 0), taps, 1))

    out = _make(out_data, (x,), bw)
    return out


# ---------------------------------------------------------------------------
# composed helpers
# ---------------------------------------------------------------------------

def pairwise_euclidean(a, b):
    """L2 norm of the difference of two equal-length vectors, as a scalar tensor."""
    if a.shape != b.shape or a.ndim != 1:
        raise ShapeError(f"pairwise_euclidean needs equal-length vectors, got {a.shape} vs {b.shape}")
    d = a - b
    return sqrt(tsum(mul(d, d)))


def channel_distance(a, b):
    """Per-pixel L2 distance across the channel axis: two HxWxC -> HxWx1."""
    if a.shape != b.shape:
        raise ShapeError(f"channel_distance needs matching shapes, got {a.shape} vs {b.shape}")
    d = a - b
    return sqrt(sum_axis(mul(d, d), axis=-1, keepdims=True))


def channel_dot(a, b):
    """Per-pixel dot product across the channel axis: two HxWxC -> HxWx1."""
    if a.shape != b.shape:
        raise ShapeError(f"channel_dot needs matching shapes, got {a.shape} vs {b.shape}")
    return sum_axis(mul(a, b), axis=-1, keepdims=True)
