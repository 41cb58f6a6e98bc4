"""Central finite-difference gradient checking for ops and composite blocks.

Checks run in double precision with step 1e-3 and compare the analytic
gradient elementwise against (f(x+h) - f(x-h)) / 2h, requiring
|analytic - numeric| <= tol * max(1, |numeric|).
"""

import numpy as np

from .autodiff import Tensor, backward


def finite_difference(func, tensors, index, step=1e-3):
    """Numeric gradient of scalar-valued func w.r.t. tensors[index]."""
    target = tensors[index]
    numeric = np.zeros_like(target.data)
    flat = target.data.ravel()
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + step
        hi = float(func(*tensors).data)
        flat[i] = orig - step
        lo = float(func(*tensors).data)
        flat[i] = orig
        numeric.ravel()[i] = (hi - lo) / (2.0 * step)
    return numeric


def check_gradients(func, tensors, step=1e-3, tol=1e-4):
    """Compare analytic vs numeric gradients for every requires_grad input.

    Returns the worst relative error across all checked tensors; raises
    AssertionError with coordinates on failure.
    """
    for t in tensors:
        t.zero_grad()
    out = func(*tensors)
    backward(out)
    worst = 0.0
    for idx, t in enumerate(tensors):
        if not t.requires_grad:
            continue
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        numeric = finite_difference(func, tensors, idx, step)
        denom = np.maximum(1.0, np.abs(numeric))
        err = np.abs(analytic - numeric) / denom
        worst = max(worst, float(err.max()) if err.size else 0.0)
        if err.size and err.max() > tol:
            at = np.unravel_index(int(err.argmax()), err.shape)
            raise AssertionError(
                f"gradient mismatch on input {idx} at {at}: "
                f"analytic={analytic[at]:.6e} numeric={numeric[at]:.6e} "
                f"rel={float(err.max()):.3e} > {tol:.0e}")
    return worst


def rand_tensor(rng, shape, requires_grad=True, lo=-1.0, hi=1.0, keep_away=0.0):
    """Uniform random float64 tensor; keep_away pushes values off 0 (for kinks)."""
    data = rng.uniform(lo, hi, size=shape)
    if keep_away > 0.0:
        data = np.where(np.abs(data) < keep_away, np.sign(data) * keep_away + data, data)
    return Tensor(data.astype(np.float64), requires_grad=requires_grad)
