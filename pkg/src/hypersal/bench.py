"""Benchmarks: kernel backends (numba vs numpy) head to head, and whole-model
inference timing / analytic FLOPs at the standard evaluation sides."""

import time

import numpy as np

from . import kernels
from .config import ModelConfig
from .network import SaliencyModel


def _time(fn, *args, repeats=5):
    fn(*args)  # warm-up (jit compile / cache touch)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def kernel_bench(side=128, c_in=16, c_out=16, repeats=5, rng=None):
    """Per-backend best-of-N timings for the three hot kernels."""
    rng = rng or np.random.default_rng(0)
    x = rng.random((side, side, c_in), dtype=np.float32)
    w = rng.standard_normal((3, 3, c_in, c_out)).astype(np.float32) * 0.1
    b = np.zeros(c_out, dtype=np.float32)
    gout = rng.random((side // 2, side // 2, c_out), dtype=np.float32)
    rows = []
    for name, ops in kernels.backend_pairs():
        rows.append({
            "backend": name,
            "conv2d_forward": _time(ops["conv2d_forward"], x, w, b, 2, repeats=repeats),
            "conv2d_backward": _time(ops["conv2d_backward"], x, w, 2, gout, repeats=repeats),
            "bilinear_forward": _time(ops["bilinear_forward"], x, side * 2, side * 2,
                                      repeats=repeats),
            "gap_sum": _time(ops["gap_sum"], x, repeats=repeats),
        })
    return rows


def model_bench(model_cfg=None, sides=(256, 512), repeats=3, rng=None):
    """Inference wall-clock, FPS and analytic FLOPs at each input side."""
    cfg = model_cfg or ModelConfig()
    model = SaliencyModel(cfg)
    rng = rng or np.random.default_rng(0)
    rows = []
    for side in sides:
        x = rng.random((side, side, cfg.bands), dtype=np.float32)
        seconds = _time(model.predict, x, repeats=repeats)
        rows.append({
            "side": side,
            "seconds": seconds,
            "fps": 1.0 / seconds,
            "flops_g": model.flops(side) / 1e9,
            "params_m": model.param_count() / 1e6,
        })
    return rows


def format_kernel_rows(rows):
    keys = ("conv2d_forward", "conv2d_backward", "bilinear_forward", "gap_sum")
    lines = ["backend  " + "  ".join(f"{k} (ms)".rjust(22) for k in keys)]
    for row in rows:
        lines.append(row["backend"].ljust(7) + "  "
                     + "  ".join(f"{row[k] * 1e3:22.3f}" for k in keys))
    if len(rows) == 2:
        speedup = {k: rows[0][k] / rows[1][k] for k in keys}
        lines.append("speedup  " + "  ".join(f"{speedup[k]:21.1f}x" for k in keys))
    return "\n".join(lines)


def format_model_rows(rows):
    lines = ["side   seconds      fps   flops(G)  params(M)"]
    for r in rows:
        lines.append(f"{r['side']:4d}  {r['seconds']:8.4f}  {r['fps']:7.2f}  "
                     f"{r['flops_g']:9.2f}  {r['params_m']:9.3f}")
    return "\n".join(lines)
