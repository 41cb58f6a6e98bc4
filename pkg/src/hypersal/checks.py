"""Finite-difference gradient suite over every differentiable op and every
composite block (spectral attention stage, level fusion, cross-level block,
high-resolution fusion, losses). Runs in double precision; each target gets a
configurable number of random cases (default 20) at small shapes."""

import time
import zlib

import numpy as np

from . import autodiff as ad
from .attention import CrossLevelBlock
from .extractor import LevelFusion, SpectralAttentionStage
from .fusion import HighResFusion
from .gradcheck import check_gradients, rand_tensor
from .losses import bce_loss, gaussian_taps, iou_loss, ssim_loss, total_loss


def _to_double(block):
    for _, t in block.parameters("p"):
        t.data = t.data.astype(np.float64)
    return block


def _params(block):
    return [t for _, t in block.parameters("p")]


def _random_labels(rng, shape, ignore_frac=0.1):
    labels = (rng.random(shape) < 0.5).astype(np.int8)
    labels[rng.random(shape) < ignore_frac] = -1
    if not (labels == 1).any():
        labels[0, 0] = 1
    if not (labels == 0).any():
        labels[-1, -1] = 0
    return labels


def _mask(labels):
    return (labels >= 0).astype(np.float64)


def _loss_pred(rng, shape):
    # stay away from the BCE clamp edges; log curvature near 0/1 would
    # dominate the finite-difference truncation error
    return ad.Tensor(rng.uniform(0.12, 0.88, size=shape), requires_grad=True)


def op_cases(rng):
    """(name, builder) pairs; builder(rng) -> (func, tensors)."""

    def elementwise(op):
        def build(rng):
            a = rand_tensor(rng, (3, 4, 2))
            b = rand_tensor(rng, (3, 4, 2))
            return lambda x, y: ad.tsum(ad.mul(op(x, y), op(x, y))), [a, b]
        return build

    def build_broadcast_mul(rng):
        vec = rand_tensor(rng, (1, 1, 3))
        m = rand_tensor(rng, (4, 4, 3))
        return lambda v, x: ad.tsum(ad.mul(v, x)), [vec, m]

    def build_div(rng):
        a = rand_tensor(rng, (3, 3))
        b = rand_tensor(rng, (3, 3), lo=0.5, hi=2.0)
        return lambda x, y: ad.tsum(ad.div(x, y)), [a, b]

    def build_relu(rng):
        x = rand_tensor(rng, (4, 5), keep_away=0.05)
        return lambda t: ad.tsum(ad.mul(ad.relu(t), ad.relu(t))), [x]

    def build_sigmoid(rng):
        x = rand_tensor(rng, (4, 5), lo=-3, hi=3)
        return lambda t: ad.tsum(ad.sigmoid(t)), [x]

    def build_exp(rng):
        x = rand_tensor(rng, (3, 4))
        return lambda t: ad.tsum(ad.exp(t)), [x]

    def build_log(rng):
        x = rand_tensor(rng, (3, 4), lo=0.2, hi=3.0)
        return lambda t: ad.tsum(ad.log(t)), [x]

    def build_sqrt(rng):
        x = rand_tensor(rng, (3, 4), lo=0.3, hi=4.0)
        return lambda t: ad.tsum(ad.sqrt(t)), [x]

    def build_clamp(rng):
        x = rand_tensor(rng, (4, 4), lo=-1.0, hi=2.0)
        x.data[np.abs(x.data - 0.2) < 0.02] += 0.05
        x.data[np.abs(x.data - 0.8) < 0.02] += 0.05
        return lambda t: ad.tsum(ad.mul(ad.clamp(t, 0.2, 0.8), ad.clamp(t, 0.2, 0.8))), [x]

    def build_sum_axis(rng):
        x = rand_tensor(rng, (3, 4, 5))
        return lambda t: ad.tsum(ad.mul(ad.sum_axis(t, -1), ad.sum_axis(t, -1))), [x]

    def build_softmax(rng):
        x = rand_tensor(rng, (3, 4), lo=-2, hi=2)
        w = rand_tensor(rng, (3, 4), requires_grad=False)
        return lambda t: ad.tsum(ad.mul(ad.softmax(t), w)), [x]

    def build_concat(rng):
        a = rand_tensor(rng, (3, 3, 2))
        b = rand_tensor(rng, (3, 3, 1))
        return lambda x, y: ad.tsum(ad.mul(ad.concat([x, y]), ad.concat([x, y]))), [a, b]

    def build_reshape(rng):
        x = rand_tensor(rng, (3, 4))
        return lambda t: ad.tsum(ad.mul(ad.reshape(t, (2, 6)), ad.reshape(t, (2, 6)))), [x]

    def conv_case(kernel, stride):
        def build(rng):
            cin = int(rng.integers(1, 4))
            cout = int(rng.integers(1, 4))
            side = int(rng.integers(4, 7))
            x = rand_tensor(rng, (side, side, cin))
            w = rand_tensor(rng, (kernel, kernel, cin, cout))
            b = rand_tensor(rng, (cout,))
            return (lambda xx, ww, bb:
                    ad.tsum(ad.mul(ad.conv2d(xx, ww, bb, stride),
                                   ad.conv2d(xx, ww, bb, stride))), [x, w, b])
        return build

    def bilinear_case(up):
        def build(rng):
            h = int(rng.integers(3, 6))
            w = int(rng.integers(3, 6))
            c = int(rng.integers(1, 3))
            oh, ow = (h * 2, w * 2 - 1) if up else (max(2, h // 2), max(2, w // 2))
            x = rand_tensor(rng, (h, w, c))
            return (lambda t: ad.tsum(ad.mul(ad.bilinear_resize(t, oh, ow),
                                             ad.bilinear_resize(t, oh, ow))), [x])
        return build

    def build_gap(rng):
        x = rand_tensor(rng, (5, 4, 3))
        w = rand_tensor(rng, (1, 1, 3), requires_grad=False)
        return lambda t: ad.tsum(ad.mul(ad.global_avg_pool(t), w)), [x]

    def build_smooth(rng):
        x = rand_tensor(rng, (6, 6, 2))
        taps = gaussian_taps(5, 1.0)
        return (lambda t: ad.tsum(ad.mul(ad.smooth2d(t, taps), ad.smooth2d(t, taps))), [x])

    def build_pairwise(rng):
        a = rand_tensor(rng, (6,))
        b = rand_tensor(rng, (6,))
        b.data += 0.5  # keep the distance bounded away from the sqrt kink
        return lambda x, y: ad.pairwise_euclidean(x, y), [a, b]

    return [
        ("add", elementwise(ad.add)),
        ("mul", elementwise(ad.mul)),
        ("div", build_div),
        ("broadcast_mul", build_broadcast_mul),
        ("relu", build_relu),
        ("sigmoid", build_sigmoid),
        ("exp", build_exp),
        ("log", build_log),
        ("sqrt", build_sqrt),
        ("clamp", build_clamp),
        ("sum_axis", build_sum_axis),
        ("softmax", build_softmax),
        ("concat", build_concat),
        ("reshape", build_reshape),
        ("conv2d_3x3_s1", conv_case(3, 1)),
        ("conv2d_3x3_s2", conv_case(3, 2)),
        ("conv2d_1x1_s1", conv_case(1, 1)),
        ("conv2d_1x1_s2", conv_case(1, 2)),
        ("bilinear_up", bilinear_case(True)),
        ("bilinear_down", bilinear_case(False)),
        ("global_avg_pool", build_gap),
        ("smooth2d", build_smooth),
        ("pairwise_euclidean", build_pairwise),
    ]


def block_cases(rng):
    """Composite blocks: gradients flow to both data and weights."""

    def build_spectral_stage(rng):
        block = _to_double(SpectralAttentionStage(2, 3, rng))
        x = rand_tensor(rng, (4, 4, 2), lo=0.1, hi=1.0)
        tensors = [x] + _params(block)
        return lambda *ts: ad.tsum(ad.mul(block(ts[0])[0], block(ts[0])[0])), tensors

    def build_level_fusion(rng):
        block = _to_double(LevelFusion(3, rng))
        spat = rand_tensor(rng, (4, 4, 3))
        spec = rand_tensor(rng, (4, 4, 3))
        tensors = [spat, spec] + _params(block)
        return (lambda *ts: ad.tsum(ad.mul(block(ts[0], ts[1]), block(ts[0], ts[1]))),
                tensors)

    def build_cross_level(rng):
        plan = (2, 2, 2, 2, 2)
        block = _to_double(CrossLevelBlock(plan, 2, 2, rng))
        pyramid = [rand_tensor(rng, (8 >> i, 8 >> i, 2)) if 8 >> i > 0
                   else rand_tensor(rng, (1, 1, 2)) for i in range(5)]
        tensors = list(pyramid) + _params(block)
        return lambda *ts: ad.tsum(block(list(ts[:5])).saliency), tensors

    def build_fusion(rng):
        block = _to_double(HighResFusion((3, 2, 1), rng))
        maps = [rand_tensor(rng, (4, 4, 1)), rand_tensor(rng, (2, 2, 1)),
                rand_tensor(rng, (1, 1, 1))]
        tensors = list(maps) + _params(block)
        return lambda *ts: ad.tsum(block(list(ts[:3]), 8)), tensors

    def loss_case(fn):
        def build(rng):
            labels = _random_labels(rng, (5, 5))
            mask = _mask(labels)
            pred = _loss_pred(rng, (5, 5, 1))
            return lambda p: fn(p, labels, mask), [pred]
        return build

    def build_total(rng):
        labels = _random_labels(rng, (5, 5))
        mask = _mask(labels)
        deep = _loss_pred(rng, (5, 5, 1))
        final = _loss_pred(rng, (5, 5, 1))
        return (lambda d, f: total_loss(d, f, labels, mask, use_ssim=True)[0],
                [deep, final])

    return [
        ("spectral_attention_stage", build_spectral_stage),
        ("level_fusion", build_level_fusion),
        ("cross_level_block", build_cross_level),
        ("highres_fusion", build_fusion),
        ("bce_loss", loss_case(bce_loss)),
        ("iou_loss", loss_case(iou_loss)),
        ("ssim_loss", loss_case(ssim_loss)),
        ("total_loss", build_total),
    ]


KINK_MARGIN = 3e-3  # reject sample points whose relu/clamp/sqrt inputs sit
                    # closer than this to a kink: the FD step must stay on one
                    # smooth piece for central differences to be meaningful


def _build_smooth_case(builder, seed, tries=60):
    """Redraw a random case until no kink lies within the FD step's reach."""
    for attempt in range(tries):
        rng = np.random.default_rng(seed + attempt * 7919)
        func, tensors = builder(rng)
        with ad.track_kinks() as tracker:
            func(*tensors)
        if tracker.min_distance > KINK_MARGIN:
            return func, tensors
    raise RuntimeError(f"no kink-free sample point found in {tries} draws")


def run_gradient_suite(cases=20, tol=1e-4, log=None, seed=0):
    """Run every target; returns the list of failures (empty when green)."""
    failures = []
    master = np.random.default_rng(seed)
    start = time.perf_counter()
    targets = op_cases(master) + block_cases(master)
    for name, builder in targets:
        worst = 0.0
        t0 = time.perf_counter()
        try:
            for case in range(cases):
                case_seed = seed * 100003 + zlib.crc32(name.encode()) % 65536 + case * 1009
                func, tensors = _build_smooth_case(builder, case_seed)
                worst = max(worst, check_gradients(func, tensors, tol=tol))
        except (AssertionError, RuntimeError) as err:
            failures.append((name, str(err)))
            if log is not None:
                log(f"FAIL {name}: {err}")
            continue
        if log is not None:
            log(f"ok   {name:28s} {cases} cases  worst rel err {worst:.2e}  "
                f"({time.perf_counter() - t0:.2f}s)")
    if log is not None:
        log(f"total {time.perf_counter() - start:.1f}s, "
            f"{len(failures)} failure(s)")
    return failures
