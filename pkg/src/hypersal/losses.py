"""Training losses: masked binary cross-entropy, soft IoU, windowed SSIM, and
their combination over the two supervision heads.

Every loss takes a prediction tensor in [0,1], an integer label plane with
-1/0/1, and the 0/1 validity mask; ignore pixels contribute exactly zero, so
perturbing a prediction there cannot change any loss value.
"""

import warnings

import numpy as np

from . import autodiff as ad

BCE_EPS = 1e-7
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2


class EmptyMaskError(ValueError):
    """Every pixel is marked ignore; the loss is undefined."""


def _as_mask_tensors(gt, mask, dtype):
    gt01 = np.clip(np.asarray(gt, dtype=dtype), 0.0, 1.0)   # -1 -> 0; masked anyway
    mask = np.asarray(mask, dtype=dtype)
    count = float(mask.sum())
    if count == 0:
        raise EmptyMaskError("all pixels are ignore-labelled")
    return ad.Tensor(gt01[..., None] if gt01.ndim == 2 else gt01), \
        ad.Tensor(mask[..., None] if mask.ndim == 2 else mask), count


def bce_loss(pred, gt, mask):
    """Masked mean of -[g log x + (1-g) log(1-x)], x clamped to [eps, 1-eps]."""
    g, m, count = _as_mask_tensors(gt, mask, pred.dtype.type)
    x = ad.clamp(pred, BCE_EPS, 1.0 - BCE_EPS)
    per_pixel = -(g * ad.log(x) + (1.0 - g) * ad.log(1.0 - x))
    return ad.tsum(per_pixel * m) * (1.0 / count)


def iou_loss(pred, gt, mask):
    """1 - sum(x*g) / sum(x + g - x*g) over valid pixels."""
    g, m, _ = _as_mask_tensors(gt, mask, pred.dtype.type)
    inter = ad.tsum(pred * g * m)
    union = ad.tsum((pred + g - pred * g) * m)
    if float(union.data) == 0.0:
        warnings.warn("IoU loss degenerate: prediction and labels are all zero "
                      "on valid pixels; defining the loss as 0")
        return ad.Tensor(np.zeros((), dtype=pred.dtype))
    return 1.0 - inter / union


def gaussian_taps(window=SSIM_WINDOW, sigma=SSIM_SIGMA):
    half = window // 2
    xs = np.arange(-half, half + 1, dtype=np.float64)
    taps = np.exp(-(xs ** 2) / (2.0 * sigma ** 2))
    return taps / taps.sum()


def ssim_loss(pred, gt, mask):
    """1 - mean SSIM over valid pixels (11x11 Gaussian window, standard
    stabilizers). Both maps are zeroed at ignore pixels before windowing so
    ignored values can never leak into neighbouring windows."""
    g, m, count = _as_mask_tensors(gt, mask, pred.dtype.type)
    taps = gaussian_taps()
    x = pred * m
    y = g * m
    mu_x = ad.smooth2d(x, taps)
    mu_y = ad.smooth2d(y, taps)
    var_x = ad.smooth2d(x * x, taps) - mu_x * mu_x
    var_y = ad.smooth2d(y * y, taps) - mu_y * mu_y
    cov = ad.smooth2d(x * y, taps) - mu_x * mu_y
    num = (2.0 * mu_x * mu_y + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_x * mu_x + mu_y * mu_y + SSIM_C1) * (var_x + var_y + SSIM_C2)
    ssim_map = num / den
    return 1.0 - ad.tsum(ssim_map * m) * (1.0 / count)


def total_loss(deep_pred, final_pred, gt, mask, use_bce=True, use_iou=True,
               use_ssim=False, deep_supervision=True):
    """Sum of the enabled terms over the deep head then the final head, in the
    fixed order bce, iou, ssim per head. Returns (total, per-term dict)."""
    if not (use_bce or use_iou or use_ssim):
        raise ValueError("no loss terms enabled")
    heads = []
    if deep_supervision:
        heads.append(("deep", deep_pred))
    heads.append(("final", final_pred))
    terms = {}
    total = None
    for head_name, pred in heads:
        for term_name, enabled, fn in (
                ("bce", use_bce, bce_loss),
                ("iou", use_iou, iou_loss),
                ("ssim", use_ssim, ssim_loss)):
            if not enabled:
                continue
            value = fn(pred, gt, mask)
            terms[f"{head_name}_{term_name}"] = value
            total = value if total is None else total + value
    return total, terms
