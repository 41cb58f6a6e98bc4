"""Saliency evaluation metrics: MAE, max F-measure, enhanced-alignment measure,
structure measure, ROC-AUC and Pearson correlation.

All metrics exclude ignore pixels (label -1). Binarizing metrics share one
threshold grid, k/(levels-1) for k = 0..levels-1 (256 levels by default).
F-measure and AUC binarize with strict S > threshold, so an all-zero map is
never predicted positive; the E-measure's adaptive binarization uses
S >= max(threshold, tiny). Zero-division conventions follow the standard
implementations and are noted per function.
"""

import numpy as np

from .config import MetricConfig


class NoForegroundError(ValueError):
    """The metric needs at least one valid foreground pixel."""


class SingleClassError(ValueError):
    """The metric needs both classes among the valid pixels."""


def threshold_grid(levels=256):
    return np.arange(levels, dtype=np.float64) / (levels - 1)


def _flat_valid(sal, gt):
    sal = np.asarray(sal, dtype=np.float64)
    labels = np.asarray(gt)
    valid = labels >= 0
    if not valid.any():
        raise ValueError("all pixels are ignore-labelled")
    return sal[valid], (labels[valid] > 0)


def mae(sal, gt):
    s, g = _flat_valid(sal, gt)
    return float(np.abs(s - g).mean())


def f_beta_max(sal, gt, cfg=None):
    """Max over the threshold grid of (1+b2)PR/(b2 P + R); empty-prediction
    precision and 0/0 F-scores count as 0."""
    cfg = cfg or MetricConfig()
    s, g = _flat_valid(sal, gt)
    fg = int(g.sum())
    if fg == 0:
        raise NoForegroundError("no valid foreground pixels")
    thresholds = threshold_grid(cfg.levels)
    preds = s[None, :] > thresholds[:, None]
    tp = (preds & g[None, :]).sum(axis=1)
    pp = preds.sum(axis=1)
    best = 0.0
    b2 = cfg.beta_sq
    for k in range(cfg.levels):
        if pp[k] == 0 or tp[k] == 0:
            continue
        p = tp[k] / pp[k]
        r = tp[k] / fg
        f = (1.0 + b2) * p * r / (b2 * p + r)
        if f > best:
            best = f
    return float(best)


def _adaptive_binarize(s):
    # threshold floor keeps an all-zero map binarizing to all zero
    threshold = min(2.0 * float(s.mean()), 1.0)
    return s >= max(threshold, 1e-12)


def e_measure(sal, gt):
    """Enhanced-alignment measure at the adaptive threshold min(2*mean, 1).

    Degenerate conventions: with an all-background ground truth the enhanced
    map is 1 - binarized (so an all-zero prediction scores 1.0); all-foreground
    mirrors it.
    """
    s, g = _flat_valid(sal, gt)
    binar = _adaptive_binarize(s).astype(np.float64)
    gf = g.astype(np.float64)
    if gf.mean() == 0.0:
        enhanced = 1.0 - binar
    elif gf.mean() == 1.0:
        enhanced = binar
    else:
        xi_s = binar - binar.mean()
        xi_g = gf - gf.mean()
        align = 2.0 * xi_s * xi_g / (xi_s * xi_s + xi_g * xi_g + 1e-20)
        enhanced = (align + 1.0) ** 2 / 4.0
    return float(enhanced.mean())


def _masked_ssim_quadrant(s, g, valid):
    n = int(valid.sum())
    if n == 0:
        return 1.0, 0
    sv = s[valid]
    gv = g[valid]
    x = sv.mean()
    y = gv.mean()
    denom_n = max(n - 1, 1)
    sig_x = ((sv - x) ** 2).sum() / denom_n
    sig_y = ((gv - y) ** 2).sum() / denom_n
    sig_xy = ((sv - x) * (gv - y)).sum() / denom_n
    alpha = 4.0 * x * y * sig_xy
    beta = (x * x + y * y) * (sig_x + sig_y)
    if alpha != 0.0:
        q = alpha / (beta + 1e-20)
    elif beta == 0.0:
        q = 1.0
    else:
        q = 0.0
    return q, n


def s_measure(sal, gt, alpha=0.5):
    """Structure measure: alpha * object term + (1-alpha) * region term.

    The object term scores foreground/background separately from the valid-
    pixel statistics; the region term splits the map into four quadrants at
    the valid-foreground centroid and averages a per-quadrant SSIM weighted by
    valid-pixel share. Degenerate all-background/all-foreground ground truths
    fall back to 1 - mean(S) / mean(S); the result is clipped to [0, 1].
    """
    s = np.asarray(sal, dtype=np.float64)
    labels = np.asarray(gt)
    valid = labels >= 0
    if not valid.any():
        raise ValueError("all pixels are ignore-labelled")
    g = (labels > 0) & valid
    mu = g[valid].mean()
    if mu == 0.0:
        return float(np.clip(1.0 - s[valid].mean(), 0.0, 1.0))
    if mu == 1.0:
        return float(np.clip(s[valid].mean(), 0.0, 1.0))

    # object term
    fg_vals = s[g & valid]
    bg_vals = 1.0 - s[(~g) & valid]
    def object_score(vals):
        m = vals.mean()
        sd = vals.std()
        return 2.0 * m / (m * m + 1.0 + sd + 1e-20)
    s_object = mu * object_score(fg_vals) + (1.0 - mu) * object_score(bg_vals)

    # region term: quadrants at the valid-foreground centroid
    rows, cols = np.nonzero(g & valid)
    cy = int(round(rows.mean()))
    cx = int(round(cols.mean()))
    h, w = labels.shape
    cy = min(max(cy, 1), h - 1)
    cx = min(max(cx, 1), w - 1)
    gf = g.astype(np.float64)
    score = 0.0
    total_valid = int(valid.sum())
    for rs, csl in ((slice(0, cy), slice(0, cx)), (slice(0, cy), slice(cx, w)),
                    (slice(cy, h), slice(0, cx)), (slice(cy, h), slice(cx, w))):
        q, n = _masked_ssim_quadrant(s[rs, csl], gf[rs, csl], valid[rs, csl])
        score += q * (n / total_valid)
    s_region = score

    return float(np.clip(alpha * s_object + (1.0 - alpha) * s_region, 0.0, 1.0))


def auc_cc(sal, gt, cfg=None):
    """ROC-AUC over the threshold grid (trapezoidal, with a (0,0) anchor) and
    the Pearson correlation between prediction and binary labels; a constant
    prediction has undefined correlation and scores cc = 0."""
    cfg = cfg or MetricConfig()
    s, g = _flat_valid(sal, gt)
    pos = int(g.sum())
    neg = g.size - pos
    if pos == 0 or neg == 0:
        raise SingleClassError("AUC/CC need both classes among valid pixels")
    thresholds = threshold_grid(cfg.levels)
    preds = s[None, :] > thresholds[:, None]
    tp = (preds & g[None, :]).sum(axis=1)
    fp = preds.sum(axis=1) - tp
    # threshold descending, anchored at (0,0) and (1,1)
    xs = [0.0]
    ys = [0.0]
    for k in range(cfg.levels - 1, -1, -1):
        xs.append(fp[k] / neg)
        ys.append(tp[k] / pos)
    xs.append(1.0)
    ys.append(1.0)
    auc = 0.0
    for i in range(1, len(xs)):
        auc += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) / 2.0

    sc = s - s.mean()
    gc = g.astype(np.float64) - g.mean()
    denom = np.sqrt((sc * sc).sum() * (gc * gc).sum())
    cc = float((sc * gc).sum() / denom) if denom > 0 else 0.0
    return float(auc), cc


def compute_all(sal, gt, cfg=None):
    """All six metrics for one map; F-measure and AUC/CC are None when the
    ground truth lacks a class (degenerate images, reported separately)."""
    cfg = cfg or MetricConfig()
    out = {
        "mae": mae(sal, gt),
        "e_measure": e_measure(sal, gt),
        "s_measure": s_measure(sal, gt, cfg.alpha),
    }
    try:
        out["f_beta_max"] = f_beta_max(sal, gt, cfg)
    except NoForegroundError:
        out["f_beta_max"] = None
    try:
        out["auc"], out["cc"] = auc_cc(sal, gt, cfg)
    except SingleClassError:
        out["auc"] = None
        out["cc"] = None
    return out
