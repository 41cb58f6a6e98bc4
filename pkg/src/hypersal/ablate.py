"""Ablation axes: retrain variants of the model on the same data and compare.

Axes mirror the standard component study: modality (spatial only / spectral
only / both), csab (2x2 grid over the cross-level attention block and the
high-resolution fusion; attention off degrades to direct summation of the
distance maps, fusion off substitutes a stacked conv tower), hrfm (fusion
on/off with attention kept on), and loss (the seven viable BCE/IoU/SSIM
combinations)."""

import dataclasses

from .evaluate import EvalReport, evaluate, model_predictor
from .network import SaliencyModel
from .train import DivergenceError, train

AXES = ("modality", "csab", "hrfm", "loss")

LOSS_ROWS = (
    # (label, bce, iou, ssim); the ssim-only row is prone to not converging
    # and may yield an empty report, mirroring the known failure of that combo
    ("bce", True, False, False),
    ("iou", False, True, False),
    ("ssim", False, False, True),
    ("iou+ssim", False, True, True),
    ("bce+ssim", True, False, True),
    ("bce+iou+ssim", True, True, True),
    ("bce+iou", True, True, False),
)


def axis_variants(axis, model_cfg, train_cfg):
    """(label, model_cfg, train_cfg) triples for one ablation axis."""
    if axis == "modality":
        rows = [("spatial-only", {"use_spectral": False}, {}),
                ("spectral-only", {"use_spatial": False}, {}),
                ("spatial+spectral", {}, {})]
    elif axis == "csab":
        rows = [("neither", {"use_attention": False, "use_fusion": False}, {}),
                ("attention-only", {"use_attention": True, "use_fusion": False}, {}),
                ("fusion-only", {"use_attention": False, "use_fusion": True}, {}),
                ("attention+fusion", {"use_attention": True, "use_fusion": True}, {})]
    elif axis == "hrfm":
        rows = [("stacked-conv", {"use_fusion": False}, {}),
                ("fusion", {"use_fusion": True}, {})]
    elif axis == "loss":
        rows = [(label, {}, {"loss_bce": b, "loss_iou": i, "loss_ssim": s})
                for label, b, i, s in LOSS_ROWS]
    else:
        raise ValueError(f"unknown ablation axis {axis!r}; options: {AXES}")
    out = []
    for label, model_over, train_over in rows:
        m = dataclasses.replace(model_cfg, **model_over)
        t = dataclasses.replace(train_cfg, **train_over)
        out.append((label, m, t))
    return out


def run_axis(axis, train_samples, test_samples, model_cfg, train_cfg,
             metric_cfg=None, log=None):
    """Train every variant of the axis and evaluate on the held-out samples."""
    reports = []
    for label, m_cfg, t_cfg in axis_variants(axis, model_cfg, train_cfg):
        if log is not None:
            log(f"[{axis}] training variant: {label}")
        model = SaliencyModel(m_cfg)
        try:
            train(model, train_samples, t_cfg, log=None)
        except DivergenceError as err:
            if log is not None:
                log(f"[{axis}] {label}: did not converge ({err})")
            reports.append(EvalReport(name=label, per_image=[]).finalize())
            continue
        report = evaluate(model_predictor(model), test_samples, label,
                          cfg=metric_cfg, flops=model.flops(t_cfg.side),
                          params=model.param_count())
        reports.append(report)
        if log is not None:
            log(f"[{axis}] {label}: F-beta {report.means['f_beta_max']:.4f}  "
                f"MAE {report.means['mae']:.4f}")
    return reports
