"""Evaluation harness: run a model or classical baseline over a labelled
dataset, compute the six metrics per image plus image-weighted means, and emit
CSV reports, aligned text tables, and saliency map files (8-bit PGM + raw
float32 sidecar)."""

import csv
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .baselines import classical_saliency
from .config import MetricConfig
from .metrics import compute_all

METRIC_KEYS = ("mae", "f_beta_max", "e_measure", "s_measure", "auc", "cc")


@dataclass
class EvalReport:
    name: str
    per_image: list                      # dict per image, METRIC_KEYS (None allowed)
    means: dict = field(default_factory=dict)
    degenerate: int = 0                  # images lacking a class, excluded from F/AUC/CC
    seconds: float = 0.0
    flops: int | None = None             # analytic forward FLOPs (None for baselines)
    params: int | None = None
    fps: float | None = None

    def finalize(self):
        for key in METRIC_KEYS:
            values = [row[key] for row in self.per_image if row[key] is not None]
            self.means[key] = float(np.mean(values)) if values else float("nan")
        self.degenerate = sum(1 for row in self.per_image
                              if row["f_beta_max"] is None or row["auc"] is None)
        return self


def evaluate(predict, samples, name, cfg=None, flops=None, params=None):
    """predict(cube) -> (H, W) float map in [0,1]; samples are (cube, gt) pairs."""
    cfg = cfg or MetricConfig()
    rows = []
    start = time.perf_counter()
    for cube, gt in samples:
        if gt is None:
            raise ValueError("evaluation needs labelled data")
        sal = predict(cube)
        rows.append(compute_all(sal, gt.labels, cfg))
    seconds = time.perf_counter() - start
    report = EvalReport(name=name, per_image=rows, seconds=seconds,
                        flops=flops, params=params,
                        fps=len(samples) / seconds if seconds > 0 else None)
    return report.finalize()


def model_predictor(model):
    return lambda cube: model.predict(cube.values)


def baseline_predictor(mode):
    def predict(cube):
        sal, _ = classical_saliency(cube, mode)
        return sal
    return predict


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

def _fmt(value, digits=4):
    if value is None:
        return "-"
    if isinstance(value, float):
        if np.isnan(value):
            return "-"
        return f"{value:.{digits}f}"
    return str(value)


def report_to_csv(path, reports):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "image"] + list(METRIC_KEYS))
        for report in reports:
            for i, row in enumerate(report.per_image):
                writer.writerow([report.name, i] + [_fmt(row[k], 6) for k in METRIC_KEYS])
            writer.writerow([report.name, "mean"]
                            + [_fmt(report.means[k], 6) for k in METRIC_KEYS])


def summary_table(reports):
    header = ["method"] + list(METRIC_KEYS) + ["degenerate", "seconds"]
    lines = [header]
    for r in reports:
        lines.append([r.name] + [_fmt(r.means[k]) for k in METRIC_KEYS]
                     + [str(r.degenerate), f"{r.seconds:.2f}"])
    widths = [max(len(row[i]) for row in lines) for i in range(len(header))]
    out = []
    for row in lines:
        out.append("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip())
    footnote = ""
    degenerate = sum(r.degenerate for r in reports)
    if degenerate:
        footnote = (f"\nnote: {degenerate} image(s) lacked a class; excluded from "
                    f"F-measure/AUC/CC means")
    return "\n".join(out) + footnote


QUANTITATIVE_COLUMNS = ("Method", "Year", "MAE", "F-beta", "E-xi", "S-alpha",
                        "FLOPs (G)", "#Params (M)", "Speed (FPS)")


def quantitative_table(reports, year="-"):
    """Benchmark-style summary with the standard column set."""
    lines = [list(QUANTITATIVE_COLUMNS)]
    for r in reports:
        lines.append([
            r.name, str(year),
            _fmt(r.means["mae"], 3), _fmt(r.means["f_beta_max"], 3),
            _fmt(r.means["e_measure"], 3), _fmt(r.means["s_measure"], 3),
            _fmt(r.flops / 1e9 if r.flops else None, 2),
            _fmt(r.params / 1e6 if r.params else None, 2),
            _fmt(r.fps, 2),
        ])
    widths = [max(len(row[i]) for row in lines) for i in range(len(lines[0]))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
                     for row in lines)


# ---------------------------------------------------------------------------
# saliency map files
# ---------------------------------------------------------------------------

def write_pgm(path, sal):
    """8-bit binary PGM (P5), values round(S*255)."""
    sal = np.asarray(sal)
    levels = np.clip(np.rint(sal * 255.0), 0, 255).astype(np.uint8)
    h, w = levels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(levels.tobytes())


def write_float_map(path, sal):
    """Raw float32 little-endian sidecar, row-major, same extent as the PGM."""
    with open(path, "wb") as fh:
        fh.write(np.asarray(sal, dtype="<f4").tobytes())


def save_maps(out_dir, stem, sal):
    os.makedirs(out_dir, exist_ok=True)
    write_pgm(os.path.join(out_dir, stem + ".pgm"), sal)
    write_float_map(os.path.join(out_dir, stem + ".f32"), sal)
