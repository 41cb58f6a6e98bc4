"""Training loop: Nadam with cosine learning-rate annealing, per-sample
gradient accumulation within batches, optional augmentation, divergence
checks, and deterministic behaviour for a fixed seed."""

import math
import time

import numpy as np

from . import autodiff as ad
from .cube import augment, valid_mask
from .losses import total_loss
from .optim import Nadam, cosine_lr


class DivergenceError(RuntimeError):
    """Training produced a non-finite loss."""


def _forward_loss(model, cube_values, labels, train_cfg):
    x = ad.Tensor(np.ascontiguousarray(cube_values, dtype=np.float32))
    out = model(x)
    mask = valid_mask(labels)
    loss, terms = total_loss(out.deep, out.saliency, labels, mask,
                             use_bce=train_cfg.loss_bce,
                             use_iou=train_cfg.loss_iou,
                             use_ssim=train_cfg.loss_ssim,
                             deep_supervision=train_cfg.deep_supervision)
    return loss, terms


def train(model, samples, train_cfg, log=None):
    """Optimize the model in place; returns the per-epoch mean loss curve.

    Deterministic given (model init seed, train_cfg.seed): sample order,
    augmentation draws and gradient accumulation order are all fixed.
    """
    if not samples:
        raise ValueError("training dataset is empty")
    rng = np.random.default_rng(train_cfg.seed)
    params = model.param_tensors()
    opt = Nadam(params)
    n = len(samples)
    batches_per_epoch = math.ceil(n / train_cfg.batch_size)
    total_steps = train_cfg.epochs * batches_per_epoch
    curve = []
    step = 0
    start = time.perf_counter()
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for b in range(batches_per_epoch):
            idx = order[b * train_cfg.batch_size:(b + 1) * train_cfg.batch_size]
            opt.zero_grad()
            batch_loss = 0.0
            for i in idx:
                cube, gt = samples[i]
                if train_cfg.augment:
                    cube, gt = augment(cube, gt, rng)
                loss, _ = _forward_loss(model, cube.values, gt.labels, train_cfg)
                value = float(loss.data)
                if not math.isfinite(value):
                    raise DivergenceError(
                        f"non-finite loss {value} at epoch {epoch + 1}, step {step}, "
                        f"lr {cosine_lr(step, total_steps, train_cfg.lr0):.3e}")
                loss.backward()
                batch_loss += value
            lr = cosine_lr(step, total_steps, train_cfg.lr0)
            opt.step(lr, grad_scale=1.0 / len(idx))
            step += 1
            epoch_loss += batch_loss
        curve.append(epoch_loss / n)
        if log is not None:
            log(f"epoch {epoch + 1:3d}/{train_cfg.epochs}  "
                f"loss {curve[-1]:.6f}  lr {cosine_lr(step, total_steps, train_cfg.lr0):.2e}")
    elapsed = time.perf_counter() - start
    return {"loss_curve": curve, "steps": step, "seconds": elapsed}
