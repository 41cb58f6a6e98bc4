"""Nesterov-Adam parameter updates and the cosine learning-rate schedule."""

import math

import numpy as np


def cosine_lr(step, total_steps, lr0):
    """lr0 * (1 + cos(pi * step / total_steps)) / 2; lr0 at step 0, 0 at the end."""
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr0 * (1.0 + math.cos(math.pi * step / total_steps)) / 2.0


def nadam_step(param, grad, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One in-place Nadam update on a single parameter array.

    m and v are the usual Adam moments; the update applies the Nesterov
    look-ahead to the bias-corrected first moment:

        m <- b1*m + (1-b1)*g          v <- b2*v + (1-b2)*g^2
        step = (b1*m/(1-b1^t) + (1-b1)*g/(1-b1^t)) / (sqrt(v/(1-b2^t)) + eps)

    ``state`` is a dict with keys m, v, t (created by init_state). Deterministic:
    identical (param, grad, state) produce identical results.
    """
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if param.shape != grad.shape:
        raise ValueError(f"param/grad shape mismatch: {param.shape} vs {grad.shape}")
    m, v = state["m"], state["v"]
    t = state["t"] + 1
    state["t"] = t
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * grad * grad
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    lookahead = (beta1 * m + (1.0 - beta1) * grad) / bc1
    param -= lr * lookahead / (np.sqrt(v / bc2) + eps)
    return param, state


def init_state(param):
    return {"m": np.zeros_like(param), "v": np.zeros_like(param), "t": 0}


class Nadam:
    """Optimizer over a list of tensors; learning rate is passed per step so a
    schedule can drive it externally."""

    def __init__(self, params, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.states = [init_state(p.data) for p in self.params]

    def step(self, lr, grad_scale=1.0):
        for p, s in zip(self.params, self.states):
            g = p.grad
            if g is None:
                g = np.zeros_like(p.data)
            elif grad_scale != 1.0:
                g = g * p.data.dtype.type(grad_scale)
            nadam_step(p.data, g, s, lr, self.beta1, self.beta2, self.eps)

    def zero_grad(self):
        for p in self.params:
            p.grad = None
