"""Learnable layer wrappers over the autodiff ops, with Kaiming-uniform init."""

import numpy as np

from .autodiff import Tensor, conv2d


def kaiming_uniform(rng, shape, fan_in, dtype=np.float32):
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Conv2d:
    """k x k cross-correlation layer, k in {1,3}; 3x3 uses zero same-padding."""

    def __init__(self, c_in, c_out, kernel, stride, rng, dtype=np.float32):
        fan_in = kernel * kernel * c_in
        self.weight = Tensor(kaiming_uniform(rng, (kernel, kernel, c_in, c_out), fan_in, dtype),
                             requires_grad=True)
        self.bias = Tensor(np.zeros(c_out, dtype=dtype), requires_grad=True)
        self.stride = stride

    def __call__(self, x):
        return conv2d(x, self.weight, self.bias, self.stride)

    def parameters(self, prefix):
        return [(prefix + ".weight", self.weight), (prefix + ".bias", self.bias)]

    def flops(self, out_h, out_w):
        k, _, c_in, c_out = self.weight.shape
        return 2 * k * k * c_in * c_out * out_h * out_w
