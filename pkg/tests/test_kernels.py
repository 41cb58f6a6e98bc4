"""Kernel backends: oracle exactness, backend equivalence, extent rules."""

import numpy as np
import pytest

from hypersal import kernels
from oracles import bilinear_oracle, conv2d_oracle, gap_oracle


@pytest.mark.parametrize("kernel,stride", [(1, 1), (1, 2), (3, 1), (3, 2)])
def test_conv_output_extent_is_ceil(kernel, stride):
    for size in (1, 2, 3, 5, 8, 17, 32):
        if size < kernel and kernel == 3:
            continue
        assert kernels.conv_output_side(size, kernel, stride) == -(-size // stride)


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
@pytest.mark.parametrize("kernel,stride", [(1, 1), (1, 2), (3, 1), (3, 2)])
def test_conv2d_matches_loop_oracle_bitwise(dtype, kernel, stride):
    rng = np.random.default_rng(5)
    for _ in range(4):
        h, w = rng.integers(3, 8, size=2)
        cin, cout = rng.integers(1, 4, size=2)
        x = rng.standard_normal((h, w, cin)).astype(dtype)
        wt = rng.standard_normal((kernel, kernel, cin, cout)).astype(dtype)
        b = rng.standard_normal(cout).astype(dtype)
        ref = conv2d_oracle(x, wt, b, stride)
        for name, ops in kernels.backend_pairs():
            got = ops["conv2d_forward"](x, wt, b, stride)
            assert np.array_equal(got, ref), f"{name} backend deviates from oracle"


def test_conv2d_stride2_spec_case_exact():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5, 5, 2))
    w = rng.standard_normal((3, 3, 2, 3))
    b = rng.standard_normal(3)
    assert np.array_equal(kernels.conv2d_forward(x, w, b, 2), conv2d_oracle(x, w, b, 2))


@pytest.mark.parametrize("dtype", [np.float32, np.float64])
def test_bilinear_matches_scalar_oracle_bitwise(dtype):
    rng = np.random.default_rng(11)
    for in_shape, out_shape in (((2, 2), (4, 4)), ((4, 6), (7, 3)), ((5, 5), (5, 5)),
                                ((8, 4), (3, 9))):
        x = rng.standard_normal(in_shape + (2,)).astype(dtype)
        ref = bilinear_oracle(x, *out_shape)
        for name, ops in kernels.backend_pairs():
            got = ops["bilinear_forward"](x, *out_shape)
            assert np.array_equal(got, ref), f"{name} backend deviates from oracle"


def test_bilinear_2x2_to_4x4_half_pixel_values():
    x = np.array([[0.0, 1.0], [2.0, 3.0]])[:, :, None]
    got = kernels.bilinear_forward(x, 4, 4)
    assert np.array_equal(got, bilinear_oracle(x, 4, 4))
    # half-pixel convention: corners replicate, centers interpolate
    assert got[0, 0, 0] == 0.0
    assert got[3, 3, 0] == 3.0
    assert got[1, 1, 0] == pytest.approx(0.75)


def test_gap_matches_accumulation_oracle():
    rng = np.random.default_rng(3)
    x = rng.standard_normal((7, 5, 3))
    ref = gap_oracle(x)
    for name, ops in kernels.backend_pairs():
        got = ops["gap_sum"](x) / np.float64(35)
        assert np.array_equal(got, ref), f"{name} backend deviates from oracle"
        assert np.abs(got - x.mean(axis=(0, 1))).max() < 1e-12


def test_backends_agree_bitwise_on_larger_inputs():
    pairs = kernels.backend_pairs()
    if len(pairs) < 2:
        pytest.skip("numba backend unavailable")
    rng = np.random.default_rng(123)
    x = rng.random((33, 29, 5), dtype=np.float32)
    w = rng.standard_normal((3, 3, 5, 7)).astype(np.float32)
    b = rng.standard_normal(7).astype(np.float32)
    a = pairs[0][1]
    nb = pairs[1][1]
    assert np.array_equal(a["conv2d_forward"](x, w, b, 2), nb["conv2d_forward"](x, w, b, 2))
    assert np.array_equal(a["bilinear_forward"](x, 50, 17), nb["bilinear_forward"](x, 50, 17))
    assert np.array_equal(a["gap_sum"](x), nb["gap_sum"](x))
    gout = rng.random((17, 15, 7), dtype=np.float32)
    ga = a["conv2d_backward"](x, w, 2, gout)
    gb = nb["conv2d_backward"](x, w, 2, gout)
    for u, v in zip(ga, gb):
        assert np.allclose(u, v, rtol=2e-5, atol=1e-6)
