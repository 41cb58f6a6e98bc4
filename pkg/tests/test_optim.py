"""Nadam update rule and cosine schedule."""

import numpy as np
import pytest

from hypersal.optim import Nadam, cosine_lr, init_state, nadam_step
from oracles import nadam_first_step_oracle


class TestCosine:
    def test_endpoints_and_midpoint(self):
        assert cosine_lr(0, 100, 3e-3) == 3e-3
        assert cosine_lr(100, 100, 3e-3) == pytest.approx(0.0, abs=1e-18)
        assert cosine_lr(50, 100, 3e-3) == pytest.approx(1.5e-3)

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            cosine_lr(-1, 10, 1e-3)
        with pytest.raises(ValueError):
            cosine_lr(11, 10, 1e-3)

    def test_monotone_decreasing(self):
        values = [cosine_lr(s, 50, 1.0) for s in range(51)]
        assert all(a >= b for a, b in zip(values, values[1:]))


class TestNadam:
    def test_zero_gradient_from_zero_state_leaves_params(self):
        p = np.array([1.0, -2.0, 3.0])
        state = init_state(p)
        nadam_step(p, np.zeros(3), state, lr=0.1)
        assert np.array_equal(p, [1.0, -2.0, 3.0])

    def test_first_step_matches_closed_form(self):
        for grad, lr in ((1.0, 0.1), (-0.5, 3e-3), (2.0, 1e-2)):
            p = np.array([0.0])
            nadam_step(p, np.array([grad]), init_state(p), lr=lr)
            assert p[0] == pytest.approx(nadam_first_step_oracle(grad, lr), rel=1e-12)

    def test_hand_evaluated_first_step(self):
        # g=1, zero state: m_hat = 1, lookahead = 0.9 + 0.1/0.1*... = 1.9;
        # v_hat = 1; step = -lr * 1.9 / (1 + eps)
        p = np.array([0.0])
        nadam_step(p, np.array([1.0]), init_state(p), lr=0.1)
        assert p[0] == pytest.approx(-0.1 * 1.9 / (1.0 + 1e-8), rel=1e-12)

    def test_identical_params_get_identical_updates(self):
        a = np.array([0.7])
        b = np.array([0.7])
        sa, sb = init_state(a), init_state(b)
        for _ in range(5):
            nadam_step(a, np.array([0.3]), sa, lr=0.01)
            nadam_step(b, np.array([0.3]), sb, lr=0.01)
        assert np.array_equal(a, b)

    def test_shape_mismatch_rejected(self):
        p = np.zeros(3)
        with pytest.raises(ValueError):
            nadam_step(p, np.zeros(4), init_state(p), lr=0.1)

    def test_negative_lr_rejected(self):
        p = np.zeros(2)
        with pytest.raises(ValueError):
            nadam_step(p, np.ones(2), init_state(p), lr=-1e-3)

    def test_optimizer_moves_toward_quadratic_minimum(self):
        from hypersal import autodiff as ad
        p = ad.Tensor(np.array([5.0], dtype=np.float64), requires_grad=True)
        opt = Nadam([p])
        for _ in range(100):
            opt.zero_grad()
            ad.tsum(ad.mul(p, p)).backward()
            opt.step(0.1)
        assert abs(float(p.data[0])) < 0.1
