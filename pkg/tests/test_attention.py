"""Cross-level attention block: alignment, distance maps, per-pixel attention,
aggregation, and the end-to-end pseudocode transcription equivalence."""

import numpy as np
import pytest

from hypersal import autodiff as ad
from hypersal.attention import CrossLevelBlock
from hypersal.config import ModelConfig
from hypersal.network import SaliencyModel
from oracles import cross_level_transcription

PLAN = (4, 4, 4, 4, 4)


def rand_pyramid(rng, side=16, plan=PLAN, dtype=np.float64):
    out = []
    for i, c in enumerate(plan):
        extent = max(side >> (i + 1), 1)
        out.append(ad.Tensor(rng.standard_normal((extent, extent, c)).astype(dtype)))
    return out


def to_double(block):
    for _, t in block.parameters("b"):
        t.data = t.data.astype(np.float64)
    return block


class TestShapeAlign:
    def test_query_level_resize_is_identity_projection_only(self):
        rng = np.random.default_rng(0)
        block = to_double(CrossLevelBlock(PLAN, 1, 4, np.random.default_rng(1)))
        pyramid = rand_pyramid(rng)
        aligned = block.align_levels(pyramid)
        w = block.align[0].weight.data
        b = block.align[0].bias.data
        ref = pyramid[0].data @ w[0, 0] + b
        assert np.allclose(aligned[0].data, ref, atol=1e-12)

    def test_five_levels_align_to_query_extent(self):
        rng = np.random.default_rng(2)
        block = CrossLevelBlock(PLAN, 1, 6, np.random.default_rng(3))
        pyramid = rand_pyramid(rng, side=64, dtype=np.float32)
        aligned = block.align_levels(pyramid)
        assert len(aligned) == 5
        for a in aligned:
            assert a.shape == (32, 32, 6)

    def test_constant_level_stays_constant_after_align(self):
        block = to_double(CrossLevelBlock(PLAN, 1, 3, np.random.default_rng(4)))
        pyramid = rand_pyramid(np.random.default_rng(5), side=32)
        pyramid[2] = ad.Tensor(np.full((4, 4, 4), 0.5))
        aligned = block.align_levels(pyramid)
        level2 = aligned[2].data
        assert np.allclose(level2, level2[0, 0][None, None, :], atol=1e-12)

    def test_bad_hidden_rejected(self):
        with pytest.raises(ValueError):
            CrossLevelBlock(PLAN, 1, 0, np.random.default_rng(0))
        with pytest.raises(ValueError):
            CrossLevelBlock(PLAN, 4, 4, np.random.default_rng(0))


class TestDistanceMaps:
    def test_key_identical_to_query_gives_zero_map(self):
        block = to_double(CrossLevelBlock(PLAN, 1, 4, np.random.default_rng(6)))
        # tie the first key's value projection to the query projection and
        # feed a pyramid whose aligned key equals the aligned query
        block.v_projs[0].weight.data = block.q_proj.weight.data.copy()
        block.v_projs[0].bias.data = block.q_proj.bias.data.copy()
        pyramid = rand_pyramid(np.random.default_rng(7), side=16)
        aligned = block.align_levels(pyramid)
        query = block.q_proj(aligned[0])
        value = block.v_projs[0](ad.Tensor(aligned[0].data.copy()))
        dist = ad.channel_distance(query, value)
        assert np.array_equal(dist.data, np.zeros_like(dist.data))

    def test_zero_query_ones_key_c4_gives_two(self):
        q = ad.Tensor(np.zeros((3, 3, 4)))
        k = ad.Tensor(np.ones((3, 3, 4)))
        assert np.array_equal(ad.channel_distance(q, k).data, np.full((3, 3, 1), 2.0))

    def test_random_distances_match_loop(self):
        rng = np.random.default_rng(8)
        a = rng.standard_normal((4, 4, 8))
        b = rng.standard_normal((4, 4, 8))
        dist = ad.channel_distance(ad.Tensor(a), ad.Tensor(b)).data[:, :, 0]
        for i in range(4):
            for j in range(4):
                ref = np.sqrt(((a[i, j] - b[i, j]) ** 2).sum())
                assert abs(dist[i, j] - ref) < 1e-12


class TestPixelwiseAttention:
    def test_single_key_attention_is_one(self):
        plan = (2, 2)
        block = CrossLevelBlock(plan + (2, 2, 2), 3, 2, np.random.default_rng(9))
        pyramid = rand_pyramid(np.random.default_rng(10), side=32, plan=(2,) * 5,
                               dtype=np.float32)
        # query level 3 has keys {4, 5}; restrict to one key manually
        block.levels = [3, 4]
        block.align = block.align[:2]
        block.k_projs = block.k_projs[:1]
        block.v_projs = block.v_projs[:1]
        trace = block(pyramid)
        assert np.array_equal(trace.attention.data,
                              np.ones_like(trace.attention.data))
        assert np.allclose(trace.saliency.data, trace.distances[0].data)

    def test_identical_key_projections_give_uniform_attention(self):
        block = CrossLevelBlock(PLAN, 2, 4, np.random.default_rng(11))
        for kp in block.k_projs:
            kp.weight.data = block.k_projs[0].weight.data.copy()
            kp.bias.data = block.k_projs[0].bias.data.copy()
        for conv in block.align[1:]:
            conv.weight.data = block.align[1].weight.data.copy()
            conv.bias.data = block.align[1].bias.data.copy()
        pyramid = rand_pyramid(np.random.default_rng(12), side=32, dtype=np.float32)
        # make all key levels carry the same constant so their projections agree
        for i in range(2, 5):
            pyramid[i] = ad.Tensor(np.full(pyramid[i].shape, 0.5, dtype=np.float32))
        trace = block(pyramid)
        j = trace.attention.shape[-1]
        assert np.allclose(trace.attention.data, 1.0 / j, atol=1e-6)

    def test_rows_sum_to_one(self):
        for q in (1, 2, 3):
            block = CrossLevelBlock(PLAN, q, 4, np.random.default_rng(13 + q))
            pyramid = rand_pyramid(np.random.default_rng(17), side=32, dtype=np.float32)
            trace = block(pyramid)
            sums = trace.attention.data.sum(axis=-1)
            assert np.abs(sums - 1.0).max() < 1e-6
            assert (trace.attention.data >= 0).all()

    def test_attention_matches_dot_softmax_oracle(self):
        block = to_double(CrossLevelBlock((2, 2, 2, 2, 2), 1, 2,
                                          np.random.default_rng(18)))
        pyramid = rand_pyramid(np.random.default_rng(19), side=8, plan=(2,) * 5)
        trace = block(pyramid)
        aligned = block.align_levels(pyramid)
        query = block.q_proj(aligned[0]).data
        keys = [kp(a).data for kp, a in zip(block.k_projs, aligned[1:])]
        h, w = query.shape[:2]
        for i in range(h):
            for j in range(w):
                logits = np.array([query[i, j] @ k[i, j] for k in keys])
                e = np.exp(logits - logits.max())
                ref = e / e.sum()
                assert np.allclose(trace.attention.data[i, j], ref, atol=1e-12)


class TestAggregate:
    def test_uniform_attention_averages(self):
        m1 = np.random.default_rng(20).random((3, 3, 1))
        m = ad.concat([ad.Tensor(m1), ad.Tensor(3 * m1)], axis=-1)
        a = ad.Tensor(np.full((3, 3, 2), 0.5))
        s = ad.sum_axis(ad.mul(a, m), axis=-1, keepdims=True)
        assert np.allclose(s.data, 2 * m1, atol=1e-12)

    def test_one_hot_selects(self):
        rng = np.random.default_rng(21)
        maps = ad.Tensor(rng.random((4, 4, 3)))
        onehot = np.zeros((4, 4, 3))
        onehot[:, :, 1] = 1.0
        s = ad.sum_axis(ad.mul(ad.Tensor(onehot), maps), axis=-1, keepdims=True)
        assert np.allclose(s.data[:, :, 0], maps.data[:, :, 1], atol=1e-15)


class TestBlockForward:
    def test_output_extents_per_query_level(self):
        cfg = ModelConfig(bands=8, channel_plan=(8, 12, 16, 32, 48), seed=0)
        model = SaliencyModel(cfg)
        x = ad.Tensor(np.random.default_rng(22).random((256, 256, 8), dtype=np.float32))
        with ad.no_grad():
            out = model(x)
        assert out.intermediate[0].shape == (128, 128, 1)
        assert out.intermediate[1].shape == (64, 64, 1)
        assert out.intermediate[2].shape == (32, 32, 1)

    def test_constant_pyramid_tied_projections_gives_zero_map(self):
        block = to_double(CrossLevelBlock(PLAN, 1, 4, np.random.default_rng(23)))
        for conv in block.align:
            conv.weight.data = block.align[0].weight.data.copy()
            conv.bias.data = block.align[0].bias.data.copy()
        for vp in block.v_projs:
            vp.weight.data = block.q_proj.weight.data.copy()
            vp.bias.data = block.q_proj.bias.data.copy()
        pyramid = [ad.Tensor(np.full((max(16 >> (i + 1), 1),) * 2 + (4,), 0.7))
                   for i in range(5)]
        trace = block(pyramid)
        assert np.allclose(trace.saliency.data, 0.0, atol=1e-12)

    def test_saliency_is_convex_combination_of_distances(self):
        for q in (1, 2, 3):
            block = CrossLevelBlock(PLAN, q, 4, np.random.default_rng(24 + q))
            pyramid = rand_pyramid(np.random.default_rng(30), side=64, dtype=np.float32)
            trace = block(pyramid)
            stacked = np.concatenate([d.data for d in trace.distances], axis=-1)
            lo = stacked.min(axis=-1)
            hi = stacked.max(axis=-1)
            s = trace.saliency.data[:, :, 0]
            assert (s >= lo - 1e-5).all() and (s <= hi + 1e-5).all()
            assert (stacked >= 0).all() and (s >= -1e-7).all()

    def test_direct_summation_mode(self):
        block = CrossLevelBlock(PLAN, 1, 4, np.random.default_rng(31),
                                use_attention=False)
        pyramid = rand_pyramid(np.random.default_rng(32), side=16, dtype=np.float32)
        trace = block(pyramid)
        assert trace.attention is None
        total = sum(d.data for d in trace.distances)
        assert np.allclose(trace.saliency.data, total, atol=1e-6)

    def test_transcription_equivalence(self):
        # direct step-by-step transcription of the attention pseudocode
        # (interpolate-then-project order) against the block (project-then-
        # resize order) on a frozen random pyramid
        rng = np.random.default_rng(33)
        plan = (3, 4, 5, 6, 7)
        for q in (1, 2, 3):
            block = to_double(CrossLevelBlock(plan, q, 5, np.random.default_rng(40 + q)))
            pyramid = []
            for i, c in enumerate(plan):
                extent = max(32 >> (i + 1), 1)
                pyramid.append(ad.Tensor(rng.standard_normal((extent, extent, c))))
            trace = block(pyramid)
            ref = cross_level_transcription([p.data for p in pyramid], block)
            assert np.abs(trace.saliency.data[:, :, 0] - ref).max() < 1e-5
