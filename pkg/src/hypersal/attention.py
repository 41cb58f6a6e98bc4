"""Cross-level saliency assessment.

One block compares a query pyramid level against every coarser level. All
participating levels are first projected to a shared hidden width by per-level
1x1 convs and bilinearly resized to the query extent. Per-pixel Euclidean
distances between the projected query and per-level value projections give one
single-channel distance map per key level; per-pixel dot products between query
and key projections give attention logits, softmax-normalized over the key
levels; the output map is the attention-weighted sum of the distance maps.

With attention disabled the distance maps are summed directly (the classical
multi-scale summation), which is the ablation counterpart of this block.
"""

from dataclasses import dataclass

from . import autodiff as ad
from .layers import Conv2d


@dataclass
class AttentionTrace:
    """Intermediates surfaced for inspection and tests."""
    saliency: ad.Tensor          # (H/2^q, W/2^q, 1)
    distances: list              # J maps, each (H/2^q, W/2^q, 1)
    attention: ad.Tensor | None  # (H/2^q, W/2^q, J); None when attention is off
    aligned: list                # projected+resized features, query first


class CrossLevelBlock:
    def __init__(self, plan, q_level, hidden, rng, use_attention=True):
        if q_level not in (1, 2, 3):
            raise ValueError(f"query level must be 1, 2 or 3, got {q_level}")
        if hidden <= 0:
            raise ValueError(f"hidden width must be positive, got {hidden}")
        self.q_level = q_level
        self.levels = list(range(q_level, len(plan) + 1))   # query first, then keys
        self.use_attention = use_attention
        self.align = [Conv2d(plan[lvl - 1], hidden, 1, 1, rng) for lvl in self.levels]
        self.q_proj = Conv2d(hidden, hidden, 1, 1, rng)
        n_keys = len(self.levels) - 1
        self.k_projs = [Conv2d(hidden, hidden, 1, 1, rng) for _ in range(n_keys)]
        self.v_projs = [Conv2d(hidden, hidden, 1, 1, rng) for _ in range(n_keys)]

    def align_levels(self, pyramid):
        """Project each participating level to the hidden width, then resize to
        the query extent (resize is the identity for the query level itself)."""
        target_h, target_w = pyramid[self.q_level - 1].shape[:2]
        aligned = []
        for conv, lvl in zip(self.align, self.levels):
            z = conv(pyramid[lvl - 1])
            if z.shape[:2] != (target_h, target_w):
                z = ad.bilinear_resize(z, target_h, target_w)
            aligned.append(z)
        return aligned

    def __call__(self, pyramid):
        aligned = self.align_levels(pyramid)
        query = self.q_proj(aligned[0])
        distances = []
        logits = []
        for j, key_feat in enumerate(aligned[1:]):
            value = self.v_projs[j](key_feat)
            distances.append(ad.channel_distance(query, value))
            if self.use_attention:
                key = self.k_projs[j](key_feat)
                logits.append(ad.channel_dot(query, key))
        stacked = ad.concat(distances, axis=-1)
        if self.use_attention:
            attention = ad.softmax(ad.concat(logits, axis=-1), axis=-1)
            saliency = ad.sum_axis(ad.mul(attention, stacked), axis=-1, keepdims=True)
        else:
            attention = None
            saliency = ad.sum_axis(stacked, axis=-1, keepdims=True)
        return AttentionTrace(saliency=saliency, distances=distances,
                              attention=attention, aligned=aligned)

    def parameters(self, prefix):
        out = []
        for lvl, conv in zip(self.levels, self.align):
            out += conv.parameters(f"{prefix}.align{lvl}")
        out += self.q_proj.parameters(prefix + ".q_proj")
        for j, conv in enumerate(self.k_projs):
            out += conv.parameters(f"{prefix}.k_proj{j + 1}")
        for j, conv in enumerate(self.v_projs):
            out += conv.parameters(f"{prefix}.v_proj{j + 1}")
        return out
