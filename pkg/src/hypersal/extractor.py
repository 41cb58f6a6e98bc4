"""Joint spatial/spectral feature extraction.

Two parallel five-level pyramids are built from the input cube: a plain
convolutional spatial backbone, and a spectral branch whose every level is a
channel-attention block (softmax channel weights from pooled 1x1-conv logits,
applied multiplicatively, then a strided 3x3 projection that also performs the
inter-level downsampling). The two pyramids share one channel plan so each
level can be fused by cross-branch modulation:

    fused_i = conv1x1(spat_i) * spec_i  +  gap(spec_i) * spat_i

Either branch can be disabled for modality ablations, in which case the other
branch's features stand in for it and the fusion still runs.
"""

import numpy as np

from . import autodiff as ad
from .layers import Conv2d


class BackboneStage:
    """conv3x3 stride-2 + ReLU + conv3x3 stride-1 + ReLU."""

    def __init__(self, c_in, c_out, rng):
        self.reduce = Conv2d(c_in, c_out, 3, 2, rng)
        self.refine = Conv2d(c_out, c_out, 3, 1, rng)

    def __call__(self, x):
        return ad.relu(self.refine(ad.relu(self.reduce(x))))

    def parameters(self, prefix):
        return self.reduce.parameters(prefix + ".reduce") + self.refine.parameters(prefix + ".refine")


class SpatialBackbone:
    def __init__(self, bands, plan, rng):
        self.stages = []
        c_prev = bands
        for c in plan:
            self.stages.append(BackboneStage(c_prev, c, rng))
            c_prev = c

    def __call__(self, x):
        levels = []
        for stage in self.stages:
            x = stage(x)
            levels.append(x)
        return levels

    def parameters(self, prefix):
        out = []
        for i, stage in enumerate(self.stages):
            out += stage.parameters(f"{prefix}.stage{i + 1}")
        return out


class SpectralAttentionStage:
    """Channel attention + strided projection; returns (features, weights).

    weights = softmax over channels of the globally pooled 1x1-conv logits
    (no activation on the logit conv); the weighted 1x1 features are then
    projected and downsampled by a stride-2 3x3 conv. ReLU follows every conv
    except the logit conv.
    """

    def __init__(self, c_in, c_out, rng):
        self.logits = Conv2d(c_in, c_out, 1, 1, rng)
        self.features = Conv2d(c_in, c_out, 1, 1, rng)
        self.project = Conv2d(c_out, c_out, 3, 2, rng)
        # the softmax channel weights average 1/c_out, which would shrink
        # activations by that factor at every level (there is no normalization
        # layer to recover scale); widen the projection init to compensate
        self.project.weight.data *= c_out

    def __call__(self, x):
        pooled = ad.global_avg_pool(self.logits(x))          # 1x1xC
        weights = ad.softmax(pooled, axis=-1)
        feat = ad.relu(self.features(x))
        out = ad.relu(self.project(ad.mul(weights, feat)))
        return out, weights

    def parameters(self, prefix):
        return (self.logits.parameters(prefix + ".logits")
                + self.features.parameters(prefix + ".features")
                + self.project.parameters(prefix + ".project"))


class SpectralBranch:
    def __init__(self, bands, plan, rng):
        self.stages = []
        c_prev = bands
        for c in plan:
            self.stages.append(SpectralAttentionStage(c_prev, c, rng))
            c_prev = c

    def __call__(self, x):
        levels, weights = [], []
        for stage in self.stages:
            x, v = stage(x)
            levels.append(x)
            weights.append(v)
        return levels, weights

    def parameters(self, prefix):
        out = []
        for i, stage in enumerate(self.stages):
            out += stage.parameters(f"{prefix}.stage{i + 1}")
        return out


class LevelFusion:
    """Cross-branch modulation at one pyramid level."""

    def __init__(self, channels, rng):
        self.spat_to_weight = Conv2d(channels, channels, 1, 1, rng)

    def __call__(self, f_spat, f_spec):
        if f_spat.shape != f_spec.shape:
            raise ad.ShapeError(
                f"fusion level shape mismatch: spatial {f_spat.shape} vs spectral {f_spec.shape}")
        spec_mod = ad.mul(self.spat_to_weight(f_spat), f_spec)
        spat_mod = ad.mul(ad.global_avg_pool(f_spec), f_spat)
        return ad.add(spec_mod, spat_mod)

    def parameters(self, prefix):
        return self.spat_to_weight.parameters(prefix + ".weight_conv")


class JointExtractor:
    """Builds the five-level fused pyramid from an input cube tensor."""

    def __init__(self, cfg, rng):
        self.cfg = cfg
        plan = cfg.channel_plan
        self.spatial = SpatialBackbone(cfg.bands, plan, rng) if cfg.use_spatial else None
        self.spectral = SpectralBranch(cfg.bands, plan, rng) if cfg.use_spectral else None
        self.fusers = [LevelFusion(c, rng) for c in plan]

    def __call__(self, x):
        if x.shape[0] < 32 or x.shape[1] < 32:
            raise ad.ShapeError(f"input side must be >= 32, got {x.shape[0]}x{x.shape[1]}")
        spectral_weights = []
        if self.spatial is not None:
            spat = self.spatial(x)
        if self.spectral is not None:
            spec, spectral_weights = self.spectral(x)
        if self.spatial is None:
            spat = spec
        if self.spectral is None:
            spec = spat
        pyramid = [fuse(fs, fp) for fuse, fs, fp in zip(self.fusers, spat, spec)]
        return pyramid, spectral_weights

    def parameters(self, prefix="extractor"):
        out = []
        if self.spatial is not None:
            out += self.spatial.parameters(prefix + ".spatial")
        if self.spectral is not None:
            out += self.spectral.parameters(prefix + ".spectral")
        for i, fuse in enumerate(self.fusers):
            out += fuse.parameters(f"{prefix}.fuse{i + 1}")
        return out
