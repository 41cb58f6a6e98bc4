"""Bottom-up high-resolution fusion of the multi-scale saliency maps.

Three cascaded stages lift the intermediate maps one octave per stage while
narrowing channel width. Within a stage, each output level sums one routed
path per input level; routing depends on how the input level relates to the
output level (levels count octaves below full resolution, so level 0 is full
size):

  * input coarser than output            -> bilinear upsample then 3x3 conv
  * input at the output level            -> 3x3 stride-1 conv
  * input one octave finer than output   -> 3x3 stride-2 conv

ReLU is applied after each per-level summation. The last stage's single
full-resolution feature is projected to one channel by a final 3x3 conv and
squashed with a sigmoid.

The stacked-conv substitute used by ablations upsamples the three maps to full
resolution, concatenates them, and applies a plain conv stack of the same
depth and widths.
"""

from . import autodiff as ad
from .layers import Conv2d


def _stage_plan():
    # (input levels, output levels) per stage; stage outputs are one octave
    # finer than the same-index inputs, clipped at full resolution
    return [([1, 2, 3], [0, 1, 2]),
            ([0, 1, 2], [0, 1]),
            ([0, 1], [0])]


class FusionPath:
    def __init__(self, c_in, c_out, in_level, out_level, rng):
        self.in_level = in_level
        self.out_level = out_level
        stride = 2 if in_level == out_level - 1 else 1
        self.conv = Conv2d(c_in, c_out, 3, stride, rng)
        if in_level < out_level - 1:
            raise ValueError(
                f"no routing rule for input level {in_level} -> output level {out_level}")

    def __call__(self, x, full_side):
        if self.in_level > self.out_level:
            target = full_side >> self.out_level
            x = ad.bilinear_resize(x, target, target)
        return self.conv(x)

    def parameters(self, prefix):
        return self.conv.parameters(prefix + ".conv")


class FusionStage:
    def __init__(self, in_levels, out_levels, c_in, c_out, rng):
        self.in_levels = in_levels
        self.out_levels = out_levels
        self.paths = {}
        for r in out_levels:
            for l in in_levels:
                self.paths[(l, r)] = FusionPath(c_in, c_out, l, r, rng)

    def __call__(self, inputs, full_side):
        outputs = []
        for r in self.out_levels:
            total = None
            for l, x in zip(self.in_levels, inputs):
                routed = self.paths[(l, r)](x, full_side)
                total = routed if total is None else ad.add(total, routed)
            outputs.append(ad.relu(total))
        return outputs

    def parameters(self, prefix):
        out = []
        for (l, r), path in sorted(self.paths.items()):
            out += path.parameters(f"{prefix}.path_{l}to{r}")
        return out


class HighResFusion:
    def __init__(self, widths, rng):
        w1, w2, w3 = widths
        plans = _stage_plan()
        self.stages = [
            FusionStage(*plans[0], 1, w1, rng),
            FusionStage(*plans[1], w1, w2, rng),
            FusionStage(*plans[2], w2, w3, rng),
        ]
        self.head = Conv2d(w3, 1, 3, 1, rng)

    def __call__(self, maps, full_side):
        # consistency of the three routing rules: every (stage, output) pair
        # must land on the same extent regardless of the input level
        feats = maps
        for stage in self.stages:
            for lvl, f in zip(stage.in_levels, feats):
                expect = full_side >> lvl
                if f.shape[:2] != (expect, expect):
                    raise ad.ShapeError(
                        f"fusion stage expects level {lvl} at {expect}x{expect}, "
                        f"got {f.shape[:2]}")
            feats = stage(feats, full_side)
        return ad.sigmoid(self.head(feats[0]))

    def parameters(self, prefix="fusion"):
        out = []
        for i, stage in enumerate(self.stages):
            out += stage.parameters(f"{prefix}.stage{i + 1}")
        out += self.head.parameters(prefix + ".head")
        return out


class StackedConvFusion:
    """Ablation substitute: same conv count and widths, no cross-scale routing."""

    def __init__(self, widths, rng):
        w1, w2, w3 = widths
        self.convs = [
            Conv2d(3, w1, 3, 1, rng),
            Conv2d(w1, w2, 3, 1, rng),
            Conv2d(w2, w3, 3, 1, rng),
        ]
        self.head = Conv2d(w3, 1, 3, 1, rng)

    def __call__(self, maps, full_side):
        up = [ad.bilinear_resize(m, full_side, full_side) for m in maps]
        x = ad.concat(up, axis=-1)
        for conv in self.convs:
            x = ad.relu(conv(x))
        return ad.sigmoid(self.head(x))

    def parameters(self, prefix="fusion"):
        out = []
        for i, conv in enumerate(self.convs):
            out += conv.parameters(f"{prefix}.stack{i + 1}")
        out += self.head.parameters(prefix + ".head")
        return out
