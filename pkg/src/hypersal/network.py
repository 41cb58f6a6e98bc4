"""The full saliency network: extractor -> three cross-level blocks -> fusion,
plus the auxiliary deep-supervision head, checkpointing, and FLOPs accounting.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .attention import CrossLevelBlock
from .config import ModelConfig, config_hash, to_dict
from .extractor import JointExtractor
from .fusion import HighResFusion, StackedConvFusion
from .layers import Conv2d
from .kernels import conv_output_side


@dataclass
class ModelOutput:
    saliency: ad.Tensor          # (H, W, 1) in (0,1)
    deep: ad.Tensor              # (H, W, 1) auxiliary head, in (0,1)
    intermediate: list           # 3 maps at H/2, H/4, H/8
    traces: list                 # AttentionTrace per block
    pyramid: list                # fused features, 5 levels
    spectral_weights: list       # per-level channel attention vectors


class SaliencyModel:
    def __init__(self, cfg: ModelConfig):
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        self.extractor = JointExtractor(cfg, rng)
        self.blocks = [
            CrossLevelBlock(cfg.channel_plan, q, cfg.hidden, rng,
                            use_attention=cfg.use_attention)
            for q in (1, 2, 3)
        ]
        if cfg.use_fusion:
            self.fusion = HighResFusion(cfg.fusion_widths, rng)
        else:
            self.fusion = StackedConvFusion(cfg.fusion_widths, rng)
        self.deep_head = Conv2d(cfg.channel_plan[4], 1, 1, 1, rng)

    def __call__(self, x):
        side = x.shape[0]
        pyramid, spectral_weights = self.extractor(x)
        traces = [block(pyramid) for block in self.blocks]
        inter = [t.saliency for t in traces]
        saliency = self.fusion(inter, side)
        deep = ad.bilinear_resize(ad.sigmoid(self.deep_head(pyramid[4])),
                                  x.shape[0], x.shape[1])
        return ModelOutput(saliency=saliency, deep=deep, intermediate=inter,
                           traces=traces, pyramid=pyramid,
                           spectral_weights=spectral_weights)

    def predict(self, cube_values):
        """Inference: float32 HxWxC array in, (H, W) saliency array out."""
        with ad.no_grad():
            out = self(ad.Tensor(np.ascontiguousarray(cube_values, dtype=np.float32)))
        return out.saliency.data[:, :, 0].copy()

    def parameters(self):
        out = self.extractor.parameters("extractor")
        for q, block in enumerate(self.blocks, start=1):
            out += block.parameters(f"block{q}")
        out += self.fusion.parameters("fusion")
        out += self.deep_head.parameters("deep_head")
        return out

    def param_tensors(self):
        return [t for _, t in self.parameters()]

    def param_count(self):
        return sum(t.size for t in self.param_tensors())

    def flops(self, side):
        """Analytic forward FLOPs (multiply-accumulates x2) of all conv layers
        at the given input side; cheap elementwise/resize work is excluded."""
        total = 0
        plan = self.cfg.channel_plan
        sides = [conv_output_side(side, 3, 2)]
        for _ in range(4):
            sides.append(conv_output_side(sides[-1], 3, 2))
        c_prev = self.cfg.bands
        in_side = side
        for lvl, c in enumerate(plan):
            out_side = sides[lvl]
            if self.cfg.use_spatial:
                total += 2 * 9 * c_prev * c * out_side ** 2      # stage reduce
                total += 2 * 9 * c * c * out_side ** 2           # stage refine
            if self.cfg.use_spectral:
                total += 2 * 2 * c_prev * c * in_side ** 2       # logit + feature 1x1
                total += 2 * 9 * c * c * out_side ** 2           # strided projection
            total += 2 * c * c * out_side ** 2                   # fusion 1x1
            c_prev = c
            in_side = out_side
        hidden = self.cfg.hidden
        for q in (1, 2, 3):
            q_side = sides[q - 1]
            for lvl in range(q, 6):
                total += 2 * plan[lvl - 1] * hidden * sides[lvl - 1] ** 2   # align
            n_keys = 5 - q
            total += 2 * hidden * hidden * q_side ** 2                      # q_proj
            total += 2 * 2 * n_keys * hidden * hidden * q_side ** 2         # k/v projs
        w1, w2, w3 = self.cfg.fusion_widths
        if self.cfg.use_fusion:
            for (ins, outs), (ci, co) in zip(
                    [([1, 2, 3], [0, 1, 2]), ([0, 1, 2], [0, 1]), ([0, 1], [0])],
                    [(1, w1), (w1, w2), (w2, w3)]):
                for r in outs:
                    total += 2 * 9 * ci * co * (side >> r) ** 2 * len(ins)
        else:
            for ci, co in [(3, w1), (w1, w2), (w2, w3)]:
                total += 2 * 9 * ci * co * side ** 2
        total += 2 * 9 * w3 * 1 * side ** 2                                 # head
        total += 2 * plan[4] * 1 * sides[4] ** 2                            # deep head
        return total


# ---------------------------------------------------------------------------
# checkpoints: text header (magic, config, hash, shapes) + raw LE payload
# ---------------------------------------------------------------------------

CKPT_MAGIC = b"HYPERSAL-CKPT 1\n"


def save_checkpoint(path, model, extra=None):
    params = model.parameters()
    header = {
        "config": to_dict(model.cfg),
        "config_hash": config_hash(model.cfg),
        "params": [{"name": n, "shape": list(t.shape), "dtype": str(t.dtype)}
                   for n, t in params],
    }
    if extra:
        header["extra"] = extra
    blob = json.dumps(header, sort_keys=True, default=list).encode()
    with open(path, "wb") as fh:
        fh.write(CKPT_MAGIC)
        fh.write(len(blob).to_bytes(8, "little"))
        fh.write(blob)
        for _, t in params:
            fh.write(np.ascontiguousarray(t.data).astype("<f4").tobytes())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        magic = fh.read(len(CKPT_MAGIC))
        if magic != CKPT_MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        header_len = int.from_bytes(fh.read(8), "little")
        header = json.loads(fh.read(header_len))
        cfg = ModelConfig(**header["config"])
        model = SaliencyModel(cfg)
        params = dict(model.parameters())
        for entry in header["params"]:
            shape = tuple(entry["shape"])
            n = int(np.prod(shape)) if shape else 1
            raw = np.frombuffer(fh.read(n * 4), dtype="<f4").reshape(shape)
            tensor = params[entry["name"]]
            if tensor.shape != shape:
                raise ValueError(
                    f"{path}: shape mismatch for {entry['name']}: "
                    f"file {shape} vs model {tensor.shape}")
            tensor.data = raw.astype(np.float32).copy()
    return model, header
