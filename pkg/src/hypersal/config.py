"""Model / training / metric configuration, JSON loading and dotted overrides."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass


@dataclass
class ModelConfig:
    bands: int = 32
    channel_plan: tuple = (16, 24, 32, 64, 96)
    attention_hidden: int = 0          # 0 -> channel_plan[0]
    fusion_widths: tuple = (16, 8, 4)
    seed: int = 0
    use_spatial: bool = True           # modality switches (ablation)
    use_spectral: bool = True
    use_attention: bool = True         # False -> direct summation of distance maps
    use_fusion: bool = True            # False -> stacked-conv substitute

    def __post_init__(self):
        self.channel_plan = tuple(int(c) for c in self.channel_plan)
        self.fusion_widths = tuple(int(w) for w in self.fusion_widths)
        if len(self.channel_plan) != 5:
            raise ValueError(f"channel_plan needs 5 entries, got {self.channel_plan}")
        if len(self.fusion_widths) != 3:
            raise ValueError(f"fusion_widths needs 3 entries, got {self.fusion_widths}")
        if not (self.fusion_widths[0] > self.fusion_widths[1] > self.fusion_widths[2] > 0):
            raise ValueError(f"fusion widths must strictly decrease, got {self.fusion_widths}")
        if not (self.use_spatial or self.use_spectral):
            raise ValueError("at least one of use_spatial/use_spectral must be on")

    @property
    def hidden(self):
        return self.attention_hidden or self.channel_plan[0]


@dataclass
class TrainConfig:
    lr0: float = 3e-3
    epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    side: int = 256
    augment: bool = True
    loss_bce: bool = True
    loss_iou: bool = True
    loss_ssim: bool = False
    deep_supervision: bool = True

    def __post_init__(self):
        if self.lr0 <= 0:
            raise ValueError(f"lr0 must be > 0, got {self.lr0}")
        if self.side % 32 != 0:
            raise ValueError(f"input side must be divisible by 32, got {self.side}")
        if not (self.loss_bce or self.loss_iou or self.loss_ssim):
            raise ValueError("at least one loss term must be enabled")


@dataclass
class MetricConfig:
    beta_sq: float = 0.3
    levels: int = 256                  # binarization grid 0..255 mapped to [0,1]
    alpha: float = 0.5                 # structure-measure object/region mix

    def __post_init__(self):
        if self.beta_sq <= 0:
            raise ValueError(f"beta_sq must be > 0, got {self.beta_sq}")
        if self.levels < 2:
            raise ValueError(f"threshold grid needs >= 2 levels, got {self.levels}")


def to_dict(cfg):
    return dataclasses.asdict(cfg)


def config_hash(*cfgs):
    """Stable short hash over the canonical JSON of one or more configs."""
    blob = json.dumps([to_dict(c) for c in cfgs], sort_keys=True, default=list)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _coerce(raw, template):
    if isinstance(template, bool):
        if isinstance(raw, str):
            return raw.lower() in ("1", "true", "yes", "on")
        return bool(raw)
    if isinstance(template, int):
        return int(raw)
    if isinstance(template, float):
        return float(raw)
    if isinstance(template, tuple):
        if isinstance(raw, str):
            raw = [p for p in raw.replace(",", " ").split() if p]
        return tuple(type(template[0])(v) for v in raw)
    return raw


def apply_overrides(model_cfg, train_cfg, overrides):
    """Apply 'section.key=value' strings, e.g. 'train.epochs=20'."""
    sections = {"model": model_cfg, "train": train_cfg}
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ValueError(f"override must look like section.key=value, got {item!r}")
        path, value = item.split("=", 1)
        section, key = path.split(".", 1)
        if section not in sections:
            raise ValueError(f"unknown config section {section!r} in {item!r}")
        cfg = sections[section]
        if not hasattr(cfg, key):
            raise ValueError(f"unknown config key {key!r} in section {section!r}")
        setattr(cfg, key, _coerce(value, getattr(cfg, key)))
        cfg.__post_init__()
    return model_cfg, train_cfg


def load_config(path):
    """Read a JSON config file with optional 'model' and 'train' sections."""
    with open(path) as fh:
        raw = json.load(fh)
    model = ModelConfig(**raw.get("model", {}))
    train = TrainConfig(**raw.get("train", {}))
    return model, train


def save_config(path, model_cfg, train_cfg):
    with open(path, "w") as fh:
        json.dump({"model": to_dict(model_cfg), "train": to_dict(train_cfg)},
                  fh, indent=2, default=list)
        fh.write("\n")
