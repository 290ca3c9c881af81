"""Run configuration: a flat ``key = value`` text format with typed fields."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..backbone import EncoderConfig
from ..model import ModelConfig
from ..tensor import ConfigError


@dataclass
class TrainConfig:
    # data and output
    train_root: str = "data/train"
    val_root: str = ""
    out_dir: str = "runs/default"
    # optimisation
    epochs: int = 20
    batch_size: int = 8
    lr_backbone_max: float = 0.005
    lr_other_max: float = 0.05
    lr_scale: float = 2.0  # multiplies both peaks; tuned for the 64px desk run
    momentum: float = 0.9
    weight_decay: float = 5e-4
    warmup_fraction: float = 0.1
    seed: int = 0
    # augmentation
    flip_prob: float = 0.5
    crop_min: float = 0.875
    scales: tuple = (0.5, 1.0, 1.5)
    # model
    image_size: int = 64
    stem_channels: int = 16
    stage_channels: tuple = (16, 32, 64, 64)
    blocks_per_stage: tuple = (1, 1, 1, 1)
    kernel_sizes: tuple = (3, 5, 7, 9)
    groups: tuple = ()  # empty: derived per block
    reference_k: int = 3
    mlp_hidden: int = 0  # 0: max(c_in / 4, m)
    softmax_axis: str = "slot"
    block_type: str = "dpconv"
    decoder_width: int = 32
    num_bicfm: int = 2

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be >= 1")
        for name in ("lr_backbone_max", "lr_other_max", "lr_scale"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be > 0")
        if not 0 <= self.warmup_fraction < 1:
            raise ConfigError("warmup_fraction must lie in [0, 1)")
        if self.num_bicfm < 1:
            raise ConfigError("num_bicfm must be >= 1")
        if self.softmax_axis not in ("slot", "whole"):
            raise ConfigError("softmax_axis must be 'slot' or 'whole'")
        if self.image_size % 32:
            raise ConfigError("image_size must be a multiple of 32")

    def model_config(self) -> ModelConfig:
        enc = EncoderConfig(
            stem_channels=self.stem_channels, stage_channels=self.stage_channels,
            blocks_per_stage=self.blocks_per_stage, kernel_sizes=self.kernel_sizes,
            groups=self.groups or None, reference_k=self.reference_k,
            mlp_hidden=self.mlp_hidden or None, softmax_mode=self.softmax_axis,
            block_type=self.block_type)
        return ModelConfig(enc, self.decoder_width, self.num_bicfm, self.seed)

    def model_text(self) -> str:
        """Canonical text of the keys that determine the network; stored in checkpoints."""
        return "".join(f"{k} = {format_value(getattr(self, k))}\n" for k in MODEL_KEYS)

    def model_hash(self) -> str:
        return hashlib.sha256(self.model_text().encode()).hexdigest()

    def to_text(self) -> str:
        return "".join(f"{f.name} = {format_value(getattr(self, f.name))}\n" for f in fields(self))


MODEL_KEYS = ("seed", "image_size", "stem_channels", "stage_channels", "blocks_per_stage", "kernel_sizes",
              "groups", "reference_k", "mlp_hidden", "softmax_axis", "block_type", "decoder_width",
              "num_bicfm")

FIELD_TYPES = {f.name: type(f.default) for f in fields(TrainConfig)}

PRESETS = {
    "desk": {},
    # the full-resolution recipe, not run in CI
    "paper": {"image_size": 352, "batch_size": 32, "epochs": 32, "scales": (0.75, 1.0, 1.25)},
}


def format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_value(key: str, raw: str):
    if key not in FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    kind = FIELD_TYPES[key]
    raw = raw.strip()
    try:
        if kind is tuple:
            items = [r.strip() for r in raw.split(",") if r.strip()]
            conv = float if key == "scales" else int
            return tuple(conv(r) for r in items)
        if kind is bool:
            return raw.lower() in ("1", "true", "yes")
        return kind(raw)
    except ValueError:
        raise ConfigError(f"invalid value {raw!r} for {key}") from None


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (s.strip() for s in line.split("=", 1))
        values[key] = parse_value(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None, preset: str = "desk") -> TrainConfig:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    values = dict(PRESETS[preset])
    if path:
        values.update(parse_config_text(Path(path).read_text()))
    for key, raw in (overrides or {}).items():
        values[key] = parse_value(key, raw) if isinstance(raw, str) else raw
    return replace(TrainConfig(), **values)


def config_from_model_text(text: str) -> TrainConfig:
    return replace(TrainConfig(), **parse_config_text(text))


ABLATION_KERNEL_SETS = ((3,), (3, 5), (3, 5, 7), (3, 5, 7, 9), (3, 5, 7, 9, 11))
ABLATION_BICFM = (1, 2, 3, 4)


def round_width(channels: int, m: int) -> int:
    """Nearest ``m * 2^k`` to ``channels`` (in log space), so widths split evenly over ``m`` branches."""
    return m * 2 ** int(round(math.log2(channels / m)))


def ablation_overrides(kernel_sizes=None, num_bicfm=None, base: TrainConfig | None = None) -> dict:
    base = base or TrainConfig()
    out = {}
    if kernel_sizes is not None:
        m = len(kernel_sizes)
        out["kernel_sizes"] = tuple(kernel_sizes)
        out["stage_channels"] = tuple(round_width(c, m) for c in base.stage_channels)
        out["groups"] = ()
    if num_bicfm is not None:
        out["num_bicfm"] = num_bicfm
    return out
