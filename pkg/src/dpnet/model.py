"""Full saliency network: DPConv encoder followed by the BiCFM/DWF decoder."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backbone import LEVELS, Encoder, EncoderConfig
from .decoder import Decoder, DecoderOutput
from .nn import Module
from .tensor import Tensor, as_tensor

# fixed input normalisation for [0, 1] images
INPUT_MEAN = 0.5
INPUT_STD = 0.25


@dataclass
class ModelConfig:
    encoder: EncoderConfig
    decoder_width: int = 32
    num_bicfm: int = 2
    seed: int = 0


class DPNet(Module):
    def __init__(self, config: ModelConfig):
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.encoder = Encoder(config.encoder, rng)
        widths = dict(zip(LEVELS, config.encoder.stage_channels))
        self.decoder = Decoder(widths, config.decoder_width, config.num_bicfm, rng,
                               softmax_mode=config.encoder.softmax_mode)

    def forward(self, image) -> DecoderOutput:
        image = as_tensor(image)
        x = (image - INPUT_MEAN) * (1.0 / INPUT_STD)
        features = self.encoder(x)
        return self.decoder(features, image.shape[2:])

    def param_groups(self) -> tuple[list[tuple[str, Tensor]], list[tuple[str, Tensor]]]:
        """``(backbone, other)`` named parameters; they train with different learning rates."""
        named = list(self.named_parameters())
        backbone = [(n, p) for n, p in named if n.startswith("encoder.")]
        other = [(n, p) for n, p in named if not n.startswith("encoder.")]
        return backbone, other
