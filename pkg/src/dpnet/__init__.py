"""Dynamic pyramid convolution network for salient object detection, on a small float64 autograd engine."""

from . import kernels, ops
from .dpconv import (DPConvBlock, DPConvSpec, check_lightweight, count_params_pyramid,
                     count_params_standard)
from .gradcheck import grad_check
from .model import DPNet, ModelConfig
from .tensor import ConfigError, ShapeError, Tensor, backward, no_grad

__all__ = [
    "ConfigError", "DPConvBlock", "DPConvSpec", "DPNet", "ModelConfig", "ShapeError", "Tensor",
    "backward", "check_lightweight", "count_params_pyramid", "count_params_standard", "grad_check",
    "kernels", "no_grad", "ops",
]
