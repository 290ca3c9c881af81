"""Training, evaluation and reporting around the network."""

from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint
from .config import TrainConfig, load_config
from .optim import SGD, lr_schedule, sgd_step
from .train import DatasetError, TrainResult, train

__all__ = [
    "Checkpoint", "CheckpointError", "DatasetError", "SGD", "TrainConfig", "TrainResult",
    "load_checkpoint", "load_config", "lr_schedule", "save_checkpoint", "sgd_step", "train",
]
