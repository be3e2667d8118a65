"""Minimal numpy autodiff and the UNet / WaveNet separators."""

from .autograd import Tensor
from .functional import conv1d_backward, conv1d_forward, gated_unit, mse_loss, receptive_field
from .models import (
    Conv1d,
    UNet,
    UNetConfig,
    WaveNet,
    WaveNetConfig,
    build_model,
    dilation_schedule,
    from_channels,
    to_channels,
    wavenet_receptive_field,
)
from .optim import AdamHyper, adam_init, adam_step
from .training import TrainConfig, TrainingDiverged, TrainResult, augment, evaluate_mse, train

__all__ = [
    "Tensor",
    "conv1d_forward",
    "conv1d_backward",
    "gated_unit",
    "mse_loss",
    "receptive_field",
    "Conv1d",
    "UNet",
    "UNetConfig",
    "WaveNet",
    "WaveNetConfig",
    "build_model",
    "dilation_schedule",
    "wavenet_receptive_field",
    "to_channels",
    "from_channels",
    "AdamHyper",
    "adam_init",
    "adam_step",
    "TrainConfig",
    "TrainResult",
    "TrainingDiverged",
    "augment",
    "evaluate_mse",
    "train",
]
