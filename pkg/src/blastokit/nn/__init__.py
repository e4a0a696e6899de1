"""Numeric layer kernels, optimizer, schedule and checkpoint format."""
from .adam import AdamState, adam_step, lr_schedule
from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BatchNorm,
    Conv3x3,
    Dense,
    DepthConcat,
    Dropout,
    LSTM,
    Param,
    Pool,
    ReLU,
    SoftmaxXent,
    softmax,
)

__all__ = [
    "AdamState",
    "adam_step",
    "lr_schedule",
    "load_checkpoint",
    "save_checkpoint",
    "BatchNorm",
    "Conv3x3",
    "Dense",
    "DepthConcat",
    "Dropout",
    "LSTM",
    "Param",
    "Pool",
    "ReLU",
    "SoftmaxXent",
    "softmax",
]
