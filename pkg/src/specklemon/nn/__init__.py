"""Minimal dense-tensor layer stack with explicit backward passes."""

from .checkpoint import (
    CheckpointChecksumError,
    CheckpointError,
    CheckpointTruncatedError,
    CheckpointVersionError,
    read_checkpoint,
    write_checkpoint,
)
from .layers import Conv2d, Dense, Flatten, Layer, LayerError, MaxPool2d, ReLU, ResidualBlock
from .losses import LossError, RMSE_EPS, rmse_loss, softmax_xent
from .optim import Adam, OptimError
from .tensor import Tensor

__all__ = [
    "Tensor",
    "Layer",
    "LayerError",
    "Conv2d",
    "ReLU",
    "MaxPool2d",
    "Dense",
    "Flatten",
    "ResidualBlock",
    "LossError",
    "RMSE_EPS",
    "softmax_xent",
    "rmse_loss",
    "Adam",
    "OptimError",
    "CheckpointError",
    "CheckpointVersionError",
    "CheckpointTruncatedError",
    "CheckpointChecksumError",
    "write_checkpoint",
    "read_checkpoint",
]
