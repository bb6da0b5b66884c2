"""Minimal NHWC network engine: layers, losses, Adam, checkpoints, gradient checks."""
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckReport, grad_check
from .layers import (
    Conv2D,
    Dense,
    Dropout,
    GlobalMaxPool,
    Layer,
    MaxPool,
    ReLU,
    Sigmoid,
    Softmax,
    Upsample,
)
from .losses import LossValue, jaccard_loss, nll_loss
from .network import (
    Activations,
    NetworkSpec,
    ParameterStore,
    backward,
    forward,
    init_params,
    param_count,
)
from .optim import adam_step
from . import kernels

__all__ = [
    "Activations", "Checkpoint", "Conv2D", "Dense", "Dropout", "GlobalMaxPool", "GradCheckReport",
    "Layer", "LossValue", "MaxPool", "NetworkSpec", "ParameterStore", "ReLU", "Sigmoid", "Softmax",
    "Upsample", "adam_step", "backward", "forward", "grad_check", "init_params", "jaccard_loss",
    "kernels", "load_checkpoint", "nll_loss", "param_count", "save_checkpoint",
]
