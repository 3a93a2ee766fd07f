"""Minimal autodiff engine and the MiniDense classifier."""

from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .gradcheck import grad_check, grad_check_report
from .model import MiniDense, ModelSpec, backward, forward, images_to_inputs, predict
from .tensor import (Tensor, avg_pool2d, concat_channels, conv2d, global_avg_pool, linear,
                     relu, softmax, softmax_cross_entropy)

__all__ = [
    "CheckpointError", "MiniDense", "ModelSpec", "Tensor", "avg_pool2d", "backward",
    "concat_channels", "conv2d", "forward", "global_avg_pool", "grad_check",
    "grad_check_report", "images_to_inputs", "linear", "load_checkpoint", "predict", "relu",
    "save_checkpoint", "softmax", "softmax_cross_entropy",
]
