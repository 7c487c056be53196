from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .functional import (conv1d, conv1d_output_length, cross_entropy, layer_norm, log_softmax,
                         masked_softmax, mse, softmax, upsample_nearest)
from .module import LayerNorm, Linear, Module, param
from .optim import AdamW, OptimizerState, adamw_step, step_decay_lr
from .rng import make_rng
from .tensor import NonFiniteError, Tensor, concat, matmul, no_grad, stack, take, tensor, where

__all__ = [
    "AdamW", "CheckpointError", "LayerNorm", "Linear", "Module", "NonFiniteError",
    "OptimizerState", "Tensor", "adamw_step", "concat", "conv1d", "conv1d_output_length",
    "cross_entropy", "layer_norm", "load_checkpoint", "log_softmax", "make_rng",
    "masked_softmax", "matmul", "mse", "no_grad", "param", "save_checkpoint", "softmax",
    "stack", "step_decay_lr", "take", "tensor", "upsample_nearest", "where",
]
