from .functional import BatchNormState, activation, batchnorm, conv2d_same, dense, glorot_uniform
from .layers import BatchNorm, Conv2d, Dense, Module
from .optim import Adam, AdamState, adam_step
from .tensor import Tensor, as_tensor, concat, matmul, parameter, stack

__all__ = [
    "Adam", "AdamState", "BatchNorm", "BatchNormState", "Conv2d", "Dense", "Module", "Tensor",
    "activation", "adam_step", "as_tensor", "batchnorm", "concat", "conv2d_same", "dense",
    "glorot_uniform", "matmul", "parameter", "stack",
]
