"""Minimal reverse-mode differentiable tensor library."""
from .tensor import OpGraph, Tensor, as_tensor, backward, grad_enabled, no_grad
from .ops import (
    DimensionError,
    activation,
    add,
    channel_scale,
    clamp,
    concat,
    conv2d,
    conv_transpose2d,
    cosine_similarity,
    exp,
    global_avg_pool,
    leaky_relu,
    linear,
    log,
    matmul,
    maxpool2d,
    mean,
    mish,
    mul,
    outer_sum,
    relu,
    reshape,
    sigmoid,
    softmax,
    softplus,
    tanh,
    transpose,
)
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "OpGraph", "Tensor", "as_tensor", "backward", "grad_enabled", "no_grad",
    "DimensionError", "activation", "add", "channel_scale", "clamp", "concat", "conv2d",
    "conv_transpose2d", "cosine_similarity", "exp", "global_avg_pool", "leaky_relu", "linear",
    "log", "matmul", "maxpool2d", "mean", "mish", "mul", "outer_sum", "relu", "reshape",
    "sigmoid", "softmax", "softplus", "tanh", "transpose", "GradCheckReport", "grad_check",
]
