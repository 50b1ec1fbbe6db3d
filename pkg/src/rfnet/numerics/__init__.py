"""Dense tensors, reverse-mode differentiation, layers and optimizers."""
from . import ops
from .fft import fft_magnitude_slow_time, naive_dft
from .gradcheck import finite_diff_check
from .layers import LSTM, Conv2d, Dense, Module
from .ops import ShapeError, softmax
from .optim import AdamState, adam_step, sgd_step
from .tensor import (
    NonFiniteError,
    Param,
    Tensor,
    default_dtype,
    grad_enabled,
    no_grad,
    precision,
    set_default_dtype,
)

__all__ = [
    "ops", "Tensor", "Param", "Module", "Dense", "Conv2d", "LSTM",
    "AdamState", "adam_step", "sgd_step", "finite_diff_check",
    "fft_magnitude_slow_time", "naive_dft", "softmax", "ShapeError",
    "NonFiniteError", "no_grad", "grad_enabled", "precision",
    "default_dtype", "set_default_dtype",
]
