"""Parameter containers for the standard layers."""
from __future__ import annotations

import numpy as np

from . import ops
from .tensor import Param, default_dtype


def fan_in_uniform(rng, shape, fan_in, dtype=None):
    bound = np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype or default_dtype())


class Module:
    """Minimal container: attributes that are Params or Modules are registered
    in assignment order and named by their attribute path."""

    def named_parameters(self, prefix=""):
        seen = set()
        for name, value in vars(self).items():
            if name.startswith("_"):
                continue
            path = f"{prefix}{name}"
            if isinstance(value, (list, tuple)):
                entries = [(f"{path}.{i}", item) for i, item in enumerate(value)]
            else:
                entries = [(path, value)]
            for sub, item in entries:
                if isinstance(item, Param):
                    if id(item) not in seen:
                        seen.add(id(item))
                        yield sub, item
                elif isinstance(item, Module):
                    for n, p in item.named_parameters(prefix=f"{sub}."):
                        if id(p) not in seen:
                            seen.add(id(p))
                            yield n, p

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def _name_params(self):
        for name, p in self.named_parameters():
            p.id = name

    def num_parameters(self):
        return sum(p.size for p in self.parameters())


class Dense(Module):
    def __init__(self, n_in, n_out, rng, bias=True):
        self.weight = Param(fan_in_uniform(rng, (n_in, n_out), n_in))
        self.bias = Param(np.zeros(n_out)) if bias else None

    def __call__(self, x):
        return ops.dense(x, self.weight, self.bias)


class Conv2d(Module):
    def __init__(self, c_in, c_out, kernel, rng, stride=1, padding=0):
        fan_in = c_in * kernel * kernel
        self.weight = Param(fan_in_uniform(rng, (c_out, c_in, kernel, kernel), fan_in))
        self.bias = Param(np.zeros(c_out))
        self.stride = stride
        self.padding = padding

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias, stride=self.stride, padding=self.padding)


class LSTM(Module):
    def __init__(self, d_in, hidden, rng):
        bound = 1.0 / np.sqrt(hidden)
        dt = default_dtype()
        self.w_ih = Param(rng.uniform(-bound, bound, (d_in, 4 * hidden)).astype(dt))
        self.w_hh = Param(rng.uniform(-bound, bound, (hidden, 4 * hidden)).astype(dt))
        self.bias = Param(np.zeros(4 * hidden))
        self.hidden = hidden

    def __call__(self, x, h0=None, c0=None):
        return ops.lstm(x, self.w_ih, self.w_hh, self.bias, h0, c0)
