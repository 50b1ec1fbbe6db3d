from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import NonFiniteError


@dataclass
class AdamState:
    lr: float = 1e-3
    b1: float = 0.9
    b2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params, state, grads=None):
    """Apply one bias-corrected Adam update in place and zero the gradients.

    ``grads`` defaults to each param's accumulated ``.grad`` (missing grads
    count as zero). Moments are keyed by param id.
    """
    if state.lr < 0:
        raise ValueError("learning rate must be non-negative")
    params = list(params)
    if grads is None:
        grads = [p.grad for p in params]
    for p, g in zip(params, grads):
        if g is not None and not np.all(np.isfinite(g)):
            raise NonFiniteError(f"non-finite gradient for parameter {p.id!r}")
        if g is not None and g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape} for {p.id!r}")

    state.t += 1
    c1 = 1.0 - state.b1 ** state.t
    c2 = 1.0 - state.b2 ** state.t
    for p, g in zip(params, grads):
        if g is None:
            g = np.zeros_like(p.data)
        m = state.m.get(p.id)
        if m is None:
            m = state.m[p.id] = np.zeros_like(p.data)
            state.v[p.id] = np.zeros_like(p.data)
        v = state.v[p.id]
        m *= state.b1
        m += (1 - state.b1) * g
        v *= state.b2
        v += (1 - state.b2) * g * g
        if state.lr:
            p.data -= (state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)).astype(p.dtype)
        p.grad = None
    return params


def sgd_step(params, lr):
    for p in params:
        if p.grad is not None:
            if not np.all(np.isfinite(p.grad)):
                raise NonFiniteError(f"non-finite gradient for parameter {p.id!r}")
            p.data -= (lr * p.grad).astype(p.dtype)
        p.grad = None
