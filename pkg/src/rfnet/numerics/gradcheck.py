from __future__ import annotations

import numpy as np


def finite_diff_check(loss_fn, params, h=1e-6, floor=1e-6, max_coords=None, rng=None):
    """Worst relative error between analytic and central-difference gradients.

    ``loss_fn()`` must rebuild the graph from the current parameter values and
    return a scalar Tensor. The relative error of one coordinate is
    ``|a - n| / max(|a|, |n|, floor)``; ``floor`` keeps coordinates whose true
    gradient is ~0 from amplifying roundoff. ``max_coords`` samples a random
    subset of coordinates per parameter.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    params = list(params)
    for p in params:
        p.grad = None
    loss = loss_fn()
    loss.backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    for p in params:
        p.grad = None

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            idx = (rng or np.random.default_rng(0)).choice(flat.size, max_coords, replace=False)
        a_flat = a.reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            fp = float(loss_fn().data)
            flat[i] = orig - h
            fm = float(loss_fn().data)
            flat[i] = orig
            num = (fp - fm) / (2 * h)
            err = abs(a_flat[i] - num) / max(abs(a_flat[i]), abs(num), floor)
            worst = max(worst, err)
    return worst
