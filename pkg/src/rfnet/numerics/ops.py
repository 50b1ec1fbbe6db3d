"""Differentiable operations on :class:`~rfnet.numerics.tensor.Tensor`.

Every function accepts tensors or array-likes and supports leading batch
dimensions where that makes sense. Backward closures return one gradient per
parent (``None`` for parents that need none).
"""
from __future__ import annotations

import warnings

import numpy as np

from .tensor import Tensor, as_tensor, make_result


class ShapeError(ValueError):
    """Operand dimensions are incompatible."""


def _pair(a, b):
    a = as_tensor(a)
    if not isinstance(b, Tensor):
        b = Tensor(b, dtype=a.dtype)
    return a, b


def unbroadcast(grad, shape):
    """Sum ``grad`` down to ``shape`` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad.reshape(shape)


# -- elementwise arithmetic -------------------------------------------------

def add(a, b):
    a, b = _pair(a, b)
    return make_result(a.data + b.data, (a, b),
                       lambda g: (unbroadcast(g, a.shape), unbroadcast(g, b.shape)))


def sub(a, b):
    if not isinstance(a, Tensor):
        b = as_tensor(b)
        a = Tensor(a, dtype=b.dtype)
    a, b = _pair(a, b)
    return make_result(a.data - b.data, (a, b),
                       lambda g: (unbroadcast(g, a.shape), unbroadcast(-g, b.shape)))


def mul(a, b):
    a, b = _pair(a, b)

    def backward(g):
        return unbroadcast(g * b.data, a.shape), unbroadcast(g * a.data, b.shape)

    return make_result(a.data * b.data, (a, b), backward)


def div(a, b):
    a, b = _pair(a, b)

    def backward(g):
        ga = g / b.data
        return unbroadcast(ga, a.shape), unbroadcast(-ga * a.data / b.data, b.shape)

    return make_result(a.data / b.data, (a, b), backward)


def exp(x):
    x = as_tensor(x)
    out = np.exp(x.data)
    return make_result(out, (x,), lambda g: (g * out,))


def log(x):
    x = as_tensor(x)
    return make_result(np.log(x.data), (x,), lambda g: (g / x.data,))


def square(x):
    x = as_tensor(x)
    return make_result(x.data * x.data, (x,), lambda g: (2.0 * g * x.data,))


# -- activations ---------------------------------------------------------------

def relu(x):
    x = as_tensor(x)
    mask = x.data > 0
    return make_result(np.where(mask, x.data, 0).astype(x.dtype), (x,), lambda g: (g * mask,))


def leaky_relu(x, slope=0.01):
    x = as_tensor(x)
    scale = np.where(x.data > 0, 1.0, slope).astype(x.dtype)
    return make_result(x.data * scale, (x,), lambda g: (g * scale,))


def sigmoid(x):
    x = as_tensor(x)
    out = _sigmoid(x.data)
    return make_result(out, (x,), lambda g: (g * out * (1 - out),))


def tanh(x):
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make_result(out, (x,), lambda g: (g * (1 - out * out),))


def identity(x):
    return as_tensor(x)


ACTIVATIONS = {
    "relu": relu,
    "leakyrelu": leaky_relu,
    "sigmoid": sigmoid,
    "tanh": tanh,
    "identity": identity,
}


def activation(name):
    try:
        return ACTIVATIONS[name.lower().replace("_", "")]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


def _sigmoid(v):
    # split by sign so exp never overflows
    out = np.empty_like(v)
    pos = v >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-v[pos]))
    e = np.exp(v[~pos])
    out[~pos] = e / (1.0 + e)
    return out


# -- shape manipulation ----------------------------------------------------------

def reshape(x, shape):
    x = as_tensor(x)
    old = x.shape
    return make_result(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),))


def transpose(x, axes=None):
    x = as_tensor(x)
    if axes is None:
        axes = tuple(reversed(range(x.ndim)))
    inv = np.argsort(axes)
    return make_result(np.transpose(x.data, axes), (x,), lambda g: (np.transpose(g, inv),))


def swapaxes(x, a, b):
    axes = list(range(as_tensor(x).ndim))
    axes[a], axes[b] = axes[b], axes[a]
    return transpose(x, tuple(axes))


def getitem(x, idx):
    x = as_tensor(x)

    key = idx if isinstance(idx, tuple) else (idx,)
    advanced = any(isinstance(k, (np.ndarray, list)) for k in key)

    def backward(g):
        full = np.zeros_like(x.data)
        if advanced:
            np.add.at(full, idx, g)
        else:
            full[idx] += g
        return (full,)

    return make_result(x.data[idx], (x,), backward)


def concat(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    cuts = np.cumsum(sizes)[:-1]
    return make_result(np.concatenate([t.data for t in tensors], axis=axis), tensors,
                       lambda g: tuple(np.split(g, cuts, axis=axis)))


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    n = len(tensors)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(n))

    return make_result(np.stack([t.data for t in tensors], axis=axis), tensors, backward)


# -- reductions ------------------------------------------------------------------

def sum(x, axis=None, keepdims=False):
    x = as_tensor(x)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, x.shape).copy(),)

    return make_result(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward)


def mean(x, axis=None, keepdims=False):
    x = as_tensor(x)
    count = x.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return sum(x, axis=axis, keepdims=keepdims) * (1.0 / count)


# -- linear algebra ----------------------------------------------------------------

def matmul(a, b):
    a, b = _pair(a, b)
    if a.ndim < 1 or b.ndim < 1 or a.shape[-1] != b.shape[-2 if b.ndim > 1 else 0]:
        raise ShapeError(f"matmul inner dimensions disagree: {a.shape} @ {b.shape}")

    def backward(g):
        ad, bd = a.data, b.data
        if not b.requires_grad and ad.ndim > 1 and bd.ndim > 1:
            return unbroadcast(g @ np.swapaxes(bd, -1, -2), a.shape), None
        if not a.requires_grad and ad.ndim > 1 and bd.ndim > 1:
            return None, unbroadcast(np.swapaxes(ad, -1, -2) @ g, b.shape)
        if bd.ndim == 1:
            ga = g[..., None] * bd
            gb = np.einsum("...i,...->i", ad, g)
            return unbroadcast(ga, a.shape), gb
        if ad.ndim == 1:
            ga = g @ np.swapaxes(bd, -1, -2)
            gb = ad[:, None] * g[..., None, :]
            return ga, unbroadcast(gb, b.shape)
        ga = g @ np.swapaxes(bd, -1, -2)
        gb = np.swapaxes(ad, -1, -2) @ g
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return make_result(a.data @ b.data, (a, b), backward)


def dense(x, weight, bias=None):
    """Affine map ``x @ weight + bias`` over the last axis of ``x``."""
    x = as_tensor(x)
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"dense input width {x.shape[-1]} != weight rows {weight.shape[0]}")
    out = matmul(x, weight)
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise ShapeError(f"bias shape {bias.shape} does not match {weight.shape[1]} outputs")
        out = add(out, bias)
    return out


# -- probability ---------------------------------------------------------------------

def softmax(v, axis=-1):
    v = as_tensor(v)
    shifted = v.data - v.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return make_result(out, (v,), backward)


def log_softmax(v, axis=-1):
    v = as_tensor(v)
    shifted = v.data - v.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    soft = np.exp(out)

    def backward(g):
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return make_result(out, (v,), backward)


def cross_entropy(logits, labels):
    """Mean softmax cross-entropy of ``logits`` (n, C) against integer labels."""
    logits = as_tensor(logits)
    labels = np.asarray(labels, dtype=np.int64)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeError(f"cross_entropy expects (n, C) logits and n labels, got {logits.shape}, {labels.shape}")
    logp = log_softmax(logits, axis=-1)
    picked = getitem(logp, (np.arange(len(labels)), labels))
    return mean(picked) * -1.0


# -- similarity -------------------------------------------------------------------------

def cosine_similarity(a, b, axis=-1, eps=0.0):
    """Cosine of the angle between ``a`` and ``b`` along ``axis`` (broadcasting).

    A zero-norm operand yields similarity 0 with zero gradient, and a
    ``RuntimeWarning`` is emitted.
    """
    a, b = _pair(a, b)
    na = np.sqrt((a.data * a.data).sum(axis=axis, keepdims=True))
    nb = np.sqrt((b.data * b.data).sum(axis=axis, keepdims=True))
    dot = (a.data * b.data).sum(axis=axis, keepdims=True)
    denom = na * nb
    degenerate = denom <= eps
    if np.any(degenerate):
        warnings.warn("cosine distance of a zero-norm vector defined as 0", RuntimeWarning, stacklevel=2)
    safe = np.where(degenerate, 1.0, denom)
    na_s = np.where(na == 0, 1.0, na)
    nb_s = np.where(nb == 0, 1.0, nb)
    cos = np.where(degenerate, 0.0, dot / safe).astype(a.dtype)

    def backward(g):
        g = np.expand_dims(g, axis)
        g = np.where(degenerate, 0.0, g)
        ga = g * (b.data / safe - cos * a.data / (na_s * na_s))
        gb = g * (a.data / safe - cos * b.data / (nb_s * nb_s))
        return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)

    return make_result(np.squeeze(cos, axis=axis), (a, b), backward)


# -- convolution and pooling ------------------------------------------------------------

def _windows(x, kh, kw, stride):
    # x: (B, C, H, W) -> view (B, C, H', W', kh, kw)
    v = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(2, 3))
    return v[:, :, ::stride, ::stride]


def conv2d(x, kernels, bias=None, stride=1, padding=0):
    """2-D cross-correlation.

    ``x`` is (C_in, H, W) or (B, C_in, H, W); ``kernels`` is
    (C_out, C_in, kh, kw). Output spatial size is
    ``floor((H + 2p - kh) / stride) + 1``.
    """
    x = as_tensor(x)
    squeeze = x.ndim == 3
    xd = x.data[None] if squeeze else x.data
    if xd.ndim != 4 or kernels.ndim != 4:
        raise ShapeError(f"conv2d expects (B,C,H,W) input and 4-d kernels, got {x.shape}, {kernels.shape}")
    B, C, H, W = xd.shape
    co, ci, kh, kw = kernels.shape
    if ci != C:
        raise ShapeError(f"conv2d input has {C} channels, kernels expect {ci}")
    if kh > H + 2 * padding or kw > W + 2 * padding:
        raise ShapeError(f"kernel {kh}x{kw} larger than padded input {H + 2 * padding}x{W + 2 * padding}")
    if padding:
        xd = np.pad(xd, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    win = _windows(xd, kh, kw, stride)
    Ho, Wo = win.shape[2], win.shape[3]
    out = np.einsum("bchwij,ocij->bohw", win, kernels.data, optimize=True)
    parents = [x, kernels]
    if bias is not None:
        out = out + bias.data[None, :, None, None]
        parents.append(bias)

    def backward(g):
        gk = np.einsum("bohw,bchwij->ocij", g, win, optimize=True)
        gx = np.zeros_like(xd)
        for i in range(kh):
            for j in range(kw):
                gx[:, :, i:i + stride * Ho:stride, j:j + stride * Wo:stride] += np.einsum(
                    "bohw,oc->bchw", g, kernels.data[:, :, i, j], optimize=True)
        if padding:
            gx = gx[:, :, padding:-padding, padding:-padding]
        if squeeze:
            gx = gx[0]
        grads = [gx, gk]
        if bias is not None:
            grads.append(g.sum(axis=(0, 2, 3)))
        return tuple(grads)

    if squeeze:
        out = out[0]
        inner = backward
        backward = lambda g: inner(g[None])  # noqa: E731
    return make_result(out.astype(x.dtype, copy=False), parents, backward)


def max_pool2d(x, size=2, stride=2):
    """Max pooling over the last two axes; ragged edges form partial windows."""
    x = as_tensor(x)
    *lead, H, W = x.shape
    Ho = -(-max(H - size, 0) // stride) + 1
    Wo = -(-max(W - size, 0) // stride) + 1
    ph = max((Ho - 1) * stride + size - H, 0)
    pw = max((Wo - 1) * stride + size - W, 0)
    xd = x.data.reshape(-1, 1, H, W)
    if ph or pw:
        xd = np.pad(xd, ((0, 0), (0, 0), (0, ph), (0, pw)), constant_values=-np.inf)
    win = _windows(xd, size, size, stride)[:, 0].reshape(xd.shape[0], Ho, Wo, size * size)
    arg = win.argmax(axis=-1)
    out = np.take_along_axis(win, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        g = g.reshape(-1, Ho, Wo)
        gx = np.zeros(xd.shape[:1] + xd.shape[2:], dtype=g.dtype)
        n, oh, ow = np.meshgrid(np.arange(g.shape[0]), np.arange(Ho), np.arange(Wo), indexing="ij")
        rows = oh * stride + arg // size
        cols = ow * stride + arg % size
        np.add.at(gx, (n, rows, cols), g)
        return (gx[:, :H, :W].reshape(x.shape),)

    return make_result(out.reshape(*lead, Ho, Wo), (x,), backward)


def _bin_matrix(n_in, n_out, dtype):
    m = np.zeros((n_out, n_in), dtype=dtype)
    for i in range(n_out):
        lo = (i * n_in) // n_out
        hi = -(-((i + 1) * n_in) // n_out)
        m[i, lo:hi] = 1.0 / (hi - lo)
    return m


def adaptive_avg_pool2d(x, out_size):
    """Average the last two axes into an ``out_size`` grid of (possibly overlapping) bins."""
    x = as_tensor(x)
    oh, ow = out_size
    ph = Tensor(_bin_matrix(x.shape[-2], oh, x.dtype), dtype=x.dtype)
    pw = Tensor(_bin_matrix(x.shape[-1], ow, x.dtype).T, dtype=x.dtype)
    return matmul(matmul(ph, x), pw)


# -- recurrent --------------------------------------------------------------------------

def lstm(x, w_ih, w_hh, bias, h0=None, c0=None):
    """Run an LSTM over the step axis of ``x`` and return every hidden state.

    ``x`` is (K, d_in) or (B, K, d_in); weights are (d_in, 4h) and (h, 4h)
    with gate blocks ordered input, forget, candidate, output.
    """
    x = as_tensor(x)
    squeeze = x.ndim == 2
    xd = x.data[None] if squeeze else x.data
    B, K, d_in = xd.shape
    if K < 1:
        raise ShapeError("lstm needs at least one step")
    if w_ih.shape[0] != d_in:
        raise ShapeError(f"lstm input width {d_in} != w_ih rows {w_ih.shape[0]}")
    hdim = w_hh.shape[0]
    dt = x.dtype
    # initial states are constants (zero unless given)
    h = np.zeros((B, hdim), dt) if h0 is None else np.broadcast_to(as_tensor(h0).data.astype(dt), (B, hdim)).copy()
    c = np.zeros((B, hdim), dt) if c0 is None else np.broadcast_to(as_tensor(c0).data.astype(dt), (B, hdim)).copy()
    h_init = h.copy()
    c_init = c.copy()

    pre_x = xd @ w_ih.data + bias.data
    hs = np.empty((B, K, hdim), dt)
    cs = np.empty((B, K, hdim), dt)
    gates = np.empty((B, K, 4 * hdim), dt)
    for k in range(K):
        z = pre_x[:, k] + h @ w_hh.data
        i = _sigmoid(z[:, :hdim])
        f = _sigmoid(z[:, hdim:2 * hdim])
        gg = np.tanh(z[:, 2 * hdim:3 * hdim])
        o = _sigmoid(z[:, 3 * hdim:])
        c = f * c + i * gg
        h = o * np.tanh(c)
        gates[:, k] = np.concatenate([i, f, gg, o], axis=1)
        hs[:, k] = h
        cs[:, k] = c

    def backward(g):
        g = g[None] if squeeze else g
        dpre = np.empty_like(gates)
        dh_next = np.zeros((B, hdim), dt)
        dc_next = np.zeros((B, hdim), dt)
        for k in range(K - 1, -1, -1):
            i, f, gg, o = np.split(gates[:, k], 4, axis=1)
            c_prev = cs[:, k - 1] if k > 0 else c_init
            tc = np.tanh(cs[:, k])
            dh = g[:, k] + dh_next
            do = dh * tc
            dc = dh * o * (1 - tc * tc) + dc_next
            di = dc * gg
            df = dc * c_prev
            dg = dc * i
            dc_next = dc * f
            dpre[:, k] = np.concatenate(
                [di * i * (1 - i), df * f * (1 - f), dg * (1 - gg * gg), do * o * (1 - o)], axis=1)
            dh_next = dpre[:, k] @ w_hh.data.T
        h_prev = np.concatenate([h_init[:, None], hs[:, :-1]], axis=1)
        gx = dpre @ w_ih.data.T
        g_ih = np.einsum("bki,bkj->ij", xd, dpre)
        g_hh = np.einsum("bki,bkj->ij", h_prev, dpre)
        g_b = dpre.sum(axis=(0, 1))
        return (gx[0] if squeeze else gx), g_ih, g_hh, g_b

    return make_result(hs[0] if squeeze else hs, (x, w_ih, w_hh, bias), backward)
