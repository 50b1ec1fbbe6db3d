from __future__ import annotations

import numpy as np


def fft_magnitude_slow_time(x, axis=0):
    """Per-bin DFT magnitude along the slow-time axis.

    ``x`` is a real (K, L, Nr) signal matrix (or a batch with slow time on
    ``axis``); the result has the same shape and dtype. Bin 0 of a constant
    column ``c`` equals ``K * c``.
    """
    x = np.asarray(x)
    if x.shape[axis] < 1:
        raise ValueError("need at least one slow-time sample")
    out = np.abs(np.fft.fft(x, axis=axis))
    return out.astype(x.dtype if np.issubdtype(x.dtype, np.floating) else np.float64, copy=False)


def naive_dft(column):
    """O(K^2) DFT of a 1-D sequence; reference implementation for tests."""
    column = np.asarray(column, dtype=np.complex128)
    K = len(column)
    k = np.arange(K)
    return np.exp(-2j * np.pi * np.outer(k, k) / K) @ column
