"""Tensor core: ops against hand-written oracles, gradients against central differences."""
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.special import softmax as scipy_softmax

from rfnet.numerics import (
    AdamState,
    Dense,
    NonFiniteError,
    Param,
    ShapeError,
    Tensor,
    adam_step,
    fft_magnitude_slow_time,
    finite_diff_check,
    naive_dft,
    no_grad,
    ops,
    precision,
)
from rfnet.numerics.layers import LSTM

seeds = st.integers(0, 2**31 - 1)


# -- Tensor / Param bookkeeping ---------------------------------------------------------

def test_tensor_shape_and_size_agree():
    t = Tensor(np.arange(12.0).reshape(3, 4))
    assert t.shape == (3, 4) and t.size == 12 and t.dtype == np.float32


def test_precision_context_switches_dtype_and_restores():
    with precision(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


def test_param_partition_is_immutable():
    p = Param(np.zeros(2), partition="meta")
    with pytest.raises(AttributeError):
        p.partition = "base"
    with pytest.raises(ValueError):
        Param(np.zeros(2), partition="other")


def test_unnamed_params_get_distinct_ids():
    assert Param(np.zeros(1)).id != Param(np.zeros(1)).id


def test_gradients_accumulate_until_zeroed():
    with precision(np.float64):
        p = Param(np.array([2.0]))
        for _ in range(2):
            ops.sum(ops.square(p)).backward()
        assert p.grad[0] == pytest.approx(8.0)
        p.zero_grad()
        assert p.grad is None


def test_backward_from_non_finite_loss_raises():
    p = Param(np.array([0.0]))
    with pytest.raises(NonFiniteError), np.errstate(divide="ignore"):
        ops.sum(ops.log(p)).backward()


def test_no_grad_records_no_graph():
    p = Param(np.ones(3))
    with no_grad():
        out = ops.sum(p * 2.0)
    assert out._backward is None


# -- dense -------------------------------------------------------------------------------

def test_dense_identity_weight():
    out = ops.dense(Tensor([[1.0, 2.0]]), Param(np.eye(2)), Param(np.zeros(2)))
    np.testing.assert_array_equal(out.data, [[1.0, 2.0]])


def test_dense_zero_input_gives_bias_rows():
    out = ops.dense(Tensor(np.zeros((3, 5))), Param(np.ones((5, 2))), Param(np.array([3.0, 4.0])))
    np.testing.assert_array_equal(out.data, [[3.0, 4.0]] * 3)


def test_dense_matches_triple_loop(rng):
    x, w, b = rng.standard_normal((3, 4)), rng.standard_normal((4, 2)), rng.standard_normal(2)
    ref = np.zeros((3, 2))
    for i in range(3):
        for j in range(2):
            ref[i, j] = b[j] + sum(x[i, k] * w[k, j] for k in range(4))
    with precision(np.float64):
        out = ops.dense(Tensor(x), Param(w), Param(b)).data
    assert np.max(np.abs(out - ref) / np.abs(ref)) < 1e-12


def test_dense_shape_mismatch():
    with pytest.raises(ShapeError):
        ops.dense(Tensor(np.zeros((2, 3))), Param(np.zeros((4, 2))))


# -- conv2d --------------------------------------------------------------------------------

def _conv_oracle(x, k, stride, pad):
    x = np.pad(x, ((0, 0), (pad, pad), (pad, pad)))
    co, ci, kh, kw = k.shape
    H = (x.shape[1] - kh) // stride + 1
    W = (x.shape[2] - kw) // stride + 1
    out = np.zeros((co, H, W))
    for o in range(co):
        for i in range(H):
            for j in range(W):
                s = 0.0
                for c in range(ci):
                    for u in range(kh):
                        for v in range(kw):
                            s += x[c, i * stride + u, j * stride + v] * k[o, c, u, v]
                out[o, i, j] = s
    return out


def test_conv_identity_kernel(rng):
    x = rng.standard_normal((1, 4, 5))
    with precision(np.float64):
        out = ops.conv2d(Tensor(x), Param(np.ones((1, 1, 1, 1))))
    np.testing.assert_array_equal(out.data, x)


def test_conv_zero_input(rng):
    out = ops.conv2d(Tensor(np.zeros((2, 5, 5))), Param(rng.standard_normal((3, 2, 3, 3))))
    assert not out.data.any()


@pytest.mark.parametrize("stride,pad", [(1, 0), (1, 1), (2, 0), (2, 1)])
def test_conv_matches_nested_sum(rng, stride, pad):
    x, k = rng.standard_normal((2, 5, 5)), rng.standard_normal((3, 2, 3, 3))
    with precision(np.float64):
        out = ops.conv2d(Tensor(x), Param(k), stride=stride, padding=pad).data
    ref = _conv_oracle(x, k, stride, pad)
    assert out.shape == ref.shape == (3, (5 + 2 * pad - 3) // stride + 1, (5 + 2 * pad - 3) // stride + 1)
    assert np.max(np.abs(out - ref)) / np.max(np.abs(ref)) < 1e-12


def test_conv_kernel_larger_than_padded_input():
    with pytest.raises(ShapeError):
        ops.conv2d(Tensor(np.zeros((1, 2, 2))), Param(np.zeros((1, 1, 3, 3))))


# -- LSTM ----------------------------------------------------------------------------------

def test_lstm_all_zero_weights_give_zero_states(rng):
    h = 3
    out = ops.lstm(Tensor(rng.standard_normal((6, 4))), Param(np.zeros((4, 4 * h))), Param(np.zeros((h, 4 * h))),
                   Param(np.zeros(4 * h)))
    assert out.shape == (6, h) and not out.data.any()


def test_lstm_single_step_matches_closed_form(rng):
    d, h = 3, 2
    x, w_ih, w_hh, b = (rng.standard_normal(s) for s in ((1, d), (d, 4 * h), (h, 4 * h), (4 * h,)))
    h0, c0 = rng.standard_normal(h), rng.standard_normal(h)
    z = x[0] @ w_ih + h0 @ w_hh + b
    sig = lambda v: 1 / (1 + np.exp(-v))  # noqa: E731
    i, f, g, o = sig(z[:h]), sig(z[h:2 * h]), np.tanh(z[2 * h:3 * h]), sig(z[3 * h:])
    ref = o * np.tanh(f * c0 + i * g)
    with precision(np.float64):
        out = ops.lstm(Tensor(x), Param(w_ih), Param(w_hh), Param(b), Tensor(h0), Tensor(c0)).data[0]
    assert np.max(np.abs(out - ref) / np.abs(ref)) < 1e-12


def test_lstm_constant_input_converges():
    with precision(np.float64):
        cell = LSTM(3, 4, np.random.default_rng(0))
        hs = cell(Tensor(np.tile([0.3, -0.2, 0.5], (50, 1)))).data
    assert np.linalg.norm(hs[-1] - hs[-2]) < np.linalg.norm(hs[1] - hs[0])


# -- softmax / cross-entropy -----------------------------------------------------------------

def test_softmax_examples():
    np.testing.assert_allclose(ops.softmax(Tensor([0.0, 0.0])).data, [0.5, 0.5])
    with precision(np.float64):
        np.testing.assert_allclose(ops.softmax(Tensor([math.log(2), 0.0])).data, [2 / 3, 1 / 3], atol=1e-15)


@given(seeds, st.floats(-50, 50))
def test_softmax_shift_invariant_and_normalised(seed, c):
    v = np.random.default_rng(seed).standard_normal(7) * 5
    with precision(np.float64):
        a = ops.softmax(Tensor(v)).data
        b = ops.softmax(Tensor(v + c)).data
    np.testing.assert_allclose(a, b, atol=1e-12)
    np.testing.assert_allclose(a, scipy_softmax(v), atol=1e-12)
    assert np.all(a >= 0) and abs(a.sum() - 1) < 1e-9


def test_cross_entropy_against_direct_formula(rng):
    logits, labels = rng.standard_normal((5, 4)), rng.integers(0, 4, 5)
    ref = np.mean([-math.log(math.exp(row[y]) / sum(math.exp(v) for v in row)) for row, y in zip(logits, labels)])
    with precision(np.float64):
        got = float(ops.cross_entropy(Tensor(logits), labels).data)
    assert abs(got - ref) / ref < 1e-12


# -- cosine similarity ----------------------------------------------------------------------------

def test_cosine_zero_vector_is_zero_with_warning():
    with pytest.warns(RuntimeWarning):
        out = ops.cosine_similarity(Tensor([0.0, 0.0]), Tensor([1.0, 2.0]))
    assert float(out.data) == 0.0


# -- FFT --------------------------------------------------------------------------------------------

def test_fft_constant_column():
    K, c = 16, 2.5
    out = fft_magnitude_slow_time(np.full((K, 3, 2), c, dtype=np.float64))
    assert np.allclose(out[0], K * c, atol=1e-9) and np.allclose(out[1:], 0, atol=1e-9)


def test_fft_cosine_peaks():
    K = 64
    col = np.cos(2 * np.pi * np.arange(K) * 3 / K)
    out = fft_magnitude_slow_time(col[:, None, None])[:, 0, 0]
    assert abs(out[3] - K / 2) < 1e-6 and abs(out[K - 3] - K / 2) < 1e-6
    assert np.argsort(out)[-2:].tolist() in ([3, K - 3], [K - 3, 3])


@given(seeds, st.integers(1, 128))
def test_fft_matches_naive_dft(seed, K):
    col = np.random.default_rng(seed).standard_normal(K)
    ref = np.abs(naive_dft(col))
    out = fft_magnitude_slow_time(col[:, None, None])[:, 0, 0]
    assert np.max(np.abs(out - ref)) <= 1e-6 * max(np.max(ref), 1e-12)


def test_fft_keeps_shape_and_dtype(rng):
    x = rng.standard_normal((10, 4, 2)).astype(np.float32)
    out = fft_magnitude_slow_time(x)
    assert out.shape == x.shape and out.dtype == np.float32


# -- Adam -------------------------------------------------------------------------------------------

def test_adam_first_step_moves_by_lr():
    p = Param(np.array([0.0]), dtype=np.float64)
    p.grad = np.array([1.0])
    adam_step([p], AdamState(lr=0.1))
    assert p.data[0] == pytest.approx(-0.1, rel=1e-6)
    assert p.grad is None


def test_adam_zero_gradient_leaves_params():
    p = Param(np.array([1.5, -2.0]))
    before = p.data.copy()
    p.grad = np.zeros(2)
    adam_step([p], AdamState(lr=0.1))
    np.testing.assert_array_equal(p.data, before)


def test_adam_minimises_square():
    with precision(np.float64):
        p = Param(np.array([1.0]))
        state = AdamState(lr=0.1)
        for _ in range(100):
            ops.sum(ops.square(p)).backward()
            adam_step([p], state)
    assert abs(p.data[0]) < 0.05


def test_adam_rejects_non_finite_gradient_naming_param():
    p = Param(np.zeros(2), id="layer.w")
    p.grad = np.array([1.0, np.nan])
    with pytest.raises(NonFiniteError, match="layer.w"):
        adam_step([p], AdamState())


def test_adam_keeps_separate_moments_per_param():
    a, b = Param(np.zeros(1), dtype=np.float64), Param(np.zeros(1), dtype=np.float64)
    state = AdamState(lr=0.1)
    a.grad, b.grad = np.array([1.0]), np.array([-1.0])
    adam_step([a, b], state)
    assert a.data[0] == pytest.approx(-0.1) and b.data[0] == pytest.approx(0.1)


# -- gradient checks ----------------------------------------------------------------------------------

def test_gradcheck_linear_loss_is_exact(rng):
    # dyadic values and step keep every floating-point operation exact
    with precision(np.float64):
        p, w = Param(rng.integers(-64, 64, 5) / 8.0), rng.integers(-9, 10, 5).astype(float)
        assert finite_diff_check(lambda: ops.sum(p * w), [p], h=2.0**-20) < 1e-10


def test_gradcheck_quadratic_loss(rng):
    with precision(np.float64):
        p = Param(rng.standard_normal(5))
        assert finite_diff_check(lambda: ops.sum(ops.square(p)) * 0.5, [p], h=1e-5) < 1e-7


def _random_layer_case(seed):
    """One randomly shaped layer stack with its params and a scalar loss."""
    r = np.random.default_rng(seed)
    kind = seed % 6
    if kind == 0:
        n, a, b = r.integers(1, 5, 3)
        x, layer = Param(r.standard_normal((n, a))), Dense(int(a), int(b), r)
        return [x, *layer.parameters()], lambda: ops.sum(ops.tanh(layer(x)) * 1.3)
    if kind == 1:
        c, h, w = r.integers(1, 3), r.integers(3, 6), r.integers(3, 6)
        x, k, bias = Param(r.standard_normal((c, h, w))), Param(r.standard_normal((2, c, 2, 2))), Param(r.standard_normal(2))
        stride, pad = int(r.integers(1, 3)), int(r.integers(0, 2))
        return [x, k, bias], lambda: ops.sum(ops.square(ops.conv2d(x, k, bias, stride=stride, padding=pad)))
    if kind == 2:
        x = Param(r.standard_normal((1, 2, int(r.integers(2, 7)), int(r.integers(2, 7)))))
        scale = r.standard_normal()
        return [x], lambda: ops.sum(ops.max_pool2d(x) * scale)
    if kind == 3:
        x = Param(r.standard_normal((2, 1, int(r.integers(2, 7)), int(r.integers(2, 7)))))
        weights = r.standard_normal((2, 1, 2, 2))
        return [x], lambda: ops.sum(ops.adaptive_avg_pool2d(x, (2, 2)) * weights)
    if kind == 4:
        K, d, h = (int(v) for v in r.integers(1, 5, 3))
        x = Param(r.standard_normal((K, d)))
        cell = LSTM(d, h, r)
        return [x, *cell.parameters()], lambda: ops.sum(ops.square(cell(x)))
    a, b = Param(r.standard_normal((3, 4))), Param(r.standard_normal((3, 4)))
    labels = r.integers(0, 3, 4)
    return [a, b], lambda: ops.cross_entropy(ops.transpose(ops.cosine_similarity(a[:, :, None], b[:, None, :], axis=0)), labels)


@given(seeds)
def test_every_layer_gradient_matches_central_differences(seed):
    with precision(np.float64):
        params, loss = _random_layer_case(seed)
        assert finite_diff_check(loss, params) < 1e-4


@given(seeds)
def test_ops_are_deterministic(seed):
    r = np.random.default_rng(seed)
    x, k = r.standard_normal((2, 6, 6)), r.standard_normal((3, 2, 3, 3))
    a = ops.max_pool2d(ops.conv2d(Tensor(x), Tensor(k), padding=1)).data
    b = ops.max_pool2d(ops.conv2d(Tensor(x), Tensor(k), padding=1)).data
    assert a.tobytes() == b.tobytes()


def test_finite_diff_check_rejects_bad_step():
    with pytest.raises(ValueError):
        finite_diff_check(lambda: Tensor(0.0), [], h=0)


def test_zero_norm_warning_is_runtime_warning_only():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ops.cosine_similarity(Tensor([1.0, 0.0]), Tensor([0.0, 1.0]))
