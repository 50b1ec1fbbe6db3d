"""Dual-path network: shape contracts, structural identities and gradient checks."""
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rfnet.base_network import BaseNetConfig, BaseNetwork, base_forward, bilinear_attention
from rfnet.harness.selftest import TOY_NET
from rfnet.numerics import finite_diff_check, no_grad, ops, precision

DEFAULT = BaseNetConfig()


def toy(**kw):
    return BaseNetConfig(**{**TOY_NET, **kw})


def zero_all_biases(net):
    for name, p in net.named_parameters():
        if name.endswith("bias"):
            p.data[...] = 0


def softmax_rows(s):
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


@pytest.fixture(scope="module")
def default_net():
    return BaseNetwork(DEFAULT, seed=0)


@pytest.fixture
def x_default(rng):
    return rng.standard_normal((3, DEFAULT.K, DEFAULT.L, DEFAULT.Nr)).astype(np.float32)


# -- config -------------------------------------------------------------------------------

@pytest.mark.parametrize("kw", [{"hidden": 0}, {"attn_hidden": 0}, {"spatial_mode": "stack"},
                                {"activation": "gelu"}])
def test_config_rejects_invalid(kw):
    with pytest.raises(ValueError):
        BaseNetConfig(**kw)


def test_unimplemented_backbone():
    with pytest.raises(NotImplementedError):
        BaseNetConfig(backbone="resnet18")


def test_config_dict_round_trip():
    cfg = toy(spatial_mode="separate", share_backbone=True)
    text = {k: ",".join(map(str, v)) if isinstance(v, tuple) else str(v) for k, v in cfg.to_dict().items()}
    assert BaseNetConfig.from_dict(text) == cfg


def test_parameters_registered_once_with_unique_names(default_net):
    names = [n for n, _ in default_net.named_parameters()]
    assert len(names) == len(set(names))
    assert len({id(p) for p in default_net.parameters()}) == len(names)
    assert default_net.classifier.shape == (2 * DEFAULT.hidden, DEFAULT.n_classes)
    assert default_net.attn_weight.shape == (DEFAULT.K, DEFAULT.attn_hidden)


# -- shapes ----------------------------------------------------------------------------------

def test_forward_shapes(default_net, x_default):
    logits, feats = default_net(x_default)
    a = DEFAULT.hidden
    assert logits.shape == (3, 6)
    assert feats.h_time.shape == feats.h_freq.shape == (3, a)
    assert feats.h_fuse.shape == (3, 2 * a)
    assert all(np.isfinite(t.data).all() for t in feats.as_list())


def test_single_matrix_forward_matches_batch(default_net, x_default):
    logits, feats = base_forward(x_default[1], default_net)
    batch_logits, batch_feats = default_net(x_default)
    assert logits.shape == (6,)
    np.testing.assert_allclose(logits.data, batch_logits.data[1], rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(feats.h_fuse.data, batch_feats.h_fuse.data[1], rtol=1e-5, atol=1e-6)


def test_wrong_input_shape_rejected(default_net):
    with pytest.raises(ops.ShapeError):
        default_net(np.zeros((1, DEFAULT.K, DEFAULT.L + 1, DEFAULT.Nr)))


def test_spatial_rejects_mismatched_inputs(default_net):
    with pytest.raises(ops.ShapeError):
        default_net.spatial(np.zeros((1, 64, 16, 2)), np.zeros((1, 64, 16, 1)))


@pytest.mark.parametrize("mode", ["fuse", "separate"])
def test_spatial_output_is_two_alpha(mode, x_default):
    net = BaseNetwork(BaseNetConfig(spatial_mode=mode), seed=1)
    xf = net.frequency_input(x_default)
    assert net.spatial(x_default, xf).shape == (3, 2 * DEFAULT.hidden)


def test_temporal_shapes(default_net, x_default):
    xf = default_net.frequency_input(x_default)
    ht, hf = default_net.temporal(x_default, xf)
    assert ht.shape == hf.shape == (3, DEFAULT.K, DEFAULT.hidden)


# -- structural identities -------------------------------------------------------------------------

@pytest.mark.parametrize("mode", ["fuse", "separate"])
def test_zero_input_with_zero_biases_gives_zero_spatial_output(mode):
    net = BaseNetwork(BaseNetConfig(spatial_mode=mode), seed=2)
    zero_all_biases(net)
    z = np.zeros((2, DEFAULT.K, DEFAULT.L, DEFAULT.Nr))
    assert not net.spatial(z, z).data.any()


def test_compose_zero_inputs_give_zero(default_net):
    z = np.zeros((2, DEFAULT.hidden), dtype=np.float32)
    assert not default_net.compose(z, z).data.any()   # biases are zero at init


def test_compose_matches_hand_computation():
    with precision(np.float64):
        net = BaseNetwork(toy(hidden=2, activation="relu"), seed=0)
        net.compose_time.weight.data[...] = [[1.0, -2.0], [0.5, 1.0]]
        net.compose_time.bias.data[...] = [0.1, 0.0]
        net.compose_freq.weight.data[...] = [[-1.0, 0.0], [2.0, 3.0]]
        net.compose_freq.bias.data[...] = [0.0, -0.5]
        net.compose_out.weight.data[...] = np.arange(16.0).reshape(4, 4) / 8
        net.compose_out.bias.data[...] = [1.0, 0.0, -1.0, 0.5]
        ht, hf = np.array([[2.0, 1.0]]), np.array([[1.0, 1.0]])
        out = net.compose(ht, hf).data[0]
    # hand-unrolled: relu(ht W_t + b_t) = relu([2.6, -3.0]) = [2.6, 0]
    #                relu(hf W_f + b_f) = relu([1.0, 2.5])  = [1.0, 2.5]
    m = np.array([2.6, 0.0, 1.0, 2.5])
    want = [sum(m[i] * (4 * i + j) / 8 for i in range(4)) + b for j, b in enumerate([1.0, 0.0, -1.0, 0.5])]
    np.testing.assert_array_equal(out, want)


def test_fuse_is_sum_of_temporal_and_spatial(default_net, x_default):
    trace = {}
    _, feats = default_net(x_default, trace=trace)
    np.testing.assert_array_equal(feats.h_fuse.data, (trace["h_temp"] + trace["h_spat"]).data)


def test_zeroed_post_attention_layers_give_identity_residual(x_default):
    net = BaseNetwork(DEFAULT, seed=4)
    for layer in (net.post_time, net.post_freq):
        layer.weight.data[...] = 0
        layer.bias.data[...] = 0
    trace = {}
    net(x_default, trace=trace)
    np.testing.assert_array_equal(trace["h_time_seq"].data, trace["h_time_lstm"].data)
    np.testing.assert_array_equal(trace["h_freq_seq"].data, trace["h_freq_lstm"].data)


def test_zeroed_post_and_compose_layers_reduce_features(x_default):
    net = BaseNetwork(DEFAULT, seed=5)
    for layer in (net.post_time, net.post_freq, net.compose_time, net.compose_freq, net.compose_out):
        layer.weight.data[...] = 0
        layer.bias.data[...] = 0
    trace = {}
    _, feats = net(x_default, trace=trace)
    np.testing.assert_array_equal(feats.h_time.data, trace["h_time_lstm"].data[:, -1])
    np.testing.assert_array_equal(feats.h_freq.data, trace["h_freq_lstm"].data[:, -1])
    np.testing.assert_array_equal(feats.h_fuse.data, trace["h_spat"].data)


def test_permuting_classifier_columns_permutes_logits(x_default):
    with precision(np.float64):
        net = BaseNetwork(DEFAULT, seed=6)
        before = net(x_default)[0].data
        perm = np.array([3, 0, 5, 1, 4, 2])
        net.classifier.data[...] = net.classifier.data[:, perm]
        after = net(x_default)[0].data
    np.testing.assert_allclose(after, before[:, perm], rtol=1e-12, atol=1e-14)   # BLAS may reorder the sums


def test_shared_backbone_halves_identical_when_inputs_equal(x_default):
    net = BaseNetwork(BaseNetConfig(spatial_mode="separate", share_backbone=True), seed=7)
    h = net.spatial(x_default, x_default).data
    a = DEFAULT.hidden
    np.testing.assert_array_equal(h[:, :a], h[:, a:])


def _spatial_param_count(net):
    return sum(p.size for n, p in net.named_parameters() if n.startswith(("adjust", "backbone", "fuse_dense")))


def test_separate_mode_has_more_spatial_parameters():
    fuse = BaseNetwork(BaseNetConfig(spatial_mode="fuse"))
    sep = BaseNetwork(BaseNetConfig(spatial_mode="separate"))
    fuse_backbone = sum(p.size for n, p in fuse.named_parameters() if n.startswith(("adjust", "backbone")))
    assert _spatial_param_count(sep) > fuse_backbone
    assert sep.num_parameters() > fuse.num_parameters() - fuse.fuse_dense.num_parameters()


def test_forward_is_deterministic(x_default):
    a = BaseNetwork(DEFAULT, seed=8)
    b = BaseNetwork(DEFAULT, seed=8)
    la, fa = a(x_default)
    lb, fb = b(x_default)
    np.testing.assert_array_equal(la.data, lb.data)
    np.testing.assert_array_equal(a(x_default)[0].data, la.data)
    for u, v in zip(fa.as_list(), fb.as_list()):
        np.testing.assert_array_equal(u.data, v.data)


def test_state_dict_round_trip(x_default):
    a, b = BaseNetwork(DEFAULT, seed=9), BaseNetwork(DEFAULT, seed=10)
    b.load_state_dict(a.state_dict())
    np.testing.assert_array_equal(a(x_default)[0].data, b(x_default)[0].data)
    bad = a.state_dict()
    bad.pop("classifier")
    with pytest.raises(KeyError):
        b.load_state_dict(bad)


def test_frequency_input_is_scaled_slow_time_spectrum(default_net, x_default):
    xf = default_net.frequency_input(x_default).data
    want = np.abs(np.fft.fft(x_default.astype(float), axis=1)) / np.sqrt(DEFAULT.K)
    np.testing.assert_allclose(xf, want, rtol=1e-5, atol=1e-5)


# -- attention -----------------------------------------------------------------------------------------

def test_attention_zero_weight_is_uniform(rng):
    K, i = 7, 3
    a = bilinear_attention(rng.standard_normal((K, i)), rng.standard_normal((K, i)), np.zeros((K, i))).data
    np.testing.assert_allclose(a, np.full((K, K), 1 / K), rtol=1e-6)


def test_attention_single_step(rng):
    a = bilinear_attention(rng.standard_normal((1, 4)), rng.standard_normal((1, 4)), rng.standard_normal((1, 4)))
    assert a.data.tolist() == [[1.0]]


def test_attention_matches_loop_oracle(rng):
    K, i = 6, 4
    ht, hf, w = (rng.standard_normal((K, i)) for _ in range(3))
    with precision(np.float64):
        got = bilinear_attention(ht, hf, w).data
    s = np.zeros((K, K))
    for r in range(K):
        for c in range(K):
            s[r, c] = sum(w[r, k] * ht[r, k] * hf[c, k] for k in range(i))
    np.testing.assert_allclose(got, softmax_rows(s), rtol=1e-10, atol=0)


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.integers(1, 6))
def test_attention_rows_are_probability_vectors(seed, K, i):
    r = np.random.default_rng(seed)
    with precision(np.float64):
        a = bilinear_attention(*(3 * r.standard_normal((K, i)) for _ in range(3))).data
    assert (a >= 0).all()
    np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-9)


def test_attention_batched_matches_single(rng):
    ht, hf = rng.standard_normal((2, 5, 3)), rng.standard_normal((2, 5, 3))
    w = rng.standard_normal((5, 3))
    with precision(np.float64):
        batched = bilinear_attention(ht, hf, w).data
        for b in range(2):
            np.testing.assert_allclose(batched[b], bilinear_attention(ht[b], hf[b], w).data, rtol=1e-12)


# -- gradients ------------------------------------------------------------------------------------------------

def _gradcheck(cfg, loss_of, seed=0, max_coords=6):
    """Worst relative error over sampled coordinates of every parameter.

    h = 1e-5 balances truncation (~h^2) against roundoff (~eps/h): several
    attention coordinates have gradients near 1e-6, where h = 1e-6 roundoff
    alone costs ~1e-4 relative error.
    """
    with precision(np.float64):
        net = BaseNetwork(cfg, seed=seed)
        r = np.random.default_rng(seed + 100)
        for name, p in net.named_parameters():
            if name.endswith("bias"):
                p.data[...] = 0.1 * r.standard_normal(p.shape)
        x = r.standard_normal((2, cfg.K, cfg.L, cfg.Nr))
        return finite_diff_check(lambda: loss_of(net, x, r), net.parameters(), h=1e-5, max_coords=max_coords,
                                 rng=r)


def _end_to_end_loss(net, x, _):
    logits, feats = net(x)
    return ops.cross_entropy(logits, np.array([0, 2])) + ops.sum(ops.square(feats.h_time)) * 0.1


@pytest.mark.parametrize("mode", ["fuse", "separate"])
def test_end_to_end_gradient_toy(mode):
    assert _gradcheck(toy(spatial_mode=mode), _end_to_end_loss) < 1e-4


def test_spatial_path_gradient():
    def loss(net, x, _):
        return ops.sum(ops.square(net.spatial(x, net.frequency_input(x))))
    assert _gradcheck(toy(), loss, seed=3) < 1e-4


def test_attention_path_gradient():
    def loss(net, x, _):
        ht, hf = net.temporal(x, net.frequency_input(x))
        return ops.sum(ops.square(ht)) + ops.sum(ht * hf)
    assert _gradcheck(toy(), loss, seed=4) < 1e-4


@pytest.mark.slow
@given(st.integers(0, 10_000))
def test_end_to_end_gradient_property(seed):
    assert _gradcheck(toy(), _end_to_end_loss, seed=seed, max_coords=3) < 1e-4


def test_no_grad_forward_builds_no_graph(default_net, x_default):
    with no_grad():
        logits, _ = default_net(x_default)
    assert not logits.requires_grad
