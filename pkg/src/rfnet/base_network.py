"""Dual-path activity recognition network.

A signal matrix ``x`` (K slow-time steps, L fast-time bins, Nr tx-rx pairs)
and its slow-time spectrum ``x_f`` feed two branches:

* a spatial branch that treats them as images and runs a small CNN (cnn5:
  three conv/pool stages and two dense layers), either on a fused composite
  (``spatial_mode="fuse"``) or on each input separately (``"separate"``);
* a temporal branch that runs one LSTM per domain over slow time, mixes the
  two hidden sequences with a bilinear attention map and adds the mixed
  sequences back through a residual connection.

The last attended time/frequency states and the fused vector
``H_fuse = H_temp + H_spat`` form the feature set used by the metric head;
``H_fuse @ W_1`` gives the class logits.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

from .numerics import Conv2d, Dense, LSTM, Module, Param, Tensor, fft_magnitude_slow_time, ops
from .numerics.layers import fan_in_uniform
from .numerics.tensor import as_tensor, default_dtype
from .signal_sim import SignalMatrix

SPATIAL_MODES = ("fuse", "separate")


@dataclass(frozen=True)
class BaseNetConfig:
    K: int = 64
    L: int = 16
    Nr: int = 2
    n_classes: int = 6
    hidden: int = 32            # alpha
    attn_hidden: int = 16       # iota
    activation: str = "relu"
    spatial_mode: str = "fuse"
    backbone: str = "cnn5"
    conv_channels: tuple = (8, 16, 32)
    adjust_channels: int = 4
    fc_hidden: int = 64
    pool_grid: tuple = (2, 2)
    share_backbone: bool = False

    def __post_init__(self):
        if self.hidden < 1 or self.attn_hidden < 1:
            raise ValueError("hidden and attn_hidden must be >= 1")
        if self.spatial_mode not in SPATIAL_MODES:
            raise ValueError(f"spatial_mode must be one of {SPATIAL_MODES}")
        if self.backbone != "cnn5":
            raise NotImplementedError(f"backbone {self.backbone!r} is not available; only cnn5 is implemented")
        ops.activation(self.activation)

    @classmethod
    def for_radio(cls, radio, **kw):
        return cls(K=radio.K, L=radio.L, Nr=radio.Nr, **kw)

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        kw = {}
        for f in fields(cls):
            if f.name in d:
                v = d[f.name]
                if f.name in ("conv_channels", "pool_grid"):
                    v = tuple(int(c) for c in (v.split(",") if isinstance(v, str) else v))
                elif f.name == "share_backbone" and isinstance(v, str):
                    v = v.lower() in ("1", "true", "yes")
                elif f.name in ("activation", "spatial_mode", "backbone"):
                    v = str(v)
                else:
                    v = int(v)
                kw[f.name] = v
        return cls(**kw)


@dataclass
class FeatureSet:
    """The three embeddings compared by the metric head, each batched over rows."""

    h_time: Tensor   # (B, alpha)
    h_freq: Tensor   # (B, alpha)
    h_fuse: Tensor   # (B, 2 alpha)

    def as_list(self):
        return [self.h_time, self.h_freq, self.h_fuse]

    def numpy(self):
        return FeatureSet(*(Tensor(t.data, dtype=t.dtype) for t in self.as_list()))


class CNN5(Module):
    """Three 3x3 conv + max-pool stages, an adaptive average pool and two dense layers."""

    def __init__(self, c_in, channels, fc_hidden, out_dim, grid, act, rng):
        self.convs = [Conv2d(ci, co, 3, rng, padding=1) for ci, co in zip((c_in,) + tuple(channels[:-1]), channels)]
        self.fc1 = Dense(channels[-1] * grid[0] * grid[1], fc_hidden, rng)
        self.fc2 = Dense(fc_hidden, out_dim, rng)
        self._act = act
        self._grid = grid

    def __call__(self, img):
        h = img
        for conv in self.convs:
            h = ops.max_pool2d(self._act(conv(h)))
        h = ops.adaptive_avg_pool2d(h, self._grid)
        h = h.reshape(h.shape[0], -1)
        return self.fc2(self._act(self.fc1(h)))


def bilinear_attention(ht, hf, weight):
    """Row-stochastic K x K attention map ``softmax((W * Ht) Hf^T)``.

    ``ht`` and ``hf`` are (K, iota) or batched (B, K, iota); ``weight`` is
    (K, iota) and scales ``ht`` elementwise before the bilinear product.
    """
    scores = ops.matmul(ops.mul(ht, weight), ops.swapaxes(hf, -1, -2))
    return ops.softmax(scores, axis=-1)


class BaseNetwork(Module):
    def __init__(self, cfg: BaseNetConfig, seed=0):
        self.cfg = cfg
        rng = np.random.default_rng(seed)
        a, iota = cfg.hidden, cfg.attn_hidden
        act = ops.activation(cfg.activation)
        self._act = act

        # spatial module
        if cfg.spatial_mode == "fuse":
            self.fuse_dense = Dense(2 * cfg.Nr * cfg.L, 2 * a, rng)
            self.adjust = Conv2d(2, cfg.adjust_channels, 1, rng)
            self.backbone = CNN5(cfg.adjust_channels, cfg.conv_channels, cfg.fc_hidden, 2 * a, cfg.pool_grid, act, rng)
        else:
            self.adjust = Conv2d(cfg.Nr, cfg.adjust_channels, 1, rng)
            self.backbone = CNN5(cfg.adjust_channels, cfg.conv_channels, cfg.fc_hidden, a, cfg.pool_grid, act, rng)
            if cfg.share_backbone:
                self.adjust_freq, self.backbone_freq = self.adjust, self.backbone
            else:
                self.adjust_freq = Conv2d(cfg.Nr, cfg.adjust_channels, 1, rng)
                self.backbone_freq = CNN5(cfg.adjust_channels, cfg.conv_channels, cfg.fc_hidden, a,
                                          cfg.pool_grid, act, rng)

        # attention-based temporal module
        d_in = cfg.L * cfg.Nr
        self.lstm_time = LSTM(d_in, a, rng)
        self.lstm_freq = LSTM(d_in, a, rng)
        self.proj_time = Dense(a, iota, rng)
        self.proj_freq = Dense(a, iota, rng)
        self.attn_weight = Param(fan_in_uniform(rng, (cfg.K, iota), iota))
        self.post_time = Dense(a, a, rng)
        self.post_freq = Dense(a, a, rng)
        self.compose_time = Dense(a, a, rng)
        self.compose_freq = Dense(a, a, rng)
        self.compose_out = Dense(2 * a, 2 * a, rng)

        # classification module
        self.classifier = Param(fan_in_uniform(rng, (2 * a, cfg.n_classes), 2 * a))
        self._name_params()

    # -- pieces ----------------------------------------------------------------
    def frequency_input(self, x):
        """Slow-time spectrum magnitude, scaled by 1/sqrt(K) to match the input's energy."""
        xd = x.data if isinstance(x, Tensor) else np.asarray(x, dtype=default_dtype())
        axis = xd.ndim - 3
        return Tensor(fft_magnitude_slow_time(xd, axis=axis) / np.sqrt(xd.shape[axis]), dtype=xd.dtype)

    def spatial(self, x, xf):
        """(B, K, L, Nr) inputs -> H_spat (B, 2 alpha)."""
        x, xf = as_tensor(x), as_tensor(xf)
        if x.shape != xf.shape:
            raise ops.ShapeError(f"time and frequency inputs differ: {x.shape} vs {xf.shape}")
        B, K, L, Nr = x.shape
        a = self.cfg.hidden
        if self.cfg.spatial_mode == "fuse":
            xc = ops.concat([x, xf], axis=-1).reshape(B, K, 2 * Nr * L)
            hc = self._act(self.fuse_dense(xc)).reshape(B, K, a, 2)
            img = ops.transpose(hc, (0, 3, 2, 1))  # channels, alpha rows, K columns
            return self.backbone(self.adjust(img))
        img_t = ops.transpose(x, (0, 3, 2, 1))    # Nr channels, L rows, K columns
        img_f = ops.transpose(xf, (0, 3, 2, 1))
        return ops.concat([self.backbone(self.adjust(img_t)), self.backbone_freq(self.adjust_freq(img_f))], axis=-1)

    def temporal(self, x, xf, trace=None):
        """(B, K, L, Nr) inputs -> attended sequences H_time, H_freq (B, K, alpha)."""
        x, xf = as_tensor(x), as_tensor(xf)
        B, K = x.shape[:2]
        h_t0 = self.lstm_time(x.reshape(B, K, -1))
        h_f0 = self.lstm_freq(xf.reshape(B, K, -1))
        ht = self._act(self.proj_time(h_t0))
        hf = self._act(self.proj_freq(h_f0))
        attn = bilinear_attention(ht, hf, self.attn_weight)
        attn_t = ops.swapaxes(attn, -1, -2)
        joint_t = ops.matmul(attn_t, h_t0)   # ((H^T) A)^T
        joint_f = ops.matmul(attn_t, h_f0)
        h_time = h_t0 + self._act(self.post_time(joint_t))
        h_freq = h_f0 + self._act(self.post_freq(joint_f))
        if trace is not None:
            trace.update(h_time_lstm=h_t0, h_freq_lstm=h_f0, attention=attn, h_time_seq=h_time, h_freq_seq=h_freq)
        return h_time, h_freq

    def compose(self, h_time_k, h_freq_k):
        """Last attended states (B, alpha) each -> H_temp (B, 2 alpha)."""
        mt = self._act(self.compose_time(h_time_k))
        mf = self._act(self.compose_freq(h_freq_k))
        return self.compose_out(ops.concat([mt, mf], axis=-1))

    # -- full pass --------------------------------------------------------------
    def __call__(self, x, trace=None):
        return self.forward(x, trace)

    def forward(self, x, trace=None):
        """Logits (B, N_c) and FeatureSet for a (B, K, L, Nr) batch or one (K, L, Nr) matrix."""
        if isinstance(x, SignalMatrix):
            x = x.values
        x = as_tensor(x, dtype=self.classifier.dtype)
        if x.dtype != self.classifier.dtype:
            x = Tensor(x.data, dtype=self.classifier.dtype)
        single = x.ndim == 3
        if single:
            x = x.reshape(1, *x.shape)
        if x.shape[1:] != (self.cfg.K, self.cfg.L, self.cfg.Nr):
            raise ops.ShapeError(f"input shape {x.shape[1:]} does not match config "
                                 f"({self.cfg.K}, {self.cfg.L}, {self.cfg.Nr})")
        xf = self.frequency_input(x)
        h_spat = self.spatial(x, xf)
        h_time, h_freq = self.temporal(x, xf, trace)
        h_time_k = h_time[:, -1]
        h_freq_k = h_freq[:, -1]
        h_temp = self.compose(h_time_k, h_freq_k)
        h_fuse = h_temp + h_spat
        logits = ops.matmul(h_fuse, self.classifier)
        if trace is not None:
            trace.update(h_spat=h_spat, h_temp=h_temp, x_f=xf)
        feats = FeatureSet(h_time_k, h_freq_k, h_fuse)
        if single:
            logits = logits[0]
            feats = FeatureSet(h_time_k[0], h_freq_k[0], h_fuse[0])
        return logits, feats

    # -- bookkeeping ---------------------------------------------------------------
    def head_parameters(self):
        return [self.classifier]

    def state_dict(self):
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state):
        params = dict(self.named_parameters())
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"checkpoint lacks parameters: {sorted(missing)[:5]}")
        for name, p in params.items():
            if state[name].shape != p.shape:
                raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
            p.data[...] = state[name]


def base_forward(x, net):
    """Logits and features of ``net`` on signal matrix ``x`` (see :meth:`BaseNetwork.forward`)."""
    return net.forward(x)
