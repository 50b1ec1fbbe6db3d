"""Release-gate checks: gradients, FFT, Hessian PSD, signal analytics and file round trips.

Each check returns a :class:`CheckResult`; :func:`selftest` runs them all.
Checks look operations up through their modules at call time, so a test can
patch a broken operation in and watch the matching suite fail.
"""
from __future__ import annotations

import os
import tempfile
import time
from dataclasses import dataclass

import numpy as np

from .. import meta
from ..base_network import BaseNetConfig
from ..numerics import Param, fft, finite_diff_check, ops, precision
from ..signal_sim import Path, RadioConfig, Scene, build_dataset, default_class_specs, simulate
from . import formats
from .config import RunConfig, format_config_text, parse_config_text

GRAD_TOL = 1e-4


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    ok: bool
    detail: str = ""

    def line(self):
        return f"[{'PASS' if self.ok else 'FAIL'}] {self.suite}/{self.name}: {self.detail}"


# -- gradients -----------------------------------------------------------------------

def _op_cases(rng):
    """(name, params, loss_fn) triples exercising each differentiable operation."""
    def P(*shape, scale=1.0):
        return Param(rng.standard_normal(shape) * scale)

    a, b, w = P(3, 4), P(3, 4), P(4, 5)
    x, k, bias = P(2, 2, 6, 5), P(3, 2, 3, 3), P(3)
    seq, w_ih, w_hh, lb = P(2, 5, 3), P(3, 8, scale=0.5), P(2, 8, scale=0.5), P(8, scale=0.1)
    img = P(1, 2, 5, 7)
    r = rng.standard_normal((3, 5))
    labels = rng.integers(0, 5, 3)
    return [
        ("elementwise", [a, b], lambda: ops.sum(ops.div(ops.mul(a, ops.exp(b * 0.3)), ops.add(ops.square(b), 1.0)))),
        ("tanh", [a], lambda: ops.sum(ops.tanh(a) * b.data)),
        ("sigmoid", [a], lambda: ops.sum(ops.sigmoid(a) * b.data)),
        ("leaky_relu", [a], lambda: ops.sum(ops.leaky_relu(a) * b.data)),
        ("matmul", [a, w], lambda: ops.sum(ops.matmul(a, w) * r)),
        ("cross_entropy", [a, w], lambda: ops.cross_entropy(ops.matmul(a, w), labels)),
        ("softmax", [a], lambda: ops.sum(ops.softmax(a, axis=-1) * b.data)),
        ("cosine_similarity", [a, b], lambda: ops.sum(ops.cosine_similarity(a, b) * r[:, 0])),
        ("conv2d", [x, k, bias], lambda: ops.sum(ops.square(ops.conv2d(x, k, bias, stride=2, padding=1)))),
        ("max_pool2d", [img], lambda: ops.sum(ops.max_pool2d(img) * 1.7)),
        ("adaptive_avg_pool2d", [img], lambda: ops.sum(ops.square(ops.adaptive_avg_pool2d(img, (2, 3))))),
        ("lstm", [seq, w_ih, w_hh, lb], lambda: ops.sum(ops.square(ops.lstm(seq, w_ih, w_hh, lb)))),
    ]


def check_op_gradients(seed=0):
    out = []
    with precision(np.float64):
        for name, params, fn in _op_cases(np.random.default_rng(seed)):
            err = finite_diff_check(fn, params)
            out.append(CheckResult("gradient", name, err < GRAD_TOL, f"max rel err {err:.2e}"))
    return out


TOY_NET = dict(K=8, L=4, Nr=1, n_classes=3, hidden=4, attn_hidden=3, conv_channels=(2, 3, 4),
               adjust_channels=2, fc_hidden=5, pool_grid=(1, 1), activation="tanh")


def toy_episode(rng, n_classes=3, shots=1, n_query=3, shape=(8, 4, 1)):
    support_y = np.repeat(np.arange(n_classes), shots)
    query_y = rng.integers(0, n_classes, n_query)
    n_s = len(support_y)
    return meta.Episode(0, rng.standard_normal((n_s, *shape)), support_y, rng.standard_normal((n_query, *shape)),
                        query_y, np.arange(n_s), np.arange(n_s, n_s + n_query), shots, n_classes)


def toy_network_gradcheck(seed=0, spatial_mode="fuse", max_coords=None, h=1e-5):
    """Worst relative error of the full model loss (network + metric + residual) on an 8x4x1 toy.

    The default step is 1e-5 rather than 1e-6: some attention coordinates
    have gradients near 1e-6, where the roundoff of a smaller step alone
    approaches the tolerance.
    """
    rng = np.random.default_rng(seed)
    with precision(np.float64):
        model = meta.RFNetModel(BaseNetConfig(**TOY_NET, spatial_mode=spatial_mode), seed=seed)
        model.eta.data[...] = rng.uniform(0.5, 1.5, model.eta.shape)
        ep = toy_episode(rng)
        return finite_diff_check(lambda: meta.episode_loss(model, ep), model.parameters(), h=h,
                                 max_coords=max_coords, rng=rng)


def check_network_gradient(seed=0):
    err = toy_network_gradcheck(seed)
    return [CheckResult("gradient", "full_model_toy", err < GRAD_TOL, f"max rel err {err:.2e}")]


# -- FFT -------------------------------------------------------------------------------

def check_fft(seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for K in (1, 7, 16, 64, 100, 128):
        col = rng.standard_normal(K)
        ref = np.abs(fft.naive_dft(col))
        got = fft.fft_magnitude_slow_time(col[:, None, None])[:, 0, 0]
        worst = max(worst, float(np.max(np.abs(got - ref)) / max(np.max(ref), 1e-300)))
    K = 64
    tone = fft.fft_magnitude_slow_time(np.cos(2 * np.pi * 3 * np.arange(K) / K)[:, None, None])[:, 0, 0]
    peak_ok = abs(tone[3] - K / 2) < 1e-6 and abs(tone[K - 3] - K / 2) < 1e-6
    return [CheckResult("fft", "naive_dft_oracle", worst < 1e-6, f"max rel err {worst:.2e}"),
            CheckResult("fft", "cosine_peaks", bool(peak_ok), f"bins 3/{K - 3} = {tone[3]:.6f}/{tone[K - 3]:.6f}")]


# -- Hessian ------------------------------------------------------------------------------

def hessian_min_eigenvalues(n_draws=100, seed=0, n_classes=6, M=3):
    """Smallest eigenvalue of H_u and H_beta for random Lambda in [-1,1], beta in [-3,3]."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_draws):
        lam = rng.uniform(-1, 1, (n_classes, M))
        beta = rng.uniform(-3, 3, M)
        h_u, h_b = meta.loss_hessian(lam, beta)
        out.append((np.linalg.eigvalsh(h_u).min(), np.linalg.eigvalsh(h_b).min()))
    return np.array(out)


def check_hessian(seed=0):
    mins = hessian_min_eigenvalues(100, seed)
    worst = float(mins.min())
    return [CheckResult("hessian", "psd_100_draws", worst >= -1e-9, f"min eigenvalue {worst:.2e}")]


# -- signal analytics -----------------------------------------------------------------------

def _single_path_scene(tau, amplitude=1.0):
    return Scene((Path(amplitude, tau),), noise_std=0.0)


def fmcw_peak_bins(taus, cfg=None):
    """(measured, expected) peak fast-time bins for single static paths."""
    cfg = cfg or RadioConfig.fmcw()
    rng = np.random.default_rng(0)
    measured = [int(np.argmax(simulate(_single_path_scene(t), cfg, rng).values[0, :, 0])) for t in taus]
    expected = [int(np.round(cfg.chirp_slope * t * cfg.sweep_time)) for t in taus]
    return np.array(measured), np.array(expected)


def wifi_phase_slope_error(tau, cfg=None):
    """|measured - 2 pi df tau| for the phase slope across subcarriers of one path."""
    cfg = cfg or RadioConfig.wifi()
    _, z = simulate(_single_path_scene(tau), cfg, np.random.default_rng(0), debug=True)
    phase = np.unwrap(np.angle(z[0, :, 0]))
    slope = np.polyfit(np.arange(cfg.L), phase, 1)[0]
    return abs(slope - 2 * np.pi * cfg.subcarrier_spacing * tau)


def ir_argmax_offsets(taus, cfg=None):
    """Measured minus expected envelope peak sample for single paths."""
    cfg = cfg or RadioConfig.ir()
    rng = np.random.default_rng(0)
    out = []
    for t in taus:
        got = int(np.argmax(simulate(_single_path_scene(t), cfg, rng).values[0, :, 0]))
        out.append(got - int(np.round((0.5 * cfg.pulse_duration + t) * cfg.sample_rate)))
    return np.array(out)


def check_analytics(seed=0):
    rng = np.random.default_rng(seed)
    fm = RadioConfig.fmcw()
    taus = rng.uniform(0.02, 0.95, 50) * fm.max_delay
    got, want = fmcw_peak_bins(taus, fm)
    wifi_err = max(wifi_phase_slope_error(t) for t in rng.uniform(5e-9, 100e-9, 20))
    ir = RadioConfig.ir()
    offsets = ir_argmax_offsets(rng.uniform(0.05, 0.9, 20) * ir.max_delay, ir)
    return [
        CheckResult("analytics", "fmcw_peak_bin", bool(np.array_equal(got, want)),
                    f"{int(np.sum(got == want))}/{len(taus)} bins match"),
        CheckResult("analytics", "wifi_phase_slope", wifi_err < 1e-6, f"max slope err {wifi_err:.2e} rad"),
        CheckResult("analytics", "ir_envelope_peak", bool(np.all(np.abs(offsets) <= 1)),
                    f"max offset {int(np.max(np.abs(offsets)))} samples"),
    ]


# -- round trips ------------------------------------------------------------------------------

def check_roundtrips(seed=0):
    radio = RadioConfig.wifi(K=8, L=4, Nr=2)
    ds = build_dataset(radio, 2, default_class_specs(3), obs_per_env_per_class=2, master_seed=seed)
    ds_ok = formats.decode_dataset(formats.encode_dataset(ds)) == ds
    model = meta.RFNetModel(BaseNetConfig(**{**TOY_NET, "Nr": 2}), seed=seed)
    state = model.state_dict()
    back, cfg_back = formats.decode_checkpoint(formats.encode_checkpoint(state, {"method": "rfnet"}))
    ck_ok = cfg_back == {"method": "rfnet"} and set(back) == set(state) and all(
        back[k].tobytes() == state[k].tobytes() for k in state)
    mapping = RunConfig().to_mapping()
    cfg_ok = parse_config_text(format_config_text(mapping)) == mapping
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.rfds")
        formats.write_dataset(ds, path)
        file_ok = formats.read_dataset(path) == ds
    return [CheckResult("roundtrip", "rfds", ds_ok and file_ok, "dataset bytes preserved"),
            CheckResult("roundtrip", "rfck", ck_ok, f"{len(state)} tensors"),
            CheckResult("roundtrip", "config", cfg_ok, f"{len(mapping)} keys")]


SUITES = {
    "gradient": lambda seed: check_op_gradients(seed) + check_network_gradient(seed),
    "fft": check_fft,
    "hessian": check_hessian,
    "analytics": check_analytics,
    "roundtrip": check_roundtrips,
}


def selftest(suites=None, seed=0, report=None):
    """Run the named suites (all by default); returns the list of CheckResults."""
    results = []
    for name in suites or SUITES:
        t0 = time.perf_counter()
        try:
            res = SUITES[name](seed)
        except Exception as exc:  # a crashing suite is a failing suite
            res = [CheckResult(name, "crashed", False, f"{type(exc).__name__}: {exc}")]
        results.extend(res)
        if report:
            for r in res:
                report(r.line())
            report(f"  {name} suite took {time.perf_counter() - t0:.1f}s")
    return results
