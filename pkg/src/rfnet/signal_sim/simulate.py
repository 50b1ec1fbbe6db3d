"""Signal-matrix synthesis for Wi-Fi CSI, FMCW and impulse radio.

Each simulator superposes the scene's paths as complex phasors, adds complex
Gaussian noise before the magnitude is taken, and returns a real
(K, L, Nr) magnitude matrix. ``debug=True`` also returns the complex array
the magnitudes were taken from.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .radio import ConfigError, RadioConfig


@dataclass
class SignalMatrix:
    values: np.ndarray
    radio: RadioConfig
    label: int = -1
    env_id: int = -1

    def __post_init__(self):
        r = self.radio
        if self.values.shape != (r.K, r.L, r.Nr):
            raise ConfigError(f"matrix shape {self.values.shape} != ({r.K}, {r.L}, {r.Nr})")

    @property
    def shape(self):
        return self.values.shape


def slow_times(cfg):
    return np.arange(cfg.K) * cfg.slow_time_interval


def _path_arrays(scene, cfg):
    t = slow_times(cfg)
    delays = np.stack([p.delay(t) for p in scene.paths])  # (P, K)
    amps = np.array([p.amplitude for p in scene.paths])
    weights = amps[None, :] * scene.pair_perturbation(cfg.Nr, len(scene.paths))  # (Nr, P)
    if np.any(delays < 0):
        raise ConfigError("path delay became negative")
    return delays, weights


def _noise(rng, shape, std):
    if std == 0:
        return 0.0
    return std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def _finish(z, cfg, scene, debug, label):
    m = SignalMatrix(np.abs(z).astype(np.float32), cfg, label, scene.env_id)
    return (m, z) if debug else m


def simulate_wifi(scene, cfg, rng, debug=False, label=-1):
    """Per-packet CSI magnitude over L subcarriers."""
    if cfg.variant != "wifi":
        raise ConfigError("simulate_wifi needs a wifi radio config")
    delays, weights = _path_arrays(scene, cfg)
    if delays.max() >= cfg.max_delay:
        raise ConfigError(f"delay {delays.max():.3e}s exceeds 1/subcarrier spacing")
    f = np.asarray(cfg.subcarrier_freqs())
    phasors = np.exp(2j * np.pi * delays[:, :, None] * f[None, None, :])  # (P, K, L)
    h = np.einsum("pkl,rp->klr", phasors, weights)
    h = h + _noise(rng, h.shape, scene.noise_std)
    return _finish(h, cfg, scene, debug, label)


def simulate_fmcw(scene, cfg, rng, debug=False, label=-1):
    """Dechirped frames, L-point FFT over fast time, magnitude per bin.

    Beat tones are synthesised at +beta*tau so that a path lands in bin
    round(beta * tau * T_S); the spectrum is scaled by 1/L so a lone path of
    amplitude a peaks near a.
    """
    if cfg.variant != "fmcw":
        raise ConfigError("simulate_fmcw needs an fmcw radio config")
    delays, weights = _path_arrays(scene, cfg)
    beta = cfg.chirp_slope
    fs = cfg.L / cfg.sweep_time
    if beta * delays.max() >= fs / 2:
        raise ConfigError("beat frequency beyond fast-time Nyquist")
    t = np.arange(cfg.L) / fs
    phase = beta * delays[:, :, None] * t + (cfg.f_c * delays - 0.5 * beta * delays ** 2)[:, :, None]
    frames = np.einsum("pkn,rp->knr", np.exp(2j * np.pi * phase), weights)
    frames = frames + _noise(rng, frames.shape, scene.noise_std)
    spec = np.fft.fft(frames, axis=1) / cfg.L
    return _finish(spec, cfg, scene, debug, label)


def ir_pulse(t, tau, alpha, cfg):
    """Complex received pulse of one path sampled at fast times ``t``."""
    center = 0.5 * cfg.pulse_duration + np.asarray(tau)
    env = np.exp(-0.5 * ((np.asarray(t) - center) / cfg.pulse_std) ** 2)
    return alpha * np.exp(2j * np.pi * cfg.f_c * np.asarray(tau)) * env


def simulate_ir(scene, cfg, rng, debug=False, label=-1):
    """Gaussian pulses sampled at L fast-time points per frame."""
    if cfg.variant != "ir":
        raise ConfigError("simulate_ir needs an ir radio config")
    delays, weights = _path_arrays(scene, cfg)
    t = np.arange(cfg.L) / cfg.sample_rate
    centers = 0.5 * cfg.pulse_duration + delays
    if centers.max() > t[-1]:
        raise ConfigError("pulse center outside the sampled fast-time window")
    env = np.exp(-0.5 * ((t[None, None, :] - centers[:, :, None]) / cfg.pulse_std) ** 2)
    carrier = np.exp(2j * np.pi * cfg.f_c * delays)[:, :, None]
    y = np.einsum("pkn,rp->knr", carrier * env, weights)
    y = y + _noise(rng, y.shape, scene.noise_std)
    return _finish(y, cfg, scene, debug, label)


SIMULATORS = {"wifi": simulate_wifi, "fmcw": simulate_fmcw, "ir": simulate_ir}


def simulate(scene, cfg, rng, debug=False, label=-1):
    return SIMULATORS[cfg.variant](scene, cfg, rng, debug=debug, label=label)
