"""
Simulated RF signal matrices
============================

Walk through the three radio simulators. Each turns a scene (static
reflectors plus one moving subject) into a real K x L x Nr magnitude matrix:
slow time by subcarrier (Wi-Fi), by fast-time range bin (FMCW) or by
fast-time sample (IR). Single-path closed forms are checked along the way.

Run with ``python demos/01_signal_models.py``.
"""

# %%
# A scene is a list of paths. Each path has an amplitude and a delay in
# seconds, and optionally a trajectory that moves the delay over slow time.
import numpy as np

from rfnet.signal_sim import (
    EnvSpec,
    Path,
    RadioConfig,
    Scene,
    build_dataset,
    default_class_specs,
    normalize_dataset,
    sample_environment,
    simulate,
)

NS = 1e-9
rng = np.random.default_rng(0)
one_path = Scene((Path(1.0, 50 * NS),), noise_std=0.0)

# %%
# Wi-Fi: one path gives a flat magnitude and a phase that advances by
# 2*pi*df*tau per subcarrier. The debug mode returns the complex channel.
wifi = RadioConfig.wifi()
m, z = simulate(one_path, wifi, rng, debug=True)
print("wifi matrix", m.values.shape, "magnitude range", m.values.min(), m.values.max())
step = np.angle(z[0, 1, 0] / z[0, 0, 0])
print(f"phase step per subcarrier {step:.6f} rad, expected {2 * np.pi * wifi.subcarrier_spacing * 50 * NS:.6f}")

# %%
# FMCW: after dechirping, a reflector at delay tau is a tone at
# slope * tau. Its fast-time FFT peaks at bin round(slope * tau * T_sweep).
fmcw = RadioConfig.fmcw(bandwidth=100e6, sweep_time=100e-6, L=256)
m = simulate(one_path, fmcw, rng)
print("fmcw peak bin", int(np.argmax(m.values[0, :, 0])),
      "expected", round(fmcw.chirp_slope * 50 * NS * fmcw.sweep_time))

# %%
# IR: a Gaussian-modulated pulse. The envelope peaks half a pulse
# duration after the path delay.
ir = RadioConfig.ir(bandwidth=1e9, sample_rate=10e9, L=64)
m = simulate(Scene((Path(1.0, 5 * NS),), noise_std=0.0), ir, rng)
print("ir envelope argmax", int(np.argmax(m.values[0, :, 0])),
      "expected", round((5 * NS + 0.5 * ir.pulse_duration) * ir.sample_rate))

# %%
# Environments are drawn from seeded ranges: the number of static paths,
# their amplitudes and delays, the noise level and the subject's position.
env = sample_environment(7, EnvSpec())
print(f"environment 7: {len(env.paths)} static paths, noise std {env.noise_std:.3g}, "
      f"subject delay {env.subject_delay / NS:.1f} ns")

# %%
# A dataset simulates every activity class several times in every
# environment. Activities differ in how the subject's delay oscillates.
ds = build_dataset(RadioConfig.wifi(), n_envs=4, class_specs=default_class_specs(6), obs_per_env_per_class=8,
                   master_seed=0)
print(f"{len(ds)} matrices from {len(ds.environments)} environments and {ds.n_classes} classes")
for spec in default_class_specs(6)[:3]:
    amps = tuple(round(a / NS, 3) for a in spec.amps)
    print(f"  class {spec.class_id} ({spec.name}): freqs {spec.freqs} Hz, amps {amps} ns")

# %%
# The same activity looks different across environments because the static
# background changes. Compare class-0 means in two environments.
e0, e1 = ds.environments[0], ds.environments[1]
mean0 = e0.values[e0.labels == 0].mean(axis=0)
mean1 = e1.values[e1.labels == 0].mean(axis=0)
print(f"class 0 mean magnitude, env 0: {mean0.mean():.3f}; env 1: {mean1.mean():.3f}")

# %%
# Networks consume z-scored inputs. The statistics come from the training
# environments only and are then applied to the held-out ones.
train, (test,), stats = normalize_dataset(ds.subset([0, 1, 2]), [ds.subset([3])])
print(f"normalisation mean {stats.mean:.4f}, std {stats.std:.4f}; "
      f"held-out env mean after z-scoring {test.environments[0].values.mean():.3f}")
