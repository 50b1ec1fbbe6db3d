"""Multipath environments and class-parameterised motion trajectories."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .radio import ConfigError


@dataclass(frozen=True)
class Trajectory:
    """Concrete dynamic delay ``drift*t + sum amp_i sin(2 pi freq_i t + phase_i)``."""

    drift: float = 0.0
    amps: tuple = ()
    freqs: tuple = ()
    phases: tuple = ()

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        tau = self.drift * t
        for a, f, p in zip(self.amps, self.freqs, self.phases):
            tau = tau + a * np.sin(2 * np.pi * f * t + p)
        return tau

    def bound(self, duration):
        """Upper bound on |tau_D(t)| over ``[0, duration]``."""
        return abs(self.drift) * duration + float(np.sum(np.abs(self.amps)))


@dataclass(frozen=True)
class Path:
    amplitude: float
    static_delay: float
    dynamic: Trajectory | None = None

    def __post_init__(self):
        if self.amplitude < 0:
            raise ConfigError("path amplitude must be non-negative")

    def delay(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.dynamic is None:
            return np.full(t.shape, self.static_delay)
        return self.static_delay + self.dynamic(t)


@dataclass(frozen=True)
class Scene:
    """Static multipath environment.

    ``subject_delay``/``subject_gain`` place the moving subject; dynamic paths
    are attached per observation. Tx-rx pair ``r`` sees every path with a gain
    and phase perturbation drawn deterministically from ``pair_seed``.
    """

    paths: tuple
    noise_std: float = 0.0
    env_id: int = 0
    subject_delay: float = 0.0
    subject_gain: float = 1.0
    pair_gain_std: float = 0.0
    pair_phase_std: float = 0.0
    pair_seed: int = 0

    def __post_init__(self):
        if len(self.paths) < 1:
            raise ConfigError("a scene needs at least one path")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be non-negative")

    def with_paths(self, extra):
        return Scene(tuple(self.paths) + tuple(extra), self.noise_std, self.env_id, self.subject_delay,
                     self.subject_gain, self.pair_gain_std, self.pair_phase_std, self.pair_seed)

    def pair_perturbation(self, n_pairs, n_paths):
        """(n_pairs, n_paths) complex multipliers for each tx-rx pair."""
        if self.pair_gain_std == 0 and self.pair_phase_std == 0:
            return np.ones((n_pairs, n_paths), dtype=np.complex128)
        rng = np.random.default_rng([self.pair_seed, n_paths])
        # pair 0 is the reference link
        gain = 1 + self.pair_gain_std * rng.standard_normal((n_pairs, n_paths))
        phase = self.pair_phase_std * rng.standard_normal((n_pairs, n_paths))
        gain[0], phase[0] = 1.0, 0.0
        return np.clip(gain, 0.0, None) * np.exp(1j * phase)


@dataclass(frozen=True)
class EnvSpec:
    """Ranges that environments are drawn from (inclusive, uniform)."""

    n_paths: tuple = (5, 8)
    amplitude: tuple = (0.2, 1.0)
    delay: tuple = (5e-9, 100e-9)
    noise_std: tuple = (0.01, 0.03)
    subject_delay: tuple = (5e-9, 100e-9)
    subject_gain: tuple = (0.3, 0.6)
    pair_gain_std: float = 0.1
    pair_phase_std: float = 0.5

    @classmethod
    def for_radio(cls, radio, **kw):
        lo, hi = radio.default_delay_range
        return cls(**{"delay": (lo, hi), "subject_delay": (lo, 0.8 * hi), **kw})

    def validate(self):
        for name in ("n_paths", "amplitude", "delay", "noise_std", "subject_delay", "subject_gain"):
            lo, hi = getattr(self, name)
            if hi < lo:
                raise ConfigError(f"empty range for {name}: {lo} > {hi}")
        if self.n_paths[0] < 1:
            raise ConfigError("environments need at least one static path")


def sample_environment(env_seed, env_spec, env_id=None):
    """Draw a deterministic Scene from ``env_spec`` using ``env_seed``."""
    env_spec.validate()
    rng = np.random.default_rng(env_seed)
    n = int(rng.integers(env_spec.n_paths[0], env_spec.n_paths[1] + 1))
    amps = rng.uniform(*env_spec.amplitude, size=n)
    delays = rng.uniform(*env_spec.delay, size=n)
    paths = tuple(Path(float(a), float(d)) for a, d in zip(amps, delays))
    return Scene(
        paths=paths,
        noise_std=float(rng.uniform(*env_spec.noise_std)),
        env_id=int(env_seed if env_id is None else env_id),
        subject_delay=float(rng.uniform(*env_spec.subject_delay)),
        subject_gain=float(rng.uniform(*env_spec.subject_gain)),
        pair_gain_std=env_spec.pair_gain_std,
        pair_phase_std=env_spec.pair_phase_std,
        pair_seed=int(rng.integers(2**31)),
    )


@dataclass(frozen=True)
class ActivityClassSpec:
    """Trajectory family of one activity.

    Every observation jitters the family parameters multiplicatively by
    ``1 + U(-j, j)`` and shifts each phase by ``U(-phase_jitter, phase_jitter)``.
    Secondary dynamic paths (limbs) reuse the family at ``path_gains[i]``.
    """

    class_id: int
    name: str = ""
    base_delay: float = 0.0
    amps: tuple = ()
    freqs: tuple = ()
    phases: tuple = ()
    drift: float = 0.0
    n_dynamic: int = 1
    path_gains: tuple = (1.0, 0.5, 0.3, 0.2)
    amp_jitter: float = 0.0
    freq_jitter: float = 0.0
    drift_jitter: float = 0.0
    delay_jitter: float = 0.0
    phase_jitter: float = 0.0

    def __post_init__(self):
        if not (len(self.amps) == len(self.freqs)):
            raise ConfigError("amps and freqs must have equal length")
        if self.phases and len(self.phases) != len(self.amps):
            raise ConfigError("phases must match amps")
        if self.n_dynamic < 1 or self.n_dynamic > len(self.path_gains):
            raise ConfigError("n_dynamic must be between 1 and len(path_gains)")

    def validate_for(self, radio):
        top = max(self.freqs, default=0.0) * (1 + self.freq_jitter)
        if top >= radio.slow_time_nyquist:
            raise ConfigError(f"class {self.class_id}: oscillation {top} Hz >= slow-time Nyquist")

    def draw(self, rng):
        """Jittered trajectory for one dynamic path."""
        def jit(v, j):
            return v * (1 + rng.uniform(-j, j)) if j else v

        phases = self.phases or (0.0,) * len(self.amps)
        return Trajectory(
            drift=float(jit(self.drift, self.drift_jitter)),
            amps=tuple(float(jit(a, self.amp_jitter)) for a in self.amps),
            freqs=tuple(float(jit(f, self.freq_jitter)) for f in self.freqs),
            phases=tuple(float(p + (rng.uniform(-self.phase_jitter, self.phase_jitter) if self.phase_jitter else 0.0))
                         for p in phases),
        )

    def dynamic_paths(self, scene, rng):
        out = []
        for i in range(self.n_dynamic):
            traj = self.draw(rng)
            offset = self.base_delay * (1 + rng.uniform(-self.delay_jitter, self.delay_jitter)) \
                if self.delay_jitter else self.base_delay
            out.append(Path(scene.subject_gain * self.path_gains[i], scene.subject_delay + offset, traj))
        return out


def trajectory_delay(spec, obs_seed, t):
    """Dynamic delay of the primary path of ``spec`` for observation ``obs_seed`` at time ``t``."""
    return spec.draw(np.random.default_rng(obs_seed))(t)


def default_class_specs(n_classes=6):
    """Six synthetic activities with distinct Doppler signatures.

    Delays are seconds; at 5.8 GHz one nanosecond of delay change is about
    5.8 carrier cycles, so the amplitudes below give modulation indices of a
    few radians.
    """
    ns = 1e-9
    common = dict(amp_jitter=0.15, freq_jitter=0.15, drift_jitter=0.15, delay_jitter=0.2, phase_jitter=np.pi,
                  n_dynamic=2)
    specs = [
        ActivityClassSpec(0, "wiping", 0.5 * ns, amps=(0.04 * ns,), freqs=(4.0,), **common),
        ActivityClassSpec(1, "walking", 1.0 * ns, amps=(0.05 * ns,), freqs=(1.8,), drift=2.5 * ns, **common),
        ActivityClassSpec(2, "moving", 0.8 * ns, amps=(0.25 * ns,), freqs=(1.0,), **common),
        ActivityClassSpec(3, "rotating", 0.6 * ns, amps=(0.15 * ns, 0.03 * ns), freqs=(0.6, 3.0), **common),
        ActivityClassSpec(4, "sitting", 0.3 * ns, amps=(0.08 * ns,), freqs=(0.8,), drift=-1.2 * ns, **common),
        ActivityClassSpec(5, "standing", 0.3 * ns, amps=(0.02 * ns,), freqs=(2.5,), drift=0.6 * ns, **common),
    ]
    if n_classes > len(specs):
        rng = np.random.default_rng(1234)
        for c in range(len(specs), n_classes):
            specs.append(ActivityClassSpec(
                c, f"activity{c}", float(rng.uniform(0.2, 1.0)) * ns,
                amps=(float(rng.uniform(0.02, 0.25)) * ns,), freqs=(float(rng.uniform(0.5, 5.0)),),
                drift=float(rng.uniform(-2, 2)) * ns, **common))
    return specs[:n_classes]
