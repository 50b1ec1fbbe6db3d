from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .radio import ConfigError, RadioConfig
from .scene import EnvSpec, default_class_specs, sample_environment
from .simulate import SignalMatrix, simulate


@dataclass
class Environment:
    """All observations recorded in one environment."""

    env_id: int
    values: np.ndarray  # (n, K, L, Nr) float32
    labels: np.ndarray  # (n,) int

    def __len__(self):
        return len(self.labels)

    def matrix(self, i, radio):
        return SignalMatrix(self.values[i], radio, int(self.labels[i]), self.env_id)

    def class_indices(self, c):
        return np.flatnonzero(self.labels == c)


@dataclass
class Dataset:
    radio: RadioConfig
    environments: list
    n_classes: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for env in self.environments:
            if env.values.shape[1:] != (self.radio.K, self.radio.L, self.radio.Nr):
                raise ConfigError(f"environment {env.env_id} has matrices of shape {env.values.shape[1:]}")
            if len(env.labels) and (env.labels.min() < 0 or env.labels.max() >= self.n_classes):
                raise ConfigError(f"environment {env.env_id} has labels outside [0, {self.n_classes})")

    @property
    def env_ids(self):
        return [e.env_id for e in self.environments]

    def env(self, env_id):
        for e in self.environments:
            if e.env_id == env_id:
                return e
        raise KeyError(f"no environment {env_id}")

    def subset(self, env_ids):
        wanted = set(env_ids)
        return Dataset(self.radio, [e for e in self.environments if e.env_id in wanted], self.n_classes,
                       dict(self.meta))

    def __len__(self):
        return sum(len(e) for e in self.environments)

    def matrices(self):
        for e in self.environments:
            for i in range(len(e)):
                yield e.matrix(i, self.radio)

    def min_obs_per_class(self):
        return min(int(np.bincount(e.labels, minlength=self.n_classes).min()) for e in self.environments)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        r, o = self.radio, other.radio
        if (r.variant, r.K, r.L, r.Nr, self.n_classes) != (o.variant, o.K, o.L, o.Nr, other.n_classes):
            return False
        if len(self.environments) != len(other.environments):
            return False
        for a, b in zip(self.environments, other.environments):
            if a.env_id != b.env_id or not np.array_equal(a.labels, b.labels):
                return False
            if a.values.dtype != b.values.dtype or a.values.tobytes() != b.values.tobytes():
                return False
        return True


def _env_seed(master_seed, env_index):
    return int(np.random.SeedSequence([master_seed, env_index]).generate_state(1)[0])


def build_dataset(radio, n_envs, class_specs=None, obs_per_env_per_class=8, master_seed=0, env_spec=None):
    """Simulate ``n_envs`` environments with every class observed ``obs_per_env_per_class`` times."""
    class_specs = class_specs or default_class_specs()
    if n_envs < 2:
        raise ConfigError("need at least two environments")
    if len(class_specs) < 2:
        raise ConfigError("need at least two classes")
    ids = sorted(s.class_id for s in class_specs)
    if ids != list(range(len(class_specs))):
        raise ConfigError("class ids must be 0..N_c-1")
    for spec in class_specs:
        spec.validate_for(radio)
    env_spec = env_spec or EnvSpec.for_radio(radio)

    envs = []
    for e in range(n_envs):
        seed = _env_seed(master_seed, e)
        scene = sample_environment(seed, env_spec, env_id=e)
        rng = np.random.default_rng(seed + 1)
        values, labels = [], []
        for spec in sorted(class_specs, key=lambda s: s.class_id):
            for _ in range(obs_per_env_per_class):
                obs_scene = scene.with_paths(spec.dynamic_paths(scene, rng))
                values.append(simulate(obs_scene, radio, rng).values)
                labels.append(spec.class_id)
        envs.append(Environment(e, np.stack(values), np.asarray(labels, dtype=np.int64)))
    return Dataset(radio, envs, len(class_specs), {"master_seed": master_seed})


@dataclass(frozen=True)
class NormStats:
    mean: float
    std: float

    def apply(self, values):
        return ((values - self.mean) / self.std).astype(values.dtype)

    def inverse(self, values):
        return (values * self.std + self.mean).astype(values.dtype)


def fit_norm_stats(dataset):
    all_vals = np.concatenate([e.values.reshape(-1) for e in dataset.environments]).astype(np.float64)
    if all_vals.size == 0:
        raise ConfigError("cannot normalise an empty dataset")
    mean = float(all_vals.mean())
    std = float(all_vals.std())
    if not std > 0:
        warnings.warn("zero variance in training data; using std=1", RuntimeWarning, stacklevel=2)
        std = 1.0
    return NormStats(mean, std)


def apply_norm(dataset, stats):
    envs = [Environment(e.env_id, stats.apply(e.values), e.labels.copy()) for e in dataset.environments]
    return Dataset(dataset.radio, envs, dataset.n_classes, dict(dataset.meta))


def normalize_dataset(train, others=()):
    """Z-score every dataset with statistics fitted on ``train`` only.

    Returns ``(train_normalized, [others_normalized...], stats)``.
    """
    if len(train) == 0:
        raise ConfigError("training dataset is empty")
    stats = fit_norm_stats(train)
    return apply_norm(train, stats), [apply_norm(d, stats) for d in others], stats
