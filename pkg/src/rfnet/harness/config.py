"""Run configuration: a line-based ``key = value`` file plus command-line overrides."""
from __future__ import annotations

import os
from dataclasses import dataclass, field, fields, replace

from ..base_network import BaseNetConfig
from ..baselines import METHODS
from ..meta import TrainConfig
from ..signal_sim import VARIANTS, ConfigError

EXTRA_METHODS = ("chance",)   # untrained model with a zero head, for calibration runs
_NET_KEYS = {f.name for f in fields(BaseNetConfig)} - {"K", "L", "Nr", "n_classes"}
# Training fields by config key. ``shots`` at the top level is the list of
# evaluation shot counts, so the training episodes' shot count is ``train_shots``.
_TRAIN_RENAMES = {"shots": "train_shots"}
_TRAIN_KEYS = {_TRAIN_RENAMES.get(f.name, f.name): f.name for f in fields(TrainConfig)}


def parse_config_text(text):
    """``key = value`` lines to an ordered dict; ``#`` starts a comment; blank lines ignored."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config_file(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def format_config_text(mapping):
    return "".join(f"{k} = {v}\n" for k, v in mapping.items())


def _int_list(v):
    if isinstance(v, str):
        v = [s for s in v.replace(",", " ").split() if s]
    return tuple(int(s) for s in v)


def _convert(default, value):
    if isinstance(default, bool):
        return value if isinstance(value, bool) else str(value).lower() in ("1", "true", "yes", "on")
    if isinstance(default, int):
        return int(value)
    if isinstance(default, float):
        return float(value)
    if isinstance(default, tuple):
        return _int_list(value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    radio: str = "wifi"
    envs: int = 20
    classes: int = 6
    obs: int = 8
    data_seed: int = 0
    data: str = ""                      # optional RFDS file; overrides the generation keys
    method: str = "rfnet"
    split: float = 0.8                  # train fraction when folds == 1
    folds: int = 10
    seeds: tuple = (0,)
    shots: tuple = (1, 2, 3)
    episodes: int = 200                 # per (fold, seed, shots) cell
    out: str = "runs/latest"
    net: dict = field(default_factory=dict)
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if self.radio not in VARIANTS:
            raise ConfigError(f"radio must be one of {VARIANTS}")
        if self.method not in METHODS + EXTRA_METHODS:
            raise ConfigError(f"method must be one of {METHODS}")
        if not 0 < self.split < 1:
            raise ConfigError("split must lie strictly between 0 and 1")
        if self.folds < 1:
            raise ConfigError("folds must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is needed")
        if not self.shots or min(self.shots) < 1:
            raise ConfigError("shots must be positive")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        unknown = set(self.net) - _NET_KEYS
        if unknown:
            raise ConfigError(f"unknown network keys {sorted(unknown)}")

    @classmethod
    def from_mapping(cls, mapping):
        """Build from string key/values; network and training keys are recognised by name."""
        top, net, train = {}, {}, {}
        own = {f.name: f for f in fields(cls)}
        defaults = cls()
        for key, value in mapping.items():
            if key in own and key not in ("net", "train"):
                top[key] = _convert(getattr(defaults, key), value)
            elif key in _TRAIN_KEYS:
                name = _TRAIN_KEYS[key]
                train[name] = _convert(getattr(defaults.train, name), value)
            elif key in _NET_KEYS:
                net[key] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        try:
            return cls(net=net, train=TrainConfig(**train), **top)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc

    @classmethod
    def from_file(cls, path, overrides=None):
        mapping = read_config_file(path) if path else {}
        mapping.update(overrides or {})
        return cls.from_mapping(mapping)

    def with_overrides(self, overrides):
        return type(self).from_mapping({**self.to_mapping(), **overrides})

    def net_config(self, radio):
        return BaseNetConfig.from_dict({**self.net, "K": radio.K, "L": radio.L, "Nr": radio.Nr,
                                        "n_classes": self.classes})

    def to_mapping(self):
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "net":
                out.update({k: v[k] for k in sorted(v)})
            elif f.name == "train":
                out.update({key: str(getattr(v, name)) for key, name in _TRAIN_KEYS.items()})
            elif isinstance(v, tuple):
                out[f.name] = ",".join(str(x) for x in v)
            else:
                out[f.name] = str(v)
        return out

    def replace(self, **kw):
        return replace(self, **kw)


def parse_assignments(items):
    """``["k=v", ...]`` from the command line into a dict."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def thread_count():
    """Worker cap from ``RF_NET_THREADS`` (default 1)."""
    raw = os.environ.get("RF_NET_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"RF_NET_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError("RF_NET_THREADS must be >= 1")
    return n
