"""Environment-level cross-validation and metrics reporting."""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..baselines import evaluate_episode, train_method
from ..meta import TrainConfig, chance_model, sample_episode
from ..numerics import default_dtype, precision
from ..signal_sim import ConfigError, RadioConfig, build_dataset, default_class_specs, normalize_dataset
from .config import RunConfig, thread_count
from .formats import read_dataset


@dataclass(frozen=True)
class EpisodeRecord:
    fold: int
    seed: int
    shots: int
    episode: int
    env_id: int
    correct: int
    total: int


@dataclass
class MetricsReport:
    method: str
    cells: list = field(default_factory=list)          # (fold, seed, shots, accuracy)
    episodes: list = field(default_factory=list)       # EpisodeRecord
    loss_traces: dict = field(default_factory=dict)    # (fold, seed) -> [loss, ...]
    folds: list = field(default_factory=list)          # test environment ids per fold

    def add_cell(self, fold, seed, shots, records):
        total = sum(r.total for r in records)
        acc = sum(r.correct for r in records) / total
        if not 0.0 <= acc <= 1.0:
            raise ValueError(f"accuracy {acc} outside [0, 1]")
        self.cells.append((fold, seed, shots, acc))
        self.episodes.extend(records)

    def accuracies(self, shots=None):
        return np.array([a for _, _, s, a in self.cells if shots is None or s == shots])

    def mean(self, shots=None):
        return float(self.accuracies(shots).mean())

    def std(self, shots=None):
        return float(self.accuracies(shots).std())

    def shots(self):
        return sorted({s for _, _, s, _ in self.cells})

    def summary_text(self):
        lines = [f"method: {self.method}", f"folds: {len(self.folds)}", f"cells: {len(self.cells)}",
                 f"episodes: {len(self.episodes)}"]
        for s in self.shots():
            lines.append(f"{s}-shot accuracy: mean {self.mean(s):.4f} std {self.std(s):.4f} "
                         f"over {len(self.accuracies(s))} cells")
        return "\n".join(lines) + "\n"


def load_or_generate(cfg: RunConfig):
    """The dataset a run uses: read from ``cfg.data`` or simulated from the generation keys."""
    if cfg.data:
        return read_dataset(cfg.data)
    radio = RadioConfig.preset(cfg.radio)
    return build_dataset(radio, cfg.envs, default_class_specs(cfg.classes), cfg.obs, cfg.data_seed)


def partition_folds(env_ids, folds, split=0.8, seed=0):
    """Test environment ids per fold; every environment is tested in exactly one fold.

    With ``folds == 1`` a single split holds out ``1 - split`` of the environments.
    """
    env_ids = list(env_ids)
    if folds > len(env_ids):
        raise ConfigError(f"{folds} folds need at least {folds} environments, have {len(env_ids)}")
    perm = np.random.default_rng(seed).permutation(env_ids)
    if folds == 1:
        n_test = max(1, int(round(len(env_ids) * (1 - split))))
        if n_test >= len(env_ids):
            raise ConfigError("split leaves no training environments")
        return [sorted(int(e) for e in perm[:n_test])]
    return [sorted(int(e) for e in chunk) for chunk in np.array_split(perm, folds)]


def split_fold(dataset, test_ids):
    """Normalised (train, test) datasets; statistics come from the training environments only."""
    test_ids = set(test_ids)
    train_ids = [e for e in dataset.env_ids if e not in test_ids]
    if not train_ids:
        raise ConfigError("fold leaves no training environments")
    train, (test,), stats = normalize_dataset(dataset.subset(train_ids), [dataset.subset(sorted(test_ids))])
    return train, test, stats


def _seed_for(*parts):
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


def evaluate(method, model, test, train_cfg: TrainConfig, shots, n_episodes, seed, n_query=None, workers=1):
    """``n_episodes`` test episodes; returns a list of (env_id, correct, total).

    Episodes are sampled sequentially from one generator, then evaluated
    (possibly on several threads) against the frozen model, so results do
    not depend on the worker count.
    """
    rng = np.random.default_rng(seed)
    n_query = n_query or train_cfg.n_query
    env_ids = test.env_ids
    episodes = [sample_episode(test, env_ids[rng.integers(len(env_ids))], test.n_classes, shots, n_query, rng)
                for _ in range(n_episodes)]
    cfg = TrainConfig(**{**train_cfg.__dict__, "shots": shots,
                         "test_adapt": train_cfg.test_adapt if shots >= 2 else "none"})
    dtype = default_dtype()

    def run(ep):
        with precision(dtype):
            pred, _ = evaluate_episode(method, model, ep, cfg)
        return ep.env_id, int(np.sum(pred == ep.query_y)), len(ep.query_y)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, episodes))
    return [run(ep) for ep in episodes]


def run_crossval(cfg: RunConfig, dataset=None, progress=None):
    """Train and evaluate ``cfg.method`` on every fold and seed; returns a MetricsReport."""
    dataset = dataset if dataset is not None else load_or_generate(cfg)
    if dataset.n_classes != cfg.classes:
        cfg = cfg.replace(classes=dataset.n_classes)
    net_cfg = cfg.net_config(dataset.radio)
    workers = thread_count()
    report = MetricsReport(cfg.method)
    report.folds = partition_folds(dataset.env_ids, cfg.folds, cfg.split, seed=cfg.seeds[0])
    for fold, test_ids in enumerate(report.folds):
        train, test, _ = split_fold(dataset, test_ids)
        for seed in cfg.seeds:
            if cfg.method == "chance":
                model, losses, method = chance_model(net_cfg, seed), [], "rfnet"
            else:
                result = train_method(cfg.method, train, net_cfg, cfg.train, seed=_seed_for(seed, fold))
                model, losses, method = result.model, result.losses, cfg.method
                leaked = {e for e, _ in result.seen_obs} & set(test_ids)
                if leaked:
                    raise RuntimeError(f"test environments {sorted(leaked)} reached training")
            report.loss_traces[(fold, seed)] = losses
            for shots in cfg.shots:
                out = evaluate(method, model, test, cfg.train, shots, cfg.episodes, _seed_for(seed, fold, shots),
                               workers=workers)
                records = [EpisodeRecord(fold, seed, shots, i, e, c, t) for i, (e, c, t) in enumerate(out)]
                report.add_cell(fold, seed, shots, records)
                if progress:
                    progress(f"fold {fold} seed {seed} {shots}-shot accuracy {report.cells[-1][3]:.4f}")
    return report


def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_report(report: MetricsReport, out_dir):
    """Write metrics.csv, episodes.csv, loss_trace.csv and summary.txt; returns their paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = {name: os.path.join(out_dir, name)
             for name in ("metrics.csv", "episodes.csv", "loss_trace.csv", "summary.txt")}
    m = report.method
    _write_csv(paths["metrics.csv"], ["method", "fold", "seed", "shots", "accuracy"],
               [[m, f, s, k, f"{a:.6f}"] for f, s, k, a in report.cells])
    _write_csv(paths["episodes.csv"], ["method", "fold", "seed", "shots", "episode", "env_id", "correct", "total"],
               [[m, r.fold, r.seed, r.shots, r.episode, r.env_id, r.correct, r.total] for r in report.episodes])
    _write_csv(paths["loss_trace.csv"], ["method", "fold", "seed", "step", "loss"],
               [[m, f, s, i, f"{v:.8g}"] for (f, s), trace in sorted(report.loss_traces.items())
                for i, v in enumerate(trace)])
    with open(paths["summary.txt"], "w", encoding="utf-8") as fh:
        fh.write(report.summary_text())
    return paths


def read_metrics_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [(r["method"], int(r["fold"]), int(r["seed"]), int(r["shots"]), float(r["accuracy"])) for r in rows]
