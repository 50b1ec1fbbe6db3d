"""``rfnet`` command line: gen, train, eval, crossval, selftest."""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from ..baselines import METHODS, train_method
from ..base_network import BaseNetConfig
from ..meta import RFNetModel
from ..signal_sim import VARIANTS, ConfigError, NormStats, RadioConfig, apply_norm, build_dataset, \
    default_class_specs, normalize_dataset
from .config import EXTRA_METHODS, RunConfig, parse_assignments, thread_count
from .crossval import MetricsReport, emit_report, evaluate, run_crossval
from .formats import FormatError, read_checkpoint, read_dataset, write_checkpoint, write_dataset
from .selftest import selftest


def build_parser():
    p = argparse.ArgumentParser(prog="rfnet", description="One-shot RF activity recognition experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="simulate a dataset and write it as an RFDS file")
    g.add_argument("--radio", choices=VARIANTS, default="wifi")
    g.add_argument("--envs", type=int, default=20)
    g.add_argument("--classes", type=int, default=6)
    g.add_argument("--obs", type=int, default=8, help="observations per environment per class")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train on every environment of a dataset file")
    t.add_argument("--data", required=True)
    t.add_argument("--method", choices=METHODS, default=None)
    t.add_argument("--config", default=None, help="key = value file")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config key")
    t.add_argument("--out", required=True, help="output directory")

    e = sub.add_parser("eval", help="evaluate a checkpoint on the environments of a dataset file")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--shots", type=int, choices=(1, 2, 3), default=1)
    e.add_argument("--episodes", type=int, default=200)
    e.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("crossval", help="environment-level cross-validation with metrics files")
    c.add_argument("--config", default=None)
    c.add_argument("--method", choices=METHODS + EXTRA_METHODS, default=None)
    c.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    c.add_argument("--out", default=None)

    sub.add_parser("selftest", help="run the built-in verification suites")
    return p


def _run_config(args):
    overrides = parse_assignments(args.set)
    if args.method:
        overrides["method"] = args.method
    if getattr(args, "seed", None) is not None:
        overrides["seeds"] = str(args.seed)
    if getattr(args, "out", None) and args.command == "crossval":
        overrides["out"] = args.out
    return RunConfig.from_file(args.config, overrides)


def cmd_gen(args):
    radio = RadioConfig.preset(args.radio)
    ds = build_dataset(radio, args.envs, default_class_specs(args.classes), args.obs, args.seed)
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} records from {len(ds.environments)} environments to {args.out}")


def cmd_train(args):
    cfg = _run_config(args)
    data = read_dataset(args.data)
    cfg = cfg.replace(classes=data.n_classes)
    train, _, stats = normalize_dataset(data)
    net_cfg = cfg.net_config(data.radio)
    seed = cfg.seeds[0]
    result = train_method(cfg.method, train, net_cfg, cfg.train, seed=seed)
    os.makedirs(args.out, exist_ok=True)
    meta = {**cfg.to_mapping(), **{f"net.{k}": ",".join(map(str, v)) if isinstance(v, tuple) else str(v)
                                   for k, v in net_cfg.to_dict().items()},
            "norm.mean": repr(stats.mean), "norm.std": repr(stats.std)}
    ckpt = os.path.join(args.out, "model.rfck")
    write_checkpoint(ckpt, result.model.state_dict(), meta)
    report = MetricsReport(cfg.method)
    report.loss_traces[(0, seed)] = result.losses
    emit_report(report, args.out)
    n = max(1, len(result.losses) // 10)
    print(f"trained {cfg.method} on {len(train.environments)} environments; "
          f"episode loss {np.mean(result.losses[:n]):.4f} -> {np.mean(result.losses[-n:]):.4f}; saved {ckpt}")


def load_model(path):
    """Model, method, TrainConfig and normalisation stats stored in a checkpoint."""
    state, meta = read_checkpoint(path)
    net_cfg = BaseNetConfig.from_dict({k[4:]: v for k, v in meta.items() if k.startswith("net.")})
    cfg = RunConfig.from_mapping({k: v for k, v in meta.items() if "." not in k})
    model = RFNetModel(net_cfg)
    model.load_state_dict(state)
    stats = NormStats(float(meta["norm.mean"]), float(meta["norm.std"]))
    return model, cfg, stats


def cmd_eval(args):
    model, cfg, stats = load_model(args.ckpt)
    data = apply_norm(read_dataset(args.data), stats)
    out = evaluate(cfg.method, model, data, cfg.train, args.shots, args.episodes, args.seed, workers=thread_count())
    correct, total = sum(o[1] for o in out), sum(o[2] for o in out)
    print(f"method={cfg.method} shots={args.shots} episodes={args.episodes} accuracy={correct / total:.4f}")


def cmd_crossval(args):
    cfg = _run_config(args)
    report = run_crossval(cfg, progress=lambda m: print(m, flush=True))
    paths = emit_report(report, cfg.out)
    sys.stdout.write(report.summary_text())
    print(f"metrics written to {paths['metrics.csv']}")


def cmd_selftest(args):
    results = selftest(report=print)
    failed = [r for r in results if not r.ok]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


COMMANDS = {"gen": cmd_gen, "train": cmd_train, "eval": cmd_eval, "crossval": cmd_crossval,
            "selftest": cmd_selftest}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return COMMANDS[args.command](args) or 0
    except (ConfigError, FormatError, OSError, KeyError) as exc:
        parser.exit(2, f"rfnet {args.command}: error: {exc}\n")


if __name__ == "__main__":
    sys.exit(main())
