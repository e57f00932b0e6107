"""Command-line entry point: ``caso <command> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ABLATIONS, TrainingConfig, parse_overrides, read_config_file
from .data import SynthSpec, generate_planted_partition, load_bundle, write_pairs
from .encoders import NscMeasure, build_operators
from .evaluation import RankingMetrics, evaluate, fold_splits, split_memberships
from .structure import structure_report
from .train import TrainingError, fit

DEFAULT_KS = (1, 3, 5)

# flag name -> config key for the hyperparameter overrides
_HYPER_FLAGS = {
    "alpha": float, "beta": float, "gamma": float, "lambda": float, "theta": float,
    "zeta": float, "T": int, "dim": int, "lr": float, "batch_size": int, "epochs": int,
    "patience": int, "fme_iterations": int, "train_frac": float, "valid_frac": float,
}
_FLAG_TO_KEY = {"lr": "learning_rate", "epochs": "max_epochs", "lambda": "lam"}


def _add_data_args(p, required=True):
    p.add_argument("--graph", required=required, help="edge list file")
    p.add_argument("--memberships", required=required, help="user-community membership file")


def _add_model_args(p):
    p.add_argument("--config", help="flat 'key = value' configuration file")
    for flag, typ in _HYPER_FLAGS.items():
        p.add_argument(f"--{flag.replace('_', '-')}", dest=flag, type=typ, default=None)
    p.add_argument("--measure", choices=[m.value for m in NscMeasure], default=None)
    p.add_argument("--recompute", choices=["per-step", "per-epoch"], default=None)
    for name in ABLATIONS:
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, action="store_true", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--K", dest="K", type=int, action="append", help="cutoff (repeatable)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="caso", description="Community recommendation with social and collaborative encoders.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", help="dataset sizes and structural diagnostics")
    _add_data_args(p)

    p = sub.add_parser("synth", help="write a planted-partition dataset")
    p.add_argument("--n", type=int, default=400)
    p.add_argument("--blocks", type=int, default=4)
    p.add_argument("--p-in", type=float, default=0.3)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--memberships-per-user", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("train", help="fit on a hold-out split and write a checkpoint")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("evaluate", help="ranking metrics of a checkpoint on its test split")
    _add_data_args(p)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--K", dest="K", type=int, action="append")

    p = sub.add_parser("cross-validate", help="k-fold cross-validation")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--trials", type=int, default=1, help="repeat with seeds seed..seed+trials-1")

    p = sub.add_parser("ablate", help="full model against each single-component ablation")
    _add_data_args(p)
    _add_model_args(p)

    p = sub.add_parser("sweep", help="vary one hyperparameter over a grid")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--param", required=True)
    p.add_argument("--grid", required=True, help="comma-separated values")
    return parser


def resolve_config(args) -> TrainingConfig:
    """Defaults, then the config file, then explicit flags."""
    values = read_config_file(args.config) if getattr(args, "config", None) else {}
    flags = {}
    for flag in _HYPER_FLAGS:
        v = getattr(args, flag, None)
        if v is not None:
            flags[_FLAG_TO_KEY.get(flag, flag)] = v
    for name in ("measure", "recompute", "seed") + ABLATIONS:
        v = getattr(args, name, None)
        if v is not None:
            flags[name] = v
    values.update(parse_overrides(flags))
    return TrainingConfig(**values)


def _ks(args):
    return tuple(sorted(set(args.K))) if args.K else DEFAULT_KS


def _print_config(cfg: TrainingConfig, out) -> None:
    for k, v in cfg.to_items():
        print(f"config.{k} = {v}", file=out)


def _print_metrics(rows: list[tuple[str, RankingMetrics]], out) -> None:
    """Human table (one row per model) followed by ``metric.`` lines."""
    names = [n for n, _ in rows[0][1].items()]
    label_w = max(8, *(len(label) for label, _ in rows))
    print(f"{'model':<{label_w}} " + " ".join(f"{n:>10}" for n in names), file=out)
    for label, m in rows:
        print(f"{label:<{label_w}} " + " ".join(f"{v:>10.4f}" for _, v in m.items()), file=out)
    for label, m in rows:
        prefix = "metric." if len(rows) == 1 else f"metric.{label}."
        for n, v in m.items():
            print(f"{prefix}{n} = {v!r}", file=out)


def run_holdout(bundle, cfg: TrainingConfig, ks=DEFAULT_KS):
    """Split, fit and evaluate once; returns ``(split, fit_result, metrics)``."""
    split = split_memberships(bundle.memberships, cfg.train_frac, cfg.valid_frac, cfg.seed)
    ops = build_operators(bundle.graph, split.train, cfg.measure)
    res = fit(bundle.graph, split.train, split.validation, cfg, ops)
    return split, res, evaluate(res.user_emb, res.state.community_emb, split, ks)


def _mean_metrics(ms: list[RankingMetrics]) -> RankingMetrics:
    out = RankingMetrics(n_evaluated_users=sum(m.n_evaluated_users for m in ms))
    for k in ms[0].recall_at:
        out.recall_at[k] = float(np.mean([m.recall_at[k] for m in ms]))
        out.ndcg_at[k] = float(np.mean([m.ndcg_at[k] for m in ms]))
    return out


def cmd_stats(args, out):
    bundle = load_bundle(args.graph, args.memberships)
    for k, v in bundle.stats().items():
        print(f"stat.{k} = {v}", file=out)
    for k, v in structure_report(bundle.graph, bundle.memberships).as_dict().items():
        print(f"stat.{k} = {v!r}", file=out)


def cmd_synth(args, out):
    params = SynthSpec(args.n, args.blocks, args.p_in, args.p_out, args.memberships_per_user, args.seed)
    bundle = generate_planted_partition(params)
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    A = bundle.graph.adjacency.tocoo()
    tok = bundle.user_tokens
    edges = [(tok[i], tok[j]) for i, j in zip(A.row, A.col) if i < j]
    write_pairs(dest / "graph.txt", edges, header=str(params))
    comm = bundle.community_tokens
    write_pairs(dest / "memberships.txt", [(tok[i], comm[k]) for i, k in bundle.memberships.pairs()], header=str(params))
    for k, v in bundle.stats().items():
        print(f"stat.{k} = {v}", file=out)
    print(f"wrote {dest / 'graph.txt'} and {dest / 'memberships.txt'}", file=out)


def cmd_train(args, out):
    cfg = resolve_config(args)
    _print_config(cfg, out)
    bundle = load_bundle(args.graph, args.memberships)
    _, res, metrics = run_holdout(bundle, cfg, _ks(args))
    dest = Path(args.out)
    dest.mkdir(parents=True, exist_ok=True)
    ckpt = Checkpoint(
        cfg,
        {"user_base": res.state.user_base, "community": res.state.community_emb, "user_final": res.user_emb},
        {"data_hash": bundle.content_hash, "best_epoch": str(res.best_epoch),
         "users": str(bundle.graph.n_users), "communities": str(bundle.memberships.n_communities)},
    )
    save_checkpoint(dest / "model.ckpt", ckpt)
    (dest / "config.txt").write_text(cfg.dumps())
    with open(dest / "train_log.tsv", "w") as fh:
        cols = list(res.log[0])
        fh.write("\t".join(cols) + "\n")
        for row in res.log:
            fh.write("\t".join(repr(row[c]) for c in cols) + "\n")
    print(f"best_epoch = {res.best_epoch}", file=out)
    _print_metrics([("caso", metrics)], out)


def cmd_evaluate(args, out):
    ckpt = load_checkpoint(args.checkpoint)
    cfg = ckpt.config
    _print_config(cfg, out)
    bundle = load_bundle(args.graph, args.memberships)
    stored = ckpt.meta.get("data_hash")
    if stored is not None and stored != bundle.content_hash:
        raise ValueError("checkpoint was trained on different data (content hash mismatch)")
    split = split_memberships(bundle.memberships, cfg.train_frac, cfg.valid_frac, cfg.seed)
    metrics = evaluate(ckpt.user_final, ckpt.community_emb, split, _ks(args))
    _print_metrics([("caso", metrics)], out)


def cmd_cross_validate(args, out):
    cfg = resolve_config(args)
    _print_config(cfg, out)
    bundle = load_bundle(args.graph, args.memberships)
    ks = _ks(args)
    per_fold = []
    for trial in range(args.trials):
        seed = cfg.seed + trial
        for f, split in enumerate(fold_splits(bundle.memberships, args.folds, cfg.valid_frac, seed)):
            run_cfg = cfg.replace(seed=seed)
            ops = build_operators(bundle.graph, split.train, run_cfg.measure)
            res = fit(bundle.graph, split.train, split.validation, run_cfg, ops)
            m = evaluate(res.user_emb, res.state.community_emb, split, ks)
            per_fold.append((f"t{trial}f{f}", m))
    rows = per_fold + [("mean", _mean_metrics([m for _, m in per_fold]))]
    _print_metrics(rows, out)


def cmd_ablate(args, out):
    cfg = resolve_config(args)
    _print_config(cfg, out)
    bundle = load_bundle(args.graph, args.memberships)
    base = cfg.replace(**{a: False for a in ABLATIONS})
    rows = []
    for name in ("full",) + ABLATIONS:
        variant = base if name == "full" else base.replace(**{name: True})
        rows.append((name, run_holdout(bundle, variant, _ks(args))[2]))
    _print_metrics(rows, out)


def cmd_sweep(args, out):
    cfg = resolve_config(args)
    _print_config(cfg, out)
    bundle = load_bundle(args.graph, args.memberships)
    rows = []
    for raw in args.grid.split(","):
        raw = raw.strip()
        variant = cfg.replace(**parse_overrides({args.param: raw}))
        rows.append((f"{args.param}={raw}", run_holdout(bundle, variant, _ks(args))[2]))
    _print_metrics(rows, out)


_COMMANDS = {
    "stats": cmd_stats, "synth": cmd_synth, "train": cmd_train, "evaluate": cmd_evaluate,
    "cross-validate": cmd_cross_validate, "ablate": cmd_ablate, "sweep": cmd_sweep,
}


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _COMMANDS[args.command](args, out)
    except (ValueError, OSError, TrainingError) as exc:
        print(f"caso: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
