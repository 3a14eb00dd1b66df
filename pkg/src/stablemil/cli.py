"""Command-line interface.

Subcommands: generate, train, select, embed, evaluate, reproduce, pr-curve.
Exit codes: 0 success, 2 configuration error, 3 data error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import benchgen, dataio
from .classifier import BagClassifier, train_bag_classifier
from .embedding import EmbeddingSpec, embed_dataset, local_scale
from .errors import (
    DimMismatch,
    EmptyDataset,
    InvalidConfig,
    MissingBackgroundTag,
    ParseError,
    StableMILError,
    UnknownTruth,
)
from .experiments import (
    METHODS,
    ExperimentConfig,
    StageSeeds,
    pr_curve,
    report_csv,
    report_text,
    run_experiment,
    run_stablemil,
    seed_for,
    setting_hyperparams,
)
from .select import StablePool, learn_stable_instances, select_threshold

CONFIG_ERRORS = (InvalidConfig,)
DATA_ERRORS = (ParseError, DimMismatch, EmptyDataset, UnknownTruth,
               MissingBackgroundTag, OSError)


def _hyperparams(args):
    hp = setting_hyperparams()
    from dataclasses import replace

    updates = {}
    if getattr(args, "components", None) is not None:
        updates["gmm_components"] = args.components
    if getattr(args, "restarts", None) is not None:
        updates["gmm_restarts"] = args.restarts
    if getattr(args, "base_svm_c", None) is not None:
        updates["base_svm_C"] = args.base_svm_c
    return replace(hp, **updates) if updates else hp


def cmd_generate(args) -> int:
    config = benchgen.load_config(args.config)
    root = args.seed
    from dataclasses import replace

    population = benchgen.generate_population(
        replace(config, seed=seed_for(root, "datagen", 0))
    )
    a = benchgen.draw_a(config.a_range, seed_for(root, "draw-a", 0))
    split = benchgen.biased_split(population, a, seed_for(root, "split", 0))
    dataio.save_dataset(split.train, args.out_train)
    dataio.save_dataset(split.test, args.out_test)
    print(f"a={a:.4f} train={len(split.train.bags)} test={len(split.test.bags)}")
    return 0


def cmd_train(args) -> int:
    train = dataio.load_dataset(args.train)
    hp = _hyperparams(args)
    clf = train_bag_classifier(
        train, K=hp.gmm_components, seed=seed_for(args.seed, "gmm", 0),
        C=hp.base_svm_C, restarts=hp.gmm_restarts,
    )
    Path(args.out).write_text(clf.to_json() + "\n", encoding="utf-8")
    print(f"trained mifv classifier on {len(train.bags)} bags -> {args.out}")
    return 0


def cmd_select(args) -> int:
    train = dataio.load_dataset(args.train)
    clf = BagClassifier.from_json(Path(args.model).read_text(encoding="utf-8"))
    tau = select_threshold(train.negatives(), clf, seed_for(args.seed, "threshold-split", 0))
    tau_eff = tau if tau > 0 else 0.5 / len(train.negatives())
    pool = learn_stable_instances(train, clf, tau_eff)
    Path(args.out).write_text(pool.to_json() + "\n", encoding="utf-8")
    print(f"tau={tau:.6g} tau_effective={tau_eff:.6g} pool={pool.size} "
          f"of {len(pool.all_scores)} candidates -> {args.out}")
    return 0


def cmd_embed(args) -> int:
    train = dataio.load_dataset(args.train)
    data = dataio.load_dataset(args.data)
    pool = StablePool.from_json(Path(args.pool).read_text(encoding="utf-8"))
    lambdas = local_scale(pool, train.all_instances(), k=args.k)
    spec = EmbeddingSpec(pool, lambdas)
    emb = embed_dataset(data, spec)
    Path(args.out).write_text(emb.to_csv(), encoding="utf-8")
    print(f"embedded {len(data.bags)} bags to q={pool.size} -> {args.out}")
    return 0


def _write_reports(cfg, reports, records, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "report.csv").write_text(report_csv(cfg, records), encoding="utf-8")
    (out_dir / "report.txt").write_text(report_text(cfg, reports, records), encoding="utf-8")
    if "stablemil" in cfg.methods:
        pool = reports["stablemil"].results[0].pool
        (out_dir / "pool.json").write_text(pool.to_json() + "\n", encoding="utf-8")
        try:
            pr = pr_curve(pool.all_scores)
            (out_dir / "pr.csv").write_text(pr.to_csv(), encoding="utf-8")
        except (UnknownTruth, ValueError):
            pass  # real data without ground-truth roles has no PR curve


def cmd_evaluate(args) -> int:
    train = dataio.load_dataset(args.train)
    test = dataio.load_dataset(args.test)
    hp = _hyperparams(args)
    if args.method not in METHODS:
        raise InvalidConfig(f"method must be one of {METHODS}")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    from .experiments import MethodResult, run_method  # local import to keep CLI thin

    results = []
    for rep in range(args.reps):
        seeds = StageSeeds.derive(args.seed, rep)
        results.append(run_method(args.method, train, test, hp, seeds))
    accs = [r.accuracy for r in results]
    import numpy as np

    mean = float(np.mean(accs))
    std = 0.0 if len(accs) < 2 else float(np.std(accs, ddof=1))
    lines = ["method,rep,accuracy,pool_size,tau,tau_effective"]
    for rep, r in enumerate(results):
        f = r.csv_fields()
        lines.append(f"{args.method},{rep},{f['accuracy']},{f['pool_size']},"
                     f"{f['tau']},{f['tau_effective']}")
    (out_dir / "report.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    (out_dir / "report.txt").write_text(
        f"{args.method}: mean={mean:.4f} std={std:.4f} over {args.reps} repetitions\n",
        encoding="utf-8",
    )
    if args.method == "stablemil" and results[0].pool is not None:
        (out_dir / "pool.json").write_text(results[0].pool.to_json() + "\n", encoding="utf-8")
    print(f"{args.method}: mean={mean:.4f} std={std:.4f} -> {out_dir}")
    return 0


def cmd_reproduce(args) -> int:
    shift_cfg = benchgen.setting_config(args.setting)
    cfg = ExperimentConfig(
        shift_config=shift_cfg,
        methods=METHODS,
        repetitions=args.reps,
        seed=args.seed,
        mode=args.mode,
        hyperparams=setting_hyperparams(),
    )
    reports, records = run_experiment(cfg, jobs=args.jobs)
    _write_reports(cfg, reports, records, Path(args.out_dir))
    for m in METHODS:
        print(f"{m}: {reports[m].mean:.4f} +- {reports[m].std:.4f}")
    return 0


def cmd_pr_curve(args) -> int:
    pool = StablePool.from_json(Path(args.pool).read_text(encoding="utf-8"))
    scored = pool.all_scores if pool.all_scores else pool.members
    pr = pr_curve(scored)
    Path(args.out).write_text(pr.to_csv(), encoding="utf-8")
    print(f"average precision = {pr.average_precision:.4f} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stablemil")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a biased train/test split")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-train", required=True)
    p.add_argument("--out-test", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train the bag classifier")
    p.add_argument("--train", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--components", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--base-svm-c", type=float)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", help="select the stable instance pool")
    p.add_argument("--train", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("embed", help="embed bags against a pool")
    p.add_argument("--train", required=True, help="reference instances for local scaling")
    p.add_argument("--data", required=True)
    p.add_argument("--pool", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=int, default=7)
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("evaluate", help="repeated evaluation on fixed files")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--train", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--components", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--base-svm-c", type=float)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("reproduce", help="full benchmark comparison")
    p.add_argument("--setting", type=int, required=True, choices=(1, 2))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reps", type=int, default=30)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--mode", choices=("shift", "iid"), default="shift")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_reproduce)

    p = sub.add_parser("pr-curve", help="precision/recall of a scored pool")
    p.add_argument("--pool", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pr_curve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DATA_ERRORS as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except StableMILError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
