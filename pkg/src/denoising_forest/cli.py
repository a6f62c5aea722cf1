"""Command line entry point: ``denoising-forest <subcommand> ...``.

Exit codes: 0 success, 2 bad arguments, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dae as dae_mod
from .data import DataError, Dataset, MinMaxScaler, make_subsets, read_table
from .datasets import load as load_dataset
from .experiment import (Report, TrainedPipeline, derive_seed, evaluate_pipeline, load_config,
                         run_experiment)
from .forest import ForestConfig, load_model, save_model, train_forest
from .multipath import multipath_predict_many, refined_predict_many
from .recovery import recover_many
from .treeselect import entropy_report, select_trees

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("denoising_forest")


class UsageError(Exception):
    pass


def _fraction(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in [0, 1]")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"{text} must be >= 1")
    return value


def _levels(text: str) -> tuple[float, ...]:
    try:
        return tuple(_fraction(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


# preprocessing travels inside the model document so every later subcommand
# scales features exactly as training did

def _preprocessing(scaler: MinMaxScaler, scaled: Dataset) -> dict:
    return {"preprocessing": {"minimum": scaler.minimum.tolist(),
                              "maximum": scaler.maximum.tolist(),
                              "column_means": scaled.column_means.tolist()}}


def _load_model(path):
    try:
        forest, doc = load_model(path)
    except FileNotFoundError as exc:
        raise DataError(f"{path}: no such model file") from exc
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: not a model document ({exc})") from exc
    if "preprocessing" not in doc:
        raise DataError(f"{path}: model carries no preprocessing block")
    pre = doc["preprocessing"]
    scaler = MinMaxScaler(np.asarray(pre["minimum"]), np.asarray(pre["maximum"]))
    return forest, scaler, np.asarray(pre["column_means"]), doc


def _load_stack(path):
    try:
        return dae_mod.load_stack(path)
    except FileNotFoundError as exc:
        raise DataError(f"{path}: no such autoencoder file") from exc
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: not an autoencoder document ({exc})") from exc


def _scaled(args, scaler: MinMaxScaler) -> Dataset:
    ds = load_dataset(args.data, args.target_col)
    if ds.n_features != scaler.minimum.size:
        raise DataError(f"{args.data}: {ds.n_features} features, model expects {scaler.minimum.size}")
    return scaler.transform_dataset(ds)


def _emit(args, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} needs {' '.join(missing)}")


def cmd_train(args) -> None:
    _require(args, "data", "out")
    ds = load_dataset(args.data, args.target_col)
    scaler = MinMaxScaler.fit(ds.features)
    scaled = scaler.transform_dataset(ds)
    cfg = ForestConfig(args.trees, args.depth, args.min_leaf, args.max_features, args.overlap,
                       None, args.seed)
    plan = make_subsets(scaled, cfg.tree_count, cfg.overlap_ratio, None, derive_seed(args.seed, 5))
    forest = train_forest(scaled, plan, cfg, n_jobs=args.jobs)
    save_model(forest, args.out, _preprocessing(scaler, scaled))
    log.info("trained %d trees of depth %d on %d rows", forest.tree_count, args.depth, ds.n_samples)


def cmd_select(args) -> None:
    _require(args, "model", "data", "out")
    forest, scaler, means, doc = _load_model(args.model)
    if forest.tree_count < 2:
        raise UsageError("selection needs a model with at least 2 trees")
    held = _scaled(args, scaler)
    report = entropy_report(forest, held.features)
    chosen = select_trees(forest, report, args.keep)
    extra = {k: v for k, v in doc.items() if k not in ("version", "config", "trees")}
    save_model(chosen, args.out, extra)
    if args.entropy_out:
        report.to_csv(args.entropy_out)
    log.info("kept %d of %d trees", chosen.tree_count, forest.tree_count)


def cmd_train_dae(args) -> None:
    _require(args, "model", "data", "out")
    forest, scaler, means, _ = _load_model(args.model)
    train = _scaled(args, scaler)
    cfg = dae_mod.TrainConfig(args.lr, args.epochs, args.batch, args.noise_levels, args.seed,
                              args.patience, encoding=args.encoding)
    stack = dae_mod.train_stack(train, forest, cfg, args.per_depth, means)
    dae_mod.save_stack(stack, args.out)


def _features(args, scaler: MinMaxScaler) -> np.ndarray:
    if args.features_only:
        X = read_table(args.data)
        if X.shape[1] != scaler.minimum.size:
            raise DataError(f"{args.data}: {X.shape[1]} columns, model expects {scaler.minimum.size}")
        return scaler.transform(X)
    return _scaled(args, scaler).features


def cmd_predict(args) -> None:
    _require(args, "model", "data")
    forest, scaler, _, _ = _load_model(args.model)
    X = _features(args, scaler)
    if args.mode == "plain":
        pred = forest.predict(X)
    else:
        if args.dae is None:
            raise UsageError(f"--mode {args.mode} needs --dae")
        rec = recover_many(forest, _load_stack(args.dae), X)
        pred = (refined_predict_many(forest, rec.refined_leaves) if args.mode == "refined"
                else multipath_predict_many(forest, X, rec.flags))
    if not np.all(np.isfinite(pred)):
        raise dae_mod.NumericError("non-finite prediction")
    _emit(args, "".join(f"{i},{p!r}\n" for i, p in enumerate(pred.tolist())))


def cmd_evaluate(args) -> None:
    _require(args, "model", "data")
    forest, scaler, means, _ = _load_model(args.model)
    test = _scaled(args, scaler)
    modes = ("plain", "multipath_known_noise")
    stack = None
    if args.dae is not None:
        stack = _load_stack(args.dae)
        modes = ("plain", "refined_only", "multipath", "multipath_known_noise")
    pipe = TrainedPipeline(forest, forest, test, test, means, stack, None, {})
    report = Report(config=None)
    for rep in range(args.reps):
        rng = np.random.default_rng(derive_seed(args.seed, rep, 100))
        for mode, metrics in evaluate_pipeline(pipe, modes, args.snr, rng).items():
            report.entries.append({"mode": mode, "snr": args.snr, "rep": rep, **metrics})
    _emit(args, report.to_csv())


def cmd_benchmark(args) -> None:
    _require(args, "config")
    try:
        cfg = load_config(args.config)
    except FileNotFoundError as exc:
        raise UsageError(f"{args.config}: no such config file") from exc
    overrides = {}
    if args.data is not None:
        overrides["dataset"] = args.data
    if args.target_col is not None:
        overrides["target_column"] = args.target_col
    if args.seed_given:
        overrides["seed"] = args.seed
    cfg = replace(cfg, **overrides)
    _emit(args, run_experiment(cfg).to_csv())


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--data", help="CSV path or bundled dataset name")
    shared.add_argument("--target-col", help="target column index, or 'last' (default)")
    shared.add_argument("--seed", type=int, default=None)
    shared.add_argument("--out", help="output path (stdout when omitted for text outputs)")
    shared.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="denoising-forest", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", parents=[shared], help="train a regression forest")
    p.add_argument("--trees", type=_positive, default=25)
    p.add_argument("--depth", type=_positive, default=4)
    p.add_argument("--overlap", type=_fraction, default=1.0)
    p.add_argument("--min-leaf", type=_positive, default=1)
    p.add_argument("--max-features", type=_positive, default=None)
    p.add_argument("--jobs", type=_positive, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("select", parents=[shared], help="keep the lowest cross-entropy trees")
    p.add_argument("--model", required=True)
    p.add_argument("--keep", type=_fraction, default=0.7)
    p.add_argument("--entropy-out", help="write the per-tree entropy table here")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("train-dae", parents=[shared], help="train the path denoising autoencoders")
    p.add_argument("--model", required=True)
    p.add_argument("--noise-levels", type=_levels, default=(0.0, 0.125, 0.25, 0.375, 0.5))
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--batch", type=_positive, default=32)
    p.add_argument("--patience", type=int, default=20)
    p.add_argument("--per-depth", action="store_true")
    p.add_argument("--encoding", choices=("distance", "marked", "binary"), default="marked")
    p.set_defaults(func=cmd_train_dae)

    p = sub.add_parser("predict", parents=[shared], help="predict targets for a CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--dae")
    p.add_argument("--mode", choices=("plain", "refined", "multipath"), default="plain")
    p.add_argument("--features-only", action="store_true",
                   help="every column is a feature (no target column)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", parents=[shared], help="metrics on a noise-injected CSV")
    p.add_argument("--model", required=True)
    p.add_argument("--dae")
    p.add_argument("--snr", type=_fraction, default=0.25)
    p.add_argument("--reps", type=_positive, default=1)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", parents=[shared], help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.seed_given = args.seed is not None
    args.seed = 0 if args.seed is None else args.seed
    try:
        args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (dae_mod.NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
