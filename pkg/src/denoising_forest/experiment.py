"""End-to-end experiment runner and the per-dataset presets."""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import dae as dae_mod
from .data import Dataset, MinMaxScaler, inject_noise_batch, make_subsets, train_test_split
from .datasets import load as load_dataset
from .forest import Forest, ForestConfig, train_forest
from .indicator import level_offsets
from .metrics import (indicator_cross_entropy, mean_std, normalized_l1, pooled_detection_rate,
                      precision_rate)
from .multipath import multipath_predict_many, refined_predict_many
from .recovery import recover_many, true_flags
from .treeselect import entropy_report, pre_selection_count, select_trees

log = logging.getLogger(__name__)

MODES = ("plain", "refined_only", "multipath", "multipath_known_noise", "feature_dae_baseline")
SNR_GRID = (0.0, 0.125, 0.25, 0.375, 0.5, 0.625, 0.75)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str = "concrete"
    target_column: str | None = None
    trees: int = 21
    max_depth: int = 4
    overlap_ratio: float = 1.0
    keep_fraction: float = 0.7
    min_leaf_samples: int = 1
    max_features: int | None = None
    subset_size: int | None = None
    selection_fraction: float = 0.15
    dae_epochs: int = 200
    dae_learning_rate: float = 0.1
    dae_batch_size: int = 32
    dae_patience: int = 20
    noise_levels: tuple[float, ...] = (0.0, 0.125, 0.25, 0.375, 0.5)
    per_depth: bool = False
    dae_encoding: str = "marked"
    snr_grid: tuple[float, ...] = SNR_GRID
    modes: tuple[str, ...] = MODES
    test_fraction: float = 0.2
    max_rows: int = 2000
    seed: int = 0
    repetitions: int = 1

    def __post_init__(self):
        if any(not 0.0 <= s <= 1.0 for s in self.snr_grid):
            raise ValueError(f"snr grid must lie in [0, 1]: {self.snr_grid}")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise ValueError(f"unknown modes {sorted(unknown)}; choose from {MODES}")

    def train_config(self, seed: int) -> dae_mod.TrainConfig:
        return dae_mod.TrainConfig(self.dae_learning_rate, self.dae_epochs, self.dae_batch_size,
                                   tuple(self.noise_levels), seed, self.dae_patience,
                                   encoding=self.dae_encoding)


# post-selection forest sizes per dataset; every preset trains the larger
# pre-selection forest that keep_fraction=0.7 reduces to this size
POST_SELECTION_SIZES = {"protein": 40, "concrete": 15, "music": 35, "energy": 20, "airfoil": 20}


def preset(name: str, **overrides) -> ExperimentConfig:
    """Benchmark presets; ``concrete_degradation`` is the unselected 25-tree scenario."""
    if name == "concrete_degradation":
        base = ExperimentConfig(dataset="concrete", trees=25, keep_fraction=1.0,
                                selection_fraction=0.0, modes=("plain",))
    else:
        keep = overrides.get("keep_fraction", 0.7)
        base = ExperimentConfig(dataset=name, trees=pre_selection_count(POST_SELECTION_SIZES[name], keep))
    return replace(base, **overrides)


@dataclass
class Report:
    config: ExperimentConfig
    entries: list[dict] = field(default_factory=list)
    repetitions: list[dict] = field(default_factory=list)

    METRICS = ("l1", "precision", "xent", "detection")

    def cells(self):
        seen = []
        for e in self.entries:
            if (e["mode"], e["snr"]) not in seen:
                seen.append((e["mode"], e["snr"]))
        return seen

    def aggregate(self) -> dict:
        """(mode, snr) -> {metric: (mean, std)} over repetitions."""
        out = {}
        for mode, snr in self.cells():
            rows = [e for e in self.entries if e["mode"] == mode and e["snr"] == snr]
            out[(mode, snr)] = {m: mean_std(r[m] for r in rows) for m in self.METRICS}
        return out

    def mean(self, mode: str, snr: float, metric: str = "l1") -> float:
        return self.aggregate()[(mode, snr)][metric][0]

    def to_csv(self, include_aggregates: bool = True) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["mode", "snr", "rep", *self.METRICS])
        for e in self.entries:
            writer.writerow([e["mode"], e["snr"], e["rep"], *(repr(e[m]) for m in self.METRICS)])
        if include_aggregates:
            for (mode, snr), stats in self.aggregate().items():
                writer.writerow([mode, snr, "mean", *(repr(stats[m][0]) for m in self.METRICS)])
                writer.writerow([mode, snr, "std", *(repr(stats[m][1]) for m in self.METRICS)])
        return buf.getvalue()


def derive_seed(*parts) -> int:
    return int(np.random.SeedSequence([abs(int(p)) for p in parts]).generate_state(1)[0])


@dataclass
class TrainedPipeline:
    """Everything fitted on the clean training split of one repetition."""

    forest: Forest
    full_forest: Forest
    train: Dataset
    test: Dataset
    column_means: np.ndarray
    stack: dict | None
    feature_dae: dae_mod.DenoisingAutoencoder | None
    info: dict


def fit_pipeline(cfg: ExperimentConfig, rep: int = 0, dataset: Dataset | None = None,
                 need_dae: bool = True, need_feature_dae: bool = False) -> TrainedPipeline:
    seed = derive_seed(cfg.seed, rep)
    ds = dataset if dataset is not None else load_dataset(cfg.dataset, cfg.target_column)
    rows_used = min(ds.n_samples, cfg.max_rows)
    ds = ds.subsample(cfg.max_rows, derive_seed(seed, 1))
    train, test = train_test_split(ds, cfg.test_fraction, derive_seed(seed, 2))
    scaler = MinMaxScaler.fit(train.features)
    train, test = scaler.transform_dataset(train), scaler.transform_dataset(test)
    if cfg.selection_fraction > 0:
        fit_set, select_set = train_test_split(train, cfg.selection_fraction, derive_seed(seed, 3))
    else:
        fit_set, select_set = train, None

    fcfg = ForestConfig(cfg.trees, cfg.max_depth, cfg.min_leaf_samples, cfg.max_features,
                        cfg.overlap_ratio, cfg.subset_size, derive_seed(seed, 4))
    plan = make_subsets(fit_set, cfg.trees, cfg.overlap_ratio, cfg.subset_size, derive_seed(seed, 5))
    full = train_forest(fit_set, plan, fcfg)
    info = {"rep": rep, "rows": rows_used, "train_rows": fit_set.n_samples,
            "test_rows": test.n_samples, "trees_trained": full.tree_count}
    forest = full
    if select_set is not None and cfg.trees >= 2:
        report = entropy_report(full, select_set.features)
        info["normalized_cross_entropy"] = float(report.normalized_mean.mean())
        if cfg.keep_fraction < 1.0:
            forest = select_trees(full, report, cfg.keep_fraction)
    info["trees_kept"] = forest.tree_count

    means = fit_set.column_means
    stack = None
    if need_dae:
        stack = dae_mod.train_stack(fit_set, forest, cfg.train_config(derive_seed(seed, 6)),
                                    cfg.per_depth, means)
    fdae = None
    if need_feature_dae:
        fdae = dae_mod.train_feature_dae(fit_set, cfg.train_config(derive_seed(seed, 7)), means)
    return TrainedPipeline(forest, full, fit_set, test, means, stack, fdae, info)


def _one_hot(forest: Forest, leaves) -> np.ndarray:
    offsets = level_offsets(forest, forest.max_depth)
    Z = np.zeros((leaves.shape[0], offsets[-1]))
    rows = np.arange(leaves.shape[0])
    for t in range(forest.tree_count):
        Z[rows, offsets[t] + leaves[:, t]] = 1.0
    return Z


def evaluate_pipeline(pipe: TrainedPipeline, modes, snr: float, rng: np.random.Generator) -> dict:
    """Metrics for each requested mode on one noisy copy of the test split."""
    forest, test = pipe.forest, pipe.test
    offsets = level_offsets(forest, forest.max_depth)
    clean = test.features
    noisy, _ = inject_noise_batch(clean, snr, pipe.column_means, rng)
    y = test.targets
    clean_leaves = forest.leaves(clean)
    noisy_leaves = forest.leaves(noisy)
    onsets = true_flags(forest, clean, noisy, onset_only=True)
    no_flags = tuple(tuple(frozenset() for _ in forest.trees) for _ in range(len(y)))

    rec = None
    if {"refined_only", "multipath"} & set(modes):
        rec = recover_many(forest, pipe.stack, noisy)

    out = {}
    for mode in modes:
        if mode == "plain":
            pred, leaves, soft, flags = forest.predict(noisy), noisy_leaves, None, no_flags
        elif mode in ("refined_only", "multipath"):
            leaves, soft, flags = rec.refined_leaves, rec.leaf_output, rec.flags
            pred = (refined_predict_many(forest, leaves) if mode == "refined_only"
                    else multipath_predict_many(forest, noisy, flags))
        elif mode == "multipath_known_noise":
            flags = true_flags(forest, clean, noisy, onset_only=False)
            pred = multipath_predict_many(forest, noisy, flags)
            leaves, soft = noisy_leaves, None
        elif mode == "feature_dae_baseline":
            denoised = dae_mod.forward(pipe.feature_dae, noisy)
            pred, leaves, soft = forest.predict(denoised), forest.leaves(denoised), None
            flags = true_flags(forest, noisy, denoised, onset_only=True)
        else:
            raise ValueError(f"unknown mode {mode!r}")
        soft = _one_hot(forest, leaves) if soft is None else soft
        metrics = {
            "l1": normalized_l1(pred, y),
            "precision": precision_rate(leaves, clean_leaves),
            "xent": indicator_cross_entropy(soft, clean_leaves, offsets),
            "detection": pooled_detection_rate(flags, onsets),
        }
        bad = [k for k, v in metrics.items() if not math.isfinite(v)]
        if bad:
            raise dae_mod.NumericError(f"non-finite {bad} for mode={mode} snr={snr}")
        out[mode] = metrics
    return out


def run_experiment(cfg: ExperimentConfig, dataset: Dataset | None = None) -> Report:
    report = Report(cfg)
    needs_dae = bool({"refined_only", "multipath"} & set(cfg.modes))
    for rep in range(cfg.repetitions):
        pipe = fit_pipeline(cfg, rep, dataset, needs_dae, "feature_dae_baseline" in cfg.modes)
        report.repetitions.append(pipe.info)
        log.info("rep %d: %s", rep, pipe.info)
        for i, snr in enumerate(cfg.snr_grid):
            rng = np.random.default_rng(derive_seed(cfg.seed, rep, 100 + i))
            for mode, metrics in evaluate_pipeline(pipe, cfg.modes, snr, rng).items():
                report.entries.append({"mode": mode, "snr": snr, "rep": rep, **metrics})
    return report


def _parse_value(kind, text: str):
    text = text.strip()
    if kind is bool:
        return text.lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind == "floats":
        return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())
    if kind == "strs":
        return tuple(v.strip() for v in text.replace(";", ",").split(",") if v.strip())
    if kind == "optint":
        return None if text.lower() in ("", "none") else int(text)
    if kind == "optstr":
        return None if text.lower() in ("", "none") else text
    return text


_KINDS = {"noise_levels": "floats", "snr_grid": "floats", "modes": "strs",
          "max_features": "optint", "subset_size": "optint", "target_column": "optstr"}


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Build a config from ``key = value`` lines; ``preset = <name>`` picks the starting point."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.read_string("[experiment]\n" + text)
    values = dict(parser["experiment"])
    if "preset" in values:
        base = preset(values.pop("preset").strip())
    base = base or ExperimentConfig()
    types = {f.name: _KINDS.get(f.name, type(getattr(base, f.name))) for f in fields(base)}
    updates = {}
    for key, raw in values.items():
        key = key.replace("-", "_")
        if key not in types:
            raise ValueError(f"unknown config key {key!r}")
        updates[key] = _parse_value(types[key], raw)
    return replace(base, **updates)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


OVERLAP_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)


def overlap_sweep(cfg: ExperimentConfig, ratios=OVERLAP_GRID, seeds=(0, 1, 2),
                  dataset: Dataset | None = None) -> dict[float, float]:
    """Normalized mean tree cross-entropy per overlap ratio, averaged over seeds.

    Each seed trains an unselected forest on the training split and scores it
    on the held-out split, which the trees never saw.
    """
    ds = dataset if dataset is not None else load_dataset(cfg.dataset, cfg.target_column)
    out = {}
    for ratio in ratios:
        values = []
        for s in seeds:
            seed = derive_seed(cfg.seed, s)
            data = ds.subsample(cfg.max_rows, derive_seed(seed, 1))
            train, held = train_test_split(data, cfg.test_fraction, derive_seed(seed, 2))
            fcfg = ForestConfig(cfg.trees, cfg.max_depth, cfg.min_leaf_samples, cfg.max_features,
                                ratio, cfg.subset_size, derive_seed(seed, 4))
            plan = make_subsets(train, cfg.trees, ratio, cfg.subset_size, derive_seed(seed, 5))
            forest = train_forest(train, plan, fcfg)
            values.append(float(entropy_report(forest, held.features).normalized_mean.mean()))
        out[ratio] = math.fsum(values) / len(values)
    return out


SMALL_DATASETS = ("concrete", "music", "energy", "airfoil")


def selection_ablation(datasets=SMALL_DATASETS, snr: float = 0.25, repetitions: int = 3,
                       **overrides) -> dict[str, dict[bool, dict[str, float]]]:
    """Multipath metrics with and without entropy-based tree selection.

    Without selection the forest is trained at its final size directly, so
    both arms predict with the same number of trees.
    """
    out = {}
    for name in datasets:
        out[name] = {}
        for selected in (True, False):
            cfg = preset(name, keep_fraction=0.7 if selected else 1.0, snr_grid=(snr,),
                         modes=("multipath",), repetitions=repetitions, **overrides)
            report = run_experiment(cfg)
            stats = report.aggregate()[("multipath", snr)]
            out[name][selected] = {m: stats[m][0] for m in Report.METRICS}
    return out
