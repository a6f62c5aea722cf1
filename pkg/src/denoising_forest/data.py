"""Dataset ingestion, bootstrap subset plans and test-time noise injection."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataError(ValueError):
    """Raised for unreadable or malformed input data."""


@dataclass(frozen=True)
class Dataset:
    features: np.ndarray
    targets: np.ndarray
    name: str = "dataset"
    column_means: np.ndarray = field(default=None)

    def __post_init__(self):
        features = np.asarray(self.features, dtype=np.float64)
        targets = np.asarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DataError(f"features must be a non-empty 2-D matrix, got shape {features.shape}")
        if targets.shape != (features.shape[0],):
            raise DataError(
                f"targets length {targets.shape} does not match {features.shape[0]} feature rows"
            )
        features.setflags(write=False)
        targets.setflags(write=False)
        means = features.mean(axis=0)
        means.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "column_means", means)

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def take(self, rows, name: str | None = None) -> "Dataset":
        rows = np.asarray(rows, dtype=np.intp)
        return Dataset(self.features[rows], self.targets[rows], name or self.name)

    def subsample(self, max_rows: int, seed: int) -> "Dataset":
        if self.n_samples <= max_rows:
            return self
        rng = np.random.default_rng(seed)
        rows = np.sort(rng.choice(self.n_samples, size=max_rows, replace=False))
        return self.take(rows)


@dataclass(frozen=True)
class SubsetPlan:
    subsets: tuple[np.ndarray, ...]
    pools: tuple[np.ndarray, ...]
    overlap_ratio: float
    seed: int

    @property
    def tree_count(self) -> int:
        return len(self.subsets)


@dataclass(frozen=True)
class NoiseSpec:
    snr: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.snr <= 1.0:
            raise ValueError(f"snr must lie in [0, 1], got {self.snr}")


def _parse_float(text: str):
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def read_table(path, min_columns: int = 1) -> np.ndarray:
    """Numeric rows of a CSV file; a first row with a non-numeric leading cell is a header."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"{path}: no such file")
    with path.open(newline="") as fh:
        rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    if rows and _parse_float(rows[0][0].strip()) is None:
        rows = rows[1:]
    if not rows:
        raise DataError(f"{path}: no rows")
    width = len(rows[0])
    if width < min_columns:
        raise DataError(f"{path}: need at least {min_columns} columns, found {width}")

    table = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataError(f"{path}: row {i + 1} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            value = _parse_float(cell.strip())
            if value is None:
                raise DataError(f"{path}: non-numeric cell {cell!r} at row {i + 1}, column {j + 1}")
            table[i, j] = value
    return table


def load_csv(path, target_column: int | str | None = None, name: str | None = None) -> Dataset:
    """Read a numeric CSV file; the target defaults to the last column."""
    table = read_table(path, min_columns=2)
    target = resolve_target_column(target_column, table.shape[1])
    features = np.delete(table, target, axis=1)
    return Dataset(features, table[:, target], name or Path(path).stem)


def resolve_target_column(target_column, width: int) -> int:
    if target_column is None or target_column == "last":
        return width - 1
    idx = int(target_column)
    if idx < 0:
        idx += width
    if not 0 <= idx < width:
        raise DataError(f"target column {target_column} out of range for {width} columns")
    return idx


def make_subsets(
    dataset: Dataset,
    tree_count: int,
    overlap_ratio: float = 1.0,
    subset_size: int | None = None,
    seed: int = 0,
) -> SubsetPlan:
    """Bootstrap subsets with a controlled fraction of shared candidate rows.

    A shared pool of ``ceil(overlap_ratio * M)`` rows is visible to every
    tree; the remaining rows are dealt into ``tree_count`` disjoint blocks.
    Tree ``t`` draws ``subset_size`` rows with replacement from its block
    plus the shared pool (``subset_size`` defaults to that pool's size).
    """
    if tree_count < 1:
        raise ValueError("tree_count must be >= 1")
    if not 0.0 <= overlap_ratio <= 1.0:
        raise ValueError(f"overlap_ratio must lie in [0, 1], got {overlap_ratio}")
    m = dataset.n_samples
    rng = np.random.default_rng(seed)
    order = rng.permutation(m)
    n_shared = min(m, math.ceil(overlap_ratio * m - 1e-9))
    shared, rest = order[:n_shared], order[n_shared:]
    if n_shared == 0 and len(rest) < tree_count:
        raise ValueError(f"cannot deal {len(rest)} rows into {tree_count} non-empty pools")
    blocks = np.array_split(rest, tree_count)

    pools, subsets = [], []
    for block in blocks:
        pool = np.sort(np.concatenate([block, shared]))
        size = subset_size if subset_size is not None else len(pool)
        subsets.append(pool[rng.integers(0, len(pool), size=size)])
        pools.append(pool)
    return SubsetPlan(tuple(subsets), tuple(pools), overlap_ratio, seed)


def noise_count(snr: float, n_features: int) -> int:
    # round half up
    return min(n_features, int(math.floor(snr * n_features + 0.5 + 1e-9)))


def inject_noise(x, spec: NoiseSpec, column_means):
    """Replace ``round(snr * D)`` randomly chosen entries of ``x`` with column means.

    Returns the corrupted copy and the sorted corrupted dimensions.
    """
    x = np.asarray(x, dtype=np.float64)
    column_means = np.asarray(column_means, dtype=np.float64)
    if column_means.shape != x.shape:
        raise ValueError(f"column_means shape {column_means.shape} != sample shape {x.shape}")
    k = noise_count(spec.snr, x.shape[0])
    rng = np.random.default_rng(spec.seed)
    dims = np.sort(rng.choice(x.shape[0], size=k, replace=False))
    out = x.copy()
    out[dims] = column_means[dims]
    return out, dims


def inject_noise_batch(X, snr, column_means, rng: np.random.Generator):
    """Row-wise mean replacement for a whole matrix.

    ``snr`` may be a scalar or one value per row. Returns the corrupted
    matrix and a boolean mask of replaced entries.
    """
    X = np.asarray(X, dtype=np.float64)
    n, d = X.shape
    counts = np.broadcast_to(
        np.array([noise_count(s, d) for s in np.atleast_1d(snr)]), (n,)
    )
    ranks = np.argsort(rng.random((n, d)), axis=1).argsort(axis=1)
    mask = ranks < counts[:, None]
    out = np.where(mask, np.broadcast_to(column_means, (n, d)), X)
    return out, mask


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-column affine map onto [0, 1] fitted on training features."""

    minimum: np.ndarray
    maximum: np.ndarray

    @classmethod
    def fit(cls, features) -> "MinMaxScaler":
        features = np.asarray(features, dtype=np.float64)
        return cls(features.min(axis=0), features.max(axis=0))

    def transform(self, features):
        span = self.maximum - self.minimum
        span = np.where(span > 0, span, 1.0)
        return (np.asarray(features, dtype=np.float64) - self.minimum) / span

    def transform_dataset(self, dataset: Dataset) -> Dataset:
        return Dataset(self.transform(dataset.features), dataset.targets, dataset.name)


def train_test_split(dataset: Dataset, test_fraction: float, seed: int):
    rng = np.random.default_rng(seed)
    order = rng.permutation(dataset.n_samples)
    n_test = max(1, int(round(test_fraction * dataset.n_samples)))
    return dataset.take(np.sort(order[n_test:])), dataset.take(np.sort(order[:n_test]))


def write_noise_ground_truth(path, corrupted) -> None:
    """Write ``sample_index,corrupted_dims`` rows; dims are ';'-separated."""
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_index", "corrupted_dims"])
        for i, dims in enumerate(corrupted):
            dims = np.flatnonzero(dims) if np.asarray(dims).dtype == bool else dims
            writer.writerow([i, ";".join(str(int(d)) for d in dims)])
