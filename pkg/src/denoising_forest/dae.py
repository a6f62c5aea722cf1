"""Three-layer sigmoid denoising autoencoder with plain mini-batch SGD."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .data import Dataset, inject_noise_batch
from .forest import Forest
from .indicator import binary_indicators, encoded_indicators

FORMAT_VERSION = 1
CLAMP = 1e-7
PARAMS = ("enc_w", "enc_b", "dec_w", "dec_b")


class NumericError(ArithmeticError):
    """Training produced a non-finite loss."""


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 32
    noise_levels: tuple[float, ...] = (0.0, 0.125, 0.25, 0.375, 0.5)
    seed: int = 0
    patience: int = 20
    holdout_fraction: float = 0.1
    encoding: str = "marked"

    def __post_init__(self):
        if any(not 0.0 <= s <= 1.0 for s in self.noise_levels):
            raise ValueError(f"noise levels must lie in [0, 1]: {self.noise_levels}")
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ValueError("learning_rate, batch_size must be positive and epochs >= 0")


@dataclass(frozen=True)
class DenoisingAutoencoder:
    enc_w: np.ndarray
    enc_b: np.ndarray
    dec_w: np.ndarray
    dec_b: np.ndarray
    depth: int = -1
    encoding: str = "marked"

    @property
    def input_size(self) -> int:
        return self.enc_w.shape[1]

    @property
    def hidden_size(self) -> int:
        return self.enc_w.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAMS}

    def to_dict(self) -> dict:
        return {"version": FORMAT_VERSION, "depth": self.depth, "encoding": self.encoding,
                "input_size": self.input_size, "hidden_size": self.hidden_size,
                **{name: getattr(self, name).tolist() for name in PARAMS}}

    @classmethod
    def from_dict(cls, doc: dict) -> "DenoisingAutoencoder":
        if doc.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported autoencoder version {doc.get('version')!r}")
        dae = cls(*(np.asarray(doc[name], dtype=np.float64) for name in PARAMS),
                  depth=int(doc["depth"]), encoding=doc.get("encoding", "marked"))
        if (dae.input_size, dae.hidden_size) != (doc["input_size"], doc["hidden_size"]):
            raise ValueError("autoencoder document sizes disagree with its weights")
        return dae


def initialize(input_size: int, hidden_size: int | None = None, depth: int = -1,
               rng: np.random.Generator | int = 0) -> DenoisingAutoencoder:
    """Uniform init in +-1/sqrt(fan_in); the bottleneck defaults to ceil(n/2)."""
    rng = np.random.default_rng(rng)
    hidden_size = hidden_size or math.ceil(input_size / 2)
    a_enc = 1.0 / math.sqrt(input_size)
    a_dec = 1.0 / math.sqrt(hidden_size)
    return DenoisingAutoencoder(
        rng.uniform(-a_enc, a_enc, (hidden_size, input_size)),
        rng.uniform(-a_enc, a_enc, hidden_size),
        rng.uniform(-a_dec, a_dec, (input_size, hidden_size)),
        rng.uniform(-a_dec, a_dec, input_size),
        depth,
    )


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward(dae: DenoisingAutoencoder, X):
    H = sigmoid(X @ dae.enc_w.T + dae.enc_b)
    return H, sigmoid(H @ dae.dec_w.T + dae.dec_b)


def forward(dae: DenoisingAutoencoder, inputs) -> np.ndarray:
    X = np.asarray(inputs, dtype=np.float64)
    if X.shape[-1] != dae.input_size:
        raise ValueError(f"input length {X.shape[-1]} != autoencoder input size {dae.input_size}")
    return _forward(dae, X)[1]


def loss(output, target) -> float:
    """Mean binary cross entropy with the output clamped to [1e-7, 1 - 1e-7]."""
    output = np.asarray(output, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if output.shape != target.shape:
        raise ValueError(f"output shape {output.shape} != target shape {target.shape}")
    o = np.clip(output, CLAMP, 1.0 - CLAMP)
    return float(np.mean(-(target * np.log(o) + (1.0 - target) * np.log1p(-o))))


def gradients(dae: DenoisingAutoencoder, inputs, targets):
    """Loss and analytic parameter gradients of ``loss`` over a batch."""
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    H, O = _forward(dae, X)
    inside = (O > CLAMP) & (O < 1.0 - CLAMP)
    d_out = np.where(inside, O - Y, 0.0) / O.size
    d_hidden = (d_out @ dae.dec_w) * H * (1.0 - H)
    grads = {"dec_w": d_out.T @ H, "dec_b": d_out.sum(axis=0),
             "enc_w": d_hidden.T @ X, "enc_b": d_hidden.sum(axis=0)}
    return loss(O, Y), grads


def sgd_step(dae: DenoisingAutoencoder, inputs, targets, learning_rate: float):
    value, grads = gradients(dae, inputs, targets)
    # gradients are of the per-entry mean; scaling by the output width makes the
    # step size independent of indicator length
    scale = learning_rate * dae.input_size
    updated = {name: getattr(dae, name) - scale * grads[name] for name in PARAMS}
    return replace(dae, **updated), value


def gradient_check(dae: DenoisingAutoencoder, inputs, targets, epsilon: float = 1e-5) -> float:
    """Max relative gap between analytic and central-difference gradients."""
    if not 1e-6 <= epsilon <= 1e-4:
        raise ValueError("epsilon must lie in [1e-6, 1e-4]")
    X = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    _, analytic = gradients(dae, X, Y)
    worst = 0.0
    for name in PARAMS:
        base = getattr(dae, name)
        for idx in np.ndindex(base.shape):
            plus, minus = base.copy(), base.copy()
            plus[idx] += epsilon
            minus[idx] -= epsilon
            f_plus = loss(_forward(replace(dae, **{name: plus}), X)[1], Y)
            f_minus = loss(_forward(replace(dae, **{name: minus}), X)[1], Y)
            numeric = (f_plus - f_minus) / (2.0 * epsilon)
            a = analytic[name][idx]
            worst = max(worst, abs(a - numeric) / max(abs(a) + abs(numeric), 1e-12))
    return worst


@dataclass
class TrainingTrace:
    train_loss: list[float] = field(default_factory=list)
    holdout_loss: list[float] = field(default_factory=list)
    best_epoch: int = 0


def fit(dae: DenoisingAutoencoder, make_epoch: Callable[[np.random.Generator], tuple],
        holdout: tuple, config: TrainConfig, rng: np.random.Generator,
        trace: TrainingTrace | None = None) -> DenoisingAutoencoder:
    """Mini-batch SGD keeping the parameters with the lowest held-out loss.

    ``make_epoch(rng)`` returns fresh ``(inputs, targets)`` for one epoch.
    """
    trace = trace if trace is not None else TrainingTrace()
    hold_x, hold_y = holdout
    best, best_loss = dae, loss(forward(dae, hold_x), hold_y)
    trace.holdout_loss.append(best_loss)
    stale = 0
    for epoch in range(1, config.epochs + 1):
        X, Y = make_epoch(rng)
        order = rng.permutation(X.shape[0])
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            rows = order[start:start + config.batch_size]
            dae, value = sgd_step(dae, X[rows], Y[rows], config.learning_rate)
            if not math.isfinite(value):
                raise NumericError(f"non-finite loss at epoch {epoch}; lower the learning rate")
            total += value * len(rows)
        trace.train_loss.append(total / len(order))
        held = loss(forward(dae, hold_x), hold_y)
        if not math.isfinite(held):
            raise NumericError(f"non-finite held-out loss at epoch {epoch}")
        trace.holdout_loss.append(held)
        if held < best_loss:
            best, best_loss, stale = dae, held, 0
            trace.best_epoch = epoch
        else:
            stale += 1
            if config.patience and stale >= config.patience:
                break
    return best


def _split_holdout(n: int, fraction: float, rng: np.random.Generator):
    order = rng.permutation(n)
    n_hold = max(1, int(round(fraction * n))) if n > 1 else 0
    return np.sort(order[n_hold:]), np.sort(order[:n_hold])


def _draw_levels(levels, n, rng):
    return np.asarray(levels)[rng.integers(0, len(levels), size=n)]


def train(dataset: Dataset, forest: Forest, depth: int | None = None,
          config: TrainConfig = TrainConfig(), column_means=None,
          trace: TrainingTrace | None = None) -> DenoisingAutoencoder:
    """Train a DAE mapping indicators of noisy samples to clean binary indicators."""
    depth = forest.max_depth if depth is None else depth
    column_means = dataset.column_means if column_means is None else column_means
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, depth]))
    clean_targets, _ = binary_indicators(forest, dataset.features, depth)
    dae = replace(initialize(clean_targets.shape[1], depth=depth, rng=rng),
                  encoding=config.encoding)
    fit_rows, hold_rows = _split_holdout(dataset.n_samples, config.holdout_fraction, rng)
    if len(hold_rows) == 0:
        hold_rows = fit_rows

    def corrupted_inputs(rows, rng):
        snr = _draw_levels(config.noise_levels, len(rows), rng)
        noisy, _ = inject_noise_batch(dataset.features[rows], snr, column_means, rng)
        return encoded_indicators(forest, noisy, depth, config.encoding)[0]

    hold_x = corrupted_inputs(hold_rows, rng)
    return fit(dae, lambda r: (corrupted_inputs(fit_rows, r), clean_targets[fit_rows]),
               (hold_x, clean_targets[hold_rows]), config, rng, trace)


def train_stack(dataset: Dataset, forest: Forest, config: TrainConfig = TrainConfig(),
                per_depth: bool = False, column_means=None) -> dict[int, DenoisingAutoencoder]:
    depths = range(1, forest.max_depth + 1) if per_depth else [forest.max_depth]
    return {k: train(dataset, forest, k, config, column_means) for k in depths}


def train_feature_dae(dataset: Dataset, config: TrainConfig = TrainConfig(),
                      column_means=None) -> DenoisingAutoencoder:
    """Same architecture and schedule applied directly to [0, 1]-scaled features."""
    column_means = dataset.column_means if column_means is None else column_means
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, 10_000]))
    X = np.clip(dataset.features, 0.0, 1.0)
    dae = initialize(X.shape[1], rng=rng)
    fit_rows, hold_rows = _split_holdout(dataset.n_samples, config.holdout_fraction, rng)

    def corrupt(rows, rng):
        snr = _draw_levels(config.noise_levels, len(rows), rng)
        return inject_noise_batch(X[rows], snr, column_means, rng)[0]

    hold = (corrupt(hold_rows, rng), X[hold_rows])
    return fit(dae, lambda r: (corrupt(fit_rows, r), X[fit_rows]), hold, config, rng)


def save_stack(stack: dict[int, DenoisingAutoencoder], path) -> None:
    docs = [stack[k].to_dict() for k in sorted(stack)]
    Path(path).write_text(json.dumps(docs))


def load_stack(path) -> dict[int, DenoisingAutoencoder]:
    docs = json.loads(Path(path).read_text())
    if isinstance(docs, dict):
        docs = [docs]
    return {int(d["depth"]): DenoisingAutoencoder.from_dict(d) for d in docs}
