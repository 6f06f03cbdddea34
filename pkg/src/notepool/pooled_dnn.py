"""Neural model with learnable per-category pooling of note vectors.

An admission's notes form a (n_categories x vocab) count matrix. A trainable
weight vector w pools the matrix into one vocabulary-sized vector,

    pooled[j] = sum_i w[i] * rows[i][j],

which is concatenated after the basic features, standardized, and passed
through two hidden ReLU layers (the second with an identity shortcut) to a
sigmoid output. Everything, pooling weights included, trains jointly by
backprop with mini-batch Adam and early stopping on validation AUC.

All scoring goes through forward_many; forward(params, m, b) is literally
the batch-of-one call, so batched and single-instance scores are the same
floating-point computation.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from notepool.errors import ConfigError, ModelError
from notepool.metrics import auc_roc
from notepool.numerics import sigmoid
from notepool import persist

HIDDEN_UNITS = 70

PROB_CLAMP = 1e-7


@dataclass
class DnnDims:
    n_categories: int
    vocab_size: int
    basic_dim: int
    hidden: int = HIDDEN_UNITS

    @property
    def input_dim(self) -> int:
        return self.basic_dim + self.vocab_size

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def identity(cls, dim: int) -> "Standardizer":
        return cls(np.zeros(dim), np.ones(dim))


@dataclass
class PooledDnnParams:
    dims: DnnDims
    w: np.ndarray    # (n_categories,) pooling weights
    w1: np.ndarray   # (hidden, input_dim)
    b1: np.ndarray   # (hidden,)
    w2: np.ndarray   # (hidden, hidden)
    b2: np.ndarray   # (hidden,)
    w3: np.ndarray   # (hidden,)
    b3: np.ndarray   # (1,)
    standardizer: Standardizer

    def copy(self) -> "PooledDnnParams":
        return PooledDnnParams(
            dims=dataclasses.replace(self.dims),
            w=self.w.copy(), w1=self.w1.copy(), b1=self.b1.copy(),
            w2=self.w2.copy(), b2=self.b2.copy(), w3=self.w3.copy(),
            b3=self.b3.copy(),
            standardizer=Standardizer(self.standardizer.mean.copy(),
                                      self.standardizer.scale.copy()),
        )

    def trainable(self) -> list[tuple[str, np.ndarray]]:
        return [("w", self.w), ("w1", self.w1), ("b1", self.b1),
                ("w2", self.w2), ("b2", self.b2), ("w3", self.w3), ("b3", self.b3)]

    def to_dict(self) -> dict:
        return {
            "dims": self.dims.to_dict(),
            "w": self.w.tolist(),
            "w1": self.w1.tolist(),
            "b1": self.b1.tolist(),
            "w2": self.w2.tolist(),
            "b2": self.b2.tolist(),
            "w3": self.w3.tolist(),
            "b3": self.b3.tolist(),
            "standardizer": {
                "mean": self.standardizer.mean.tolist(),
                "scale": self.standardizer.scale.tolist(),
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PooledDnnParams":
        dims = DnnDims(**data["dims"])
        arr = lambda key: np.asarray(data[key], dtype=np.float64)
        return cls(
            dims=dims, w=arr("w"), w1=arr("w1"), b1=arr("b1"), w2=arr("w2"),
            b2=arr("b2"), w3=arr("w3"), b3=arr("b3"),
            standardizer=Standardizer(
                np.asarray(data["standardizer"]["mean"], dtype=np.float64),
                np.asarray(data["standardizer"]["scale"], dtype=np.float64)),
        )


@dataclass
class TrainConfig:
    learning_rate: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    max_epochs: int = 200
    patience: int = 10
    hidden: int = HIDDEN_UNITS
    seed: int | Sequence[int] = 0

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError("adam betas must lie in [0, 1)")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.hidden < 1:
            raise ConfigError(f"hidden must be >= 1, got {self.hidden}")


@dataclass
class DnnDataset:
    """Admissions ready for the pooled model.

    matrices: (m, n_categories, vocab) float64 count matrices
    basics:   (m, basic_dim) float64
    labels:   (m,) float64 in {0, 1}
    """

    matrices: np.ndarray
    basics: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        self.basics = np.asarray(self.basics, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        m = self.matrices.shape[0]
        if self.matrices.ndim != 3:
            raise ModelError(f"matrices must be 3-d, got shape {self.matrices.shape}")
        if self.basics.shape[0] != m or self.basics.ndim != 2:
            raise ModelError("basics are not aligned with matrices")
        if self.labels.shape != (m,):
            raise ModelError("labels are not aligned with matrices")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise ModelError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.matrices.shape[0]

    def dims(self, hidden: int = HIDDEN_UNITS) -> DnnDims:
        return DnnDims(n_categories=self.matrices.shape[1],
                       vocab_size=self.matrices.shape[2],
                       basic_dim=self.basics.shape[1],
                       hidden=hidden)


def pool(rows: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Weighted sum of category rows: pooled[j] = sum_i w[i]*rows[i, j]."""
    rows = np.asarray(rows, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if rows.ndim != 2 or w.shape != (rows.shape[0],):
        raise ModelError(f"pool needs (n, k) rows and (n,) weights, "
                         f"got {rows.shape} and {w.shape}")
    return w @ rows


def _check_batch(params: PooledDnnParams, matrices: np.ndarray, basics: np.ndarray) -> None:
    d = params.dims
    if matrices.ndim != 3 or matrices.shape[1:] != (d.n_categories, d.vocab_size):
        raise ModelError(f"expected matrices of shape (m, {d.n_categories}, "
                         f"{d.vocab_size}), got {matrices.shape}")
    if basics.ndim != 2 or basics.shape != (matrices.shape[0], d.basic_dim):
        raise ModelError(f"expected basics of shape ({matrices.shape[0]}, "
                         f"{d.basic_dim}), got {basics.shape}")


def _forward_parts(params: PooledDnnParams, matrices: np.ndarray, basics: np.ndarray):
    pooled = np.einsum("n,bnk->bk", params.w, matrices)
    z = np.concatenate([basics, pooled], axis=1)
    z = (z - params.standardizer.mean) / params.standardizer.scale
    a1 = z @ params.w1.T + params.b1
    h1 = np.maximum(a1, 0.0)
    a2 = h1 @ params.w2.T + params.b2
    h2 = np.maximum(a2, 0.0) + h1  # identity shortcut
    logits = h2 @ params.w3 + params.b3[0]
    return z, a1, h1, a2, h2, logits


def forward_many(params: PooledDnnParams, matrices: np.ndarray,
                 basics: np.ndarray) -> np.ndarray:
    """Score a batch of admissions; returns P(label=1) per row."""
    matrices = np.asarray(matrices, dtype=np.float64)
    basics = np.asarray(basics, dtype=np.float64)
    _check_batch(params, matrices, basics)
    if matrices.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    _, a1, _, a2, _, logits = _forward_parts(params, matrices, basics)
    for name, arr in (("hidden layer 1", a1), ("hidden layer 2", a2),
                      ("output logits", logits)):
        if not np.all(np.isfinite(arr)):
            raise ModelError(f"non-finite activations in {name}")
    return sigmoid(logits)


def forward(params: PooledDnnParams, matrix: np.ndarray, basic: np.ndarray) -> float:
    """Score one admission. Exactly forward_many on a batch of one."""
    return float(forward_many(params, np.asarray(matrix)[None, :, :],
                              np.asarray(basic)[None, :])[0])


@dataclass
class Grads:
    w: np.ndarray
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    def items(self) -> list[tuple[str, np.ndarray]]:
        return [("w", self.w), ("w1", self.w1), ("b1", self.b1),
                ("w2", self.w2), ("b2", self.b2), ("w3", self.w3), ("b3", self.b3)]


def loss_and_grads(params: PooledDnnParams, matrices: np.ndarray,
                   basics: np.ndarray, labels: np.ndarray) -> tuple[float, Grads]:
    """Mean clamped BCE over the batch and its exact gradients.

    Predictions are clamped to [PROB_CLAMP, 1 - PROB_CLAMP] inside the loss;
    where the clamp is active the gradient through it is zero.
    """
    matrices = np.asarray(matrices, dtype=np.float64)
    basics = np.asarray(basics, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    _check_batch(params, matrices, basics)
    m = matrices.shape[0]
    if y.shape != (m,) or m == 0:
        raise ModelError("labels are not aligned with the batch")

    z, a1, h1, a2, h2, logits = _forward_parts(params, matrices, basics)
    p = sigmoid(logits)
    pc = np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)
    loss = float(np.mean(-(y * np.log(pc) + (1.0 - y) * np.log1p(-pc))))

    # d loss / d logit; zero where the clamp flattened the loss.
    dlogit = np.where(p == pc, p - y, 0.0) / m
    dw3 = h2.T @ dlogit
    db3 = np.array([dlogit.sum()])
    dh2 = np.outer(dlogit, params.w3)
    da2 = dh2 * (a2 > 0)
    dw2 = da2.T @ h1
    db2 = da2.sum(axis=0)
    dh1 = da2 @ params.w2 + dh2  # shortcut feeds h1 straight into h2
    da1 = dh1 * (a1 > 0)
    dw1 = da1.T @ z
    db1 = da1.sum(axis=0)
    dz = da1 @ params.w1
    dpooled = (dz / params.standardizer.scale)[:, params.dims.basic_dim:]
    dw = np.einsum("bk,bnk->n", dpooled, matrices)
    return loss, Grads(w=dw, w1=dw1, b1=db1, w2=dw2, b2=db2, w3=dw3, b3=db3)


def _init_with_rng(dims: DnnDims, rng: np.random.Generator) -> PooledDnnParams:
    def glorot(fan_out: int, fan_in: int) -> np.ndarray:
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=(fan_out, fan_in))

    d, h = dims.input_dim, dims.hidden
    return PooledDnnParams(
        dims=dims,
        w=np.full(dims.n_categories, 1.0 / dims.n_categories),
        w1=glorot(h, d),
        b1=np.zeros(h),
        w2=glorot(h, h),
        b2=np.zeros(h),
        w3=glorot(1, h)[0],
        b3=np.zeros(1),
        standardizer=Standardizer.identity(d),
    )


def initialize(dims: DnnDims, seed: int | Sequence[int] = 0) -> PooledDnnParams:
    """Glorot-uniform layers, zero biases, uniform pooling weights 1/n.

    The standardizer starts as the identity; fit_standardizer replaces it.
    """
    return _init_with_rng(dims, np.random.default_rng(seed))


def fit_standardizer(w: np.ndarray, matrices: np.ndarray,
                     basics: np.ndarray) -> Standardizer:
    """Mean/std of the concatenated input under pooling weights w.

    Population std (ddof=0), floored at 1e-6 so constant columns are safe.
    """
    pooled = np.einsum("n,bnk->bk", np.asarray(w, dtype=np.float64),
                       np.asarray(matrices, dtype=np.float64))
    z = np.concatenate([np.asarray(basics, dtype=np.float64), pooled], axis=1)
    return Standardizer(mean=z.mean(axis=0),
                        scale=np.maximum(z.std(axis=0), 1e-6))


@dataclass
class TrainingTrace:
    """Per-epoch training loss and validation AUC, plus the kept epoch."""

    epochs: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    val_auc: list[float] = field(default_factory=list)
    best_epoch: int = 0

    def append(self, epoch: int, loss: float, auc: float) -> None:
        self.epochs.append(epoch)
        self.train_loss.append(loss)
        self.val_auc.append(auc)

    def save_csv(self, path: str | Path) -> None:
        rows = zip(self.epochs, self.train_loss, self.val_auc)
        persist.write_csv(path, ["epoch", "train_loss", "val_auc"], rows)


def train(train_data: DnnDataset, val_data: DnnDataset,
          config: TrainConfig | None = None) -> tuple[PooledDnnParams, TrainingTrace]:
    """Mini-batch Adam with early stopping on validation AUC.

    One generator seeded from config.seed drives initialization and every
    epoch's shuffle. The standardizer is fitted once on the training split
    under the initial pooling weights and then held fixed. Returns the
    parameters from the best validation epoch.
    """
    config = config or TrainConfig()
    config.validate()
    if len(train_data) == 0 or len(val_data) == 0:
        raise ModelError("train and validation splits must be non-empty")
    if train_data.labels.min() == train_data.labels.max():
        raise ModelError("training split needs both classes present")
    if val_data.labels.min() == val_data.labels.max():
        raise ModelError("validation split needs both classes for AUC early stopping")
    if train_data.matrices.shape[1:] != val_data.matrices.shape[1:] or \
            train_data.basics.shape[1] != val_data.basics.shape[1]:
        raise ModelError("train and validation feature shapes differ")

    rng = np.random.default_rng(config.seed)
    params = _init_with_rng(train_data.dims(config.hidden), rng)
    params.standardizer = fit_standardizer(params.w, train_data.matrices,
                                           train_data.basics)

    moment1 = {name: np.zeros_like(arr) for name, arr in params.trainable()}
    moment2 = {name: np.zeros_like(arr) for name, arr in params.trainable()}
    step = 0
    m = len(train_data)
    best_auc = -np.inf
    best_params = params.copy()
    trace = TrainingTrace()
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        perm = rng.permutation(m)
        loss_sum = 0.0
        for start in range(0, m, config.batch_size):
            batch = perm[start:start + config.batch_size]
            loss, grads = loss_and_grads(params, train_data.matrices[batch],
                                         train_data.basics[batch],
                                         train_data.labels[batch])
            if not np.isfinite(loss):
                raise ModelError(f"non-finite training loss at epoch {epoch}")
            loss_sum += loss * len(batch)
            step += 1
            bias1 = 1.0 - config.beta1 ** step
            bias2 = 1.0 - config.beta2 ** step
            for name, arr in params.trainable():
                g = getattr(grads, name)
                m1 = moment1[name]
                m2 = moment2[name]
                m1 *= config.beta1
                m1 += (1.0 - config.beta1) * g
                m2 *= config.beta2
                m2 += (1.0 - config.beta2) * (g * g)
                arr -= config.learning_rate * (m1 / bias1) / (np.sqrt(m2 / bias2)
                                                              + config.adam_eps)
        val_scores = forward_many(params, val_data.matrices, val_data.basics)
        val_auc = auc_roc(val_scores, val_data.labels.astype(np.int64))
        trace.append(epoch, loss_sum / m, val_auc)
        if val_auc > best_auc:
            best_auc = val_auc
            best_params = params.copy()
            trace.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return best_params, trace


def save_params(path: str | Path, params: PooledDnnParams,
                meta: dict | None = None) -> None:
    persist.write_json(path, {
        "format": "notepool-pooled-dnn",
        "version": 1,
        "meta": meta or {},
        "payload": params.to_dict(),
    })


def load_params(path: str | Path) -> tuple[PooledDnnParams, dict]:
    data = persist.read_json(path)
    if data.get("format") != "notepool-pooled-dnn":
        raise ModelError(f"not a pooled-dnn parameter file: {path}")
    return PooledDnnParams.from_dict(data["payload"]), data.get("meta", {})
