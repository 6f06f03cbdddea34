"""Baseline classifiers over dense admission features.

Three from-scratch models share one interface: logistic regression trained
by full-batch gradient descent, a bagged random forest, and a second-order
gradient-boosted tree ensemble. `predict` scores admissions, and
`feature_importance` ranks features on a common scale (importances are
normalized to sum to 1 whenever any importance is nonzero).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from notepool.errors import ModelError
from notepool import persist
from notepool.baselines.logistic import LogisticConfig, LogisticModel, train_logistic
from notepool.baselines.forest import ForestConfig, ForestModel, train_random_forest
from notepool.baselines.gbt import GbtConfig, GbtModel, train_gradient_boosting

__all__ = [
    "DenseDataset",
    "LogisticConfig",
    "LogisticModel",
    "ForestConfig",
    "ForestModel",
    "GbtConfig",
    "GbtModel",
    "train_logistic",
    "train_random_forest",
    "train_gradient_boosting",
    "predict",
    "feature_importance",
    "save_model",
    "load_model",
]


@dataclass
class DenseDataset:
    """Feature matrix with aligned binary labels and column names."""

    x: np.ndarray
    y: np.ndarray
    feature_names: list[str]

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.float64)
        if self.x.ndim != 2:
            raise ModelError(f"feature matrix must be 2-d, got shape {self.x.shape}")
        if self.y.shape != (self.x.shape[0],):
            raise ModelError("labels are not aligned with the feature matrix")
        if len(self.feature_names) != self.x.shape[1]:
            raise ModelError("feature_names length does not match matrix width")
        if not np.all(np.isfinite(self.x)):
            raise ModelError("feature matrix contains non-finite values")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise ModelError("labels must be 0 or 1")

    def require_both_classes(self) -> None:
        if self.y.min() == self.y.max():
            raise ModelError("training data needs both classes present")


def predict(model, x: np.ndarray) -> np.ndarray:
    """Score admissions with any baseline model; returns P(label=1)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ModelError(f"expected a 2-d feature matrix, got shape {x.shape}")
    if x.shape[1] != len(model.feature_names):
        raise ModelError(
            f"model expects {len(model.feature_names)} features, got {x.shape[1]}")
    if x.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    return model.predict_proba(x)


def feature_importance(model) -> list[tuple[str, float]]:
    """Ranked (name, importance) pairs, descending, names breaking ties.

    Logistic importance is |weight|; tree ensembles accumulate split quality
    (count-weighted Gini decrease, or boosting gain). Values are normalized
    to sum to 1 unless every importance is zero.
    """
    if isinstance(model, LogisticModel):
        raw = np.abs(model.weights)
    else:
        raw = np.asarray(model.importance, dtype=np.float64).copy()
    total = raw.sum()
    if total > 0:
        raw = raw / total
    pairs = list(zip(model.feature_names, raw.tolist()))
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return pairs


_KINDS = {"logistic": LogisticModel, "forest": ForestModel, "gbt": GbtModel}


def save_model(path: str | Path, model, meta: dict | None = None) -> None:
    kind = next(k for k, cls in _KINDS.items() if isinstance(model, cls))
    persist.write_json(path, {
        "format": "notepool-model",
        "version": 1,
        "kind": kind,
        "meta": meta or {},
        "payload": model.to_dict(),
    })


def load_model(path: str | Path):
    data = persist.read_json(path)
    if data.get("format") != "notepool-model":
        raise ModelError(f"not a model file: {path}")
    kind = data.get("kind")
    if kind not in _KINDS:
        raise ModelError(f"unknown model kind {kind!r} in {path}")
    return _KINDS[kind].from_dict(data["payload"]), data.get("meta", {})
