"""Gradient-boosted trees on the logistic loss, second-order (XGBoost-style).

The ensemble starts from the log-odds of the training base rate; every round
fits a regression tree to gradients g = p - y and hessians h = p(1-p) and
adds shrinkage * tree to the margin. Fully deterministic: no subsampling,
all features scanned at every node.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from notepool.errors import ConfigError
from notepool.numerics import binary_logloss, logit, sigmoid
from notepool.baselines.tree import Tree, grow_gradient_tree


@dataclass
class GbtConfig:
    n_rounds: int = 200
    max_depth: int = 4
    shrinkage: float = 0.1
    min_leaf: int = 1
    l2: float = 1.0

    def validate(self) -> None:
        if self.n_rounds < 1:
            raise ConfigError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.shrinkage <= 0:
            raise ConfigError(f"shrinkage must be positive, got {self.shrinkage}")
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.l2 < 0:
            raise ConfigError(f"l2 must be >= 0, got {self.l2}")


@dataclass
class GbtModel:
    trees: list[Tree]
    base_score: float
    shrinkage: float
    feature_names: list[str]
    importance: np.ndarray
    history: list[float] = field(default_factory=list)

    def margins(self, x: np.ndarray) -> np.ndarray:
        out = np.full(x.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            out += self.shrinkage * tree.predict(x)
        return out

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        return sigmoid(self.margins(x))

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "base_score": float(self.base_score),
            "shrinkage": float(self.shrinkage),
            "feature_names": list(self.feature_names),
            "importance": self.importance.tolist(),
            "history": [float(v) for v in self.history],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GbtModel":
        return cls(
            trees=[Tree.from_dict(t) for t in data["trees"]],
            base_score=float(data["base_score"]),
            shrinkage=float(data["shrinkage"]),
            feature_names=list(data["feature_names"]),
            importance=np.asarray(data["importance"], dtype=np.float64),
            history=[float(v) for v in data.get("history", [])],
        )


def train_gradient_boosting(data, config: GbtConfig | None = None) -> GbtModel:
    config = config or GbtConfig()
    config.validate()
    data.require_both_classes()
    x, y = data.x, data.y
    base = logit(float(y.mean()))
    margin = np.full(x.shape[0], base, dtype=np.float64)
    importance = np.zeros(x.shape[1], dtype=np.float64)
    trees: list[Tree] = []
    history: list[float] = []
    for _ in range(config.n_rounds):
        p = sigmoid(margin)
        grad = p - y
        hess = p * (1.0 - p)
        tree = grow_gradient_tree(x, grad, hess, config.max_depth,
                                  config.min_leaf, config.l2, importance)
        trees.append(tree)
        margin = margin + config.shrinkage * tree.predict(x)
        history.append(binary_logloss(margin, y))
    return GbtModel(trees=trees, base_score=base, shrinkage=config.shrinkage,
                    feature_names=list(data.feature_names), importance=importance,
                    history=history)
