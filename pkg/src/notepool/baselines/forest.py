"""Random forest of Gini-grown classification trees.

Each tree sees a bootstrap resample and draws a fresh random feature subset
at every node. Per-tree generators are spawned as default_rng([seed, tree]),
so tree t is reproducible regardless of how many trees run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from notepool.errors import ConfigError
from notepool.baselines.tree import Tree, grow_gini_tree


@dataclass
class ForestConfig:
    n_trees: int = 200
    max_depth: int = 8
    min_leaf: int = 1
    features_per_split: int | None = None  # default: ceil(sqrt(n_features))
    seed: int = 0

    def validate(self) -> None:
        if self.n_trees < 1:
            raise ConfigError(f"n_trees must be >= 1, got {self.n_trees}")
        if self.max_depth < 1:
            raise ConfigError(f"max_depth must be >= 1, got {self.max_depth}")
        if self.min_leaf < 1:
            raise ConfigError(f"min_leaf must be >= 1, got {self.min_leaf}")
        if self.features_per_split is not None and self.features_per_split < 1:
            raise ConfigError("features_per_split must be >= 1 when given")


@dataclass
class ForestModel:
    trees: list[Tree]
    feature_names: list[str]
    importance: np.ndarray

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        total = np.zeros(x.shape[0], dtype=np.float64)
        for tree in self.trees:
            total += tree.predict(x)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {
            "trees": [t.to_dict() for t in self.trees],
            "feature_names": list(self.feature_names),
            "importance": self.importance.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ForestModel":
        return cls(
            trees=[Tree.from_dict(t) for t in data["trees"]],
            feature_names=list(data["feature_names"]),
            importance=np.asarray(data["importance"], dtype=np.float64),
        )


def train_random_forest(data, config: ForestConfig | None = None) -> ForestModel:
    config = config or ForestConfig()
    config.validate()
    data.require_both_classes()
    x, y = data.x, data.y
    n, n_features = x.shape
    per_split = config.features_per_split or math.ceil(math.sqrt(n_features))
    per_split = min(per_split, n_features)
    importance = np.zeros(n_features, dtype=np.float64)
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng([config.seed, t])
        boot = rng.integers(0, n, size=n)
        trees.append(grow_gini_tree(x[boot], y[boot], rng, config.max_depth,
                                    config.min_leaf, per_split, importance))
    return ForestModel(trees=trees, feature_names=list(data.feature_names),
                       importance=importance)
