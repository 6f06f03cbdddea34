"""Binary decision trees shared by the forest and the boosted ensemble.

Trees are stored as flat parallel arrays. Split search is vectorized: every
candidate feature column is argsorted once, class (or gradient) prefix sums
give the split statistic at every cut in one pass, and ties resolve
deterministically to the lowest threshold, then the lowest feature id.
A sample goes left iff x[feature] <= threshold (thresholds are midpoints
between adjacent distinct values).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, x: np.ndarray) -> np.ndarray:
        node = np.zeros(x.shape[0], dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            nd = node[active]
            go_left = x[active, self.feature[nd]] <= self.threshold[nd]
            node[active] = np.where(go_left, self.left[nd], self.right[nd])
            active = active[self.feature[node[active]] != LEAF]
        return self.value[node]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "Tree":
        return cls(
            feature=np.asarray(data["feature"], dtype=np.int64),
            threshold=np.asarray(data["threshold"], dtype=np.float64),
            left=np.asarray(data["left"], dtype=np.int64),
            right=np.asarray(data["right"], dtype=np.int64),
            value=np.asarray(data["value"], dtype=np.float64),
        )


class _Builder:
    """Accumulates nodes during growth; children may be added after parents."""

    def __init__(self) -> None:
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []

    def add(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(np.nan)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(value))
        return len(self.feature) - 1

    def set_split(self, node: int, feature: int, threshold: float,
                  left: int, right: int) -> None:
        self.feature[node] = int(feature)
        self.threshold[node] = float(threshold)
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            value=np.asarray(self.value, dtype=np.float64),
        )


@dataclass
class _Cut:
    feature_local: int
    threshold: float
    quality: float  # impurity decrease (gini) or gain (boosting)


def _best_cut(xcols: np.ndarray, stat_num: np.ndarray, stat_den: np.ndarray,
              min_leaf: int, score_fn) -> _Cut | None:
    """Shared scan: sort each column, score every valid cut, take the argmax.

    score_fn maps cumulative left/right statistics to a per-cut score matrix;
    ties break to the lowest cut position, then the lowest column index.
    """
    n, f = xcols.shape
    if n < 2:
        return None
    order = np.argsort(xcols, axis=0, kind="stable")
    xs = np.take_along_axis(xcols, order, axis=0)
    num_sorted = stat_num[order]
    den_sorted = stat_den[order]
    num_left = np.cumsum(num_sorted, axis=0)[:-1]
    den_left = np.cumsum(den_sorted, axis=0)[:-1]
    count_left = np.arange(1, n, dtype=np.float64)[:, None]
    score = score_fn(num_left, den_left, count_left)
    valid = (xs[1:] != xs[:-1]) & (count_left >= min_leaf) & ((n - count_left) >= min_leaf)
    score = np.where(valid, score, -np.inf)
    best_pos = np.argmax(score, axis=0)
    col_ids = np.arange(f)
    best_scores = score[best_pos, col_ids]
    j = int(np.argmax(best_scores))
    if not np.isfinite(best_scores[j]):
        return None
    p = int(best_pos[j])
    threshold = (xs[p, j] + xs[p + 1, j]) / 2.0
    return _Cut(feature_local=j, threshold=threshold, quality=float(best_scores[j]))


def grow_gini_tree(x: np.ndarray, y: np.ndarray, rng: np.random.Generator,
                   max_depth: int, min_leaf: int, features_per_split: int,
                   importance: np.ndarray) -> Tree:
    """CART classification tree on 0/1 labels; leaves hold class-1 fractions.

    Each internal node scans a fresh random feature subset. Count-weighted
    Gini decreases accumulate into `importance` (indexed by feature id).
    """
    n_features = x.shape[1]
    builder = _Builder()

    def grow(idx: np.ndarray, depth: int) -> int:
        ysub = y[idx]
        n = len(idx)
        pos = float(ysub.sum())
        node = builder.add(pos / n)
        if depth >= max_depth or n < 2 * min_leaf or pos == 0.0 or pos == n:
            return node
        feats = np.sort(rng.choice(n_features, size=features_per_split, replace=False))
        xcols = x[np.ix_(idx, feats)]

        def gini_score(pos_left, _den, count_left):
            # Maximizing sum of per-side (pos^2+neg^2)/count minimizes
            # count-weighted Gini impurity of the children.
            neg_left = count_left - pos_left
            count_right = n - count_left
            pos_right = pos - pos_left
            neg_right = count_right - pos_right
            return ((pos_left * pos_left + neg_left * neg_left) / count_left
                    + (pos_right * pos_right + neg_right * neg_right) / count_right)

        cut = _best_cut(xcols, ysub.astype(np.float64), np.zeros(n), min_leaf, gini_score)
        if cut is None:
            return node
        feature = int(feats[cut.feature_local])
        mask = x[idx, feature] <= cut.threshold
        n_left = int(mask.sum())
        if n_left == 0 or n_left == n:
            return node
        # decrease = n*gini(parent) - sum of count-weighted child impurities
        parent_term = (pos * pos + (n - pos) * (n - pos)) / n
        importance[feature] += cut.quality - parent_term
        left = grow(idx[mask], depth + 1)
        right = grow(idx[~mask], depth + 1)
        builder.set_split(node, feature, cut.threshold, left, right)
        return node

    grow(np.arange(x.shape[0]), 0)
    return builder.build()


def grow_gradient_tree(x: np.ndarray, grad: np.ndarray, hess: np.ndarray,
                       max_depth: int, min_leaf: int, l2: float,
                       importance: np.ndarray) -> Tree:
    """Second-order regression tree on gradient/hessian statistics.

    Leaf value is -G/(H+l2). A node splits only if the best gain
    0.5*(GL^2/(HL+l2) + GR^2/(HR+l2) - G^2/(H+l2)) is positive; gains
    accumulate into `importance`. All features are scanned at every node.
    """
    builder = _Builder()

    def grow(idx: np.ndarray, depth: int) -> int:
        g = grad[idx]
        h = hess[idx]
        g_sum = float(g.sum())
        h_sum = float(h.sum())
        node = builder.add(-g_sum / (h_sum + l2))
        n = len(idx)
        if depth >= max_depth or n < 2 * min_leaf:
            return node
        parent_term = g_sum * g_sum / (h_sum + l2)

        def gain_score(g_left, h_left, _count):
            g_right = g_sum - g_left
            h_right = h_sum - h_left
            return (g_left * g_left / (h_left + l2)
                    + g_right * g_right / (h_right + l2))

        cut = _best_cut(x[idx], g, h, min_leaf, gain_score)
        if cut is None:
            return node
        gain = 0.5 * (cut.quality - parent_term)
        if gain <= 0.0:
            return node
        mask = x[idx, cut.feature_local] <= cut.threshold
        n_left = int(mask.sum())
        if n_left == 0 or n_left == n:
            return node
        importance[cut.feature_local] += gain
        left = grow(idx[mask], depth + 1)
        right = grow(idx[~mask], depth + 1)
        builder.set_split(node, cut.feature_local, cut.threshold, left, right)
        return node

    grow(np.arange(x.shape[0]), 0)
    return builder.build()
