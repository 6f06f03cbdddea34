"""Ranking metrics: AUC-ROC and ROC curves.

AUC is the Mann-Whitney statistic with half credit for ties. It is computed
in integer arithmetic (twice the pair credit is always an integer), so the
result is exact: identical to the brute-force average over all
positive-negative pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from notepool.errors import MetricsError
from notepool import persist


def _validate(scores, labels) -> tuple[np.ndarray, np.ndarray]:
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.ndim != 1 or y.ndim != 1 or s.shape[0] != y.shape[0]:
        raise MetricsError(f"scores and labels must be 1-d and aligned, got {s.shape} vs {y.shape}")
    if s.shape[0] == 0:
        raise MetricsError("empty score set")
    if not np.all(np.isfinite(s)):
        raise MetricsError("scores contain non-finite values")
    if not np.all((y == 0) | (y == 1)):
        raise MetricsError("labels must be 0 or 1")
    y = y.astype(np.int64)
    if y.min() == y.max():
        raise MetricsError("AUC needs at least one positive and one negative")
    return s, y


def auc_roc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Probability a random positive outranks a random negative (ties: 1/2).

    Exact: pair counts are accumulated as integers and divided once.
    """
    s, y = _validate(scores, labels)
    order = np.argsort(s, kind="stable")
    s, y = s[order], y[order]
    # Group boundaries between distinct score values (ascending).
    boundary = np.flatnonzero(s[1:] != s[:-1]) + 1
    starts = np.concatenate(([0], boundary))
    ends = np.concatenate((boundary, [len(s)]))
    pos_per = np.add.reduceat(y, starts)
    neg_per = (ends - starts) - pos_per
    neg_below = np.concatenate(([0], np.cumsum(neg_per)[:-1]))
    # Each positive scores 1 against negatives below it, 1/2 against ties.
    twice_credit = int(np.sum(pos_per * (2 * neg_below + neg_per)))
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    return twice_credit / (2 * n_pos * n_neg)


@dataclass
class RocCurve:
    """ROC polyline from (0,0) to (1,1), one vertex per distinct score."""

    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # aligned with vertices; first is +inf

    def area(self) -> float:
        """Trapezoidal area under the polyline."""
        dx = self.fpr[1:] - self.fpr[:-1]
        avg_y = (self.tpr[1:] + self.tpr[:-1]) / 2.0
        return float(np.sum(dx * avg_y))

    def save_csv(self, path: str | Path) -> None:
        rows = zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist())
        persist.write_csv(path, ["fpr", "tpr", "threshold"], rows)


def roc_points(scores: Sequence[float], labels: Sequence[int]) -> RocCurve:
    """ROC vertices at every distinct score threshold, descending.

    A point (fpr, tpr) gives the rates when predicting positive at
    score >= threshold. The (0,0) vertex carries threshold +inf.
    """
    s, y = _validate(scores, labels)
    order = np.argsort(-s, kind="stable")
    s, y = s[order], y[order]
    boundary = np.flatnonzero(s[1:] != s[:-1]) + 1
    starts = np.concatenate(([0], boundary))
    ends = np.concatenate((boundary, [len(s)]))
    pos_per = np.add.reduceat(y, starts)
    neg_per = (ends - starts) - pos_per
    tp = np.cumsum(pos_per)
    fp = np.cumsum(neg_per)
    n_pos, n_neg = int(tp[-1]), int(fp[-1])
    fpr = np.concatenate(([0.0], fp / n_neg))
    tpr = np.concatenate(([0.0], tp / n_pos))
    thresholds = np.concatenate(([np.inf], s[starts]))
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds)
