"""Knowledge discovery: what the pooled model learned to look at.

Token sensitivity is a finite-difference probe: add one occurrence of token
j to category i's counts for every admission in the evaluation set and
measure the mean change in predicted survival. Category sensitivity averages
that over the vocabulary; a normalized variant multiplies by the category's
mean note length so rarely-written but long categories are comparable to
chatty ones. The report path reuses one base forward pass but produces
bit-identical values to calling token_sensitivity per token, because both
go through the same batched forward.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from notepool.categories import CANONICAL_CATEGORIES, CATEGORY_INDEX
from notepool.errors import DiscoveryError
from notepool.featurize import NoteCorpusStats, Vocabulary
from notepool.pooled_dnn import PooledDnnParams, forward_many
from notepool import persist


@dataclass
class EvalSet:
    """Featurized admissions to probe, with the vocabulary that indexed them."""

    matrices: np.ndarray  # (m, n_categories, vocab) float64
    basics: np.ndarray    # (m, basic_dim)
    vocab: Vocabulary

    def __post_init__(self) -> None:
        self.matrices = np.asarray(self.matrices, dtype=np.float64)
        self.basics = np.asarray(self.basics, dtype=np.float64)
        if self.matrices.ndim != 3 or self.matrices.shape[0] != self.basics.shape[0]:
            raise DiscoveryError("matrices and basics are misaligned")
        if self.matrices.shape[2] != self.vocab.size:
            raise DiscoveryError("matrices do not match the vocabulary size")
        if self.matrices.shape[0] == 0:
            raise DiscoveryError("evaluation set is empty")


def _resolve(eval_set: EvalSet, token: str, category: str) -> tuple[int, int]:
    i = CATEGORY_INDEX.get(category)
    if i is None:
        raise DiscoveryError(f"unknown category {category!r}")
    j = eval_set.vocab.index.get(token)
    if j is None:
        raise DiscoveryError(f"token {token!r} is not in the vocabulary")
    return i, j


def _sensitivity_from_base(params: PooledDnnParams, eval_set: EvalSet,
                           i: int, j: int, base: np.ndarray) -> float:
    """Mean forward change from one extra count at (category i, token j).

    Bumps the count in place and restores it; counts are small integers
    stored as float64, so the restore is exact.
    """
    mats = eval_set.matrices
    mats[:, i, j] += 1.0
    try:
        perturbed = forward_many(params, mats, eval_set.basics)
    finally:
        mats[:, i, j] -= 1.0
    return float(np.mean(perturbed - base))


def token_sensitivity(params: PooledDnnParams, eval_set: EvalSet,
                      token: str, category: str) -> float:
    """Finite-difference sensitivity of predicted survival to one token.

    Equals mean(forward(x + e_ij) - forward(x)) over the evaluation set,
    computed with the same batched forward an independent caller would use.
    """
    i, j = _resolve(eval_set, token, category)
    base = forward_many(params, eval_set.matrices, eval_set.basics)
    return _sensitivity_from_base(params, eval_set, i, j, base)


def category_sensitivity(params: PooledDnnParams, eval_set: EvalSet,
                         category: str) -> float:
    """Mean of the token sensitivities across the whole vocabulary."""
    i = CATEGORY_INDEX.get(category)
    if i is None:
        raise DiscoveryError(f"unknown category {category!r}")
    base = forward_many(params, eval_set.matrices, eval_set.basics)
    vals = [_sensitivity_from_base(params, eval_set, i, j, base)
            for j in range(eval_set.vocab.size)]
    return float(np.mean(vals))


def normalized_sensitivity(sensitivity: float, category: str,
                           stats: NoteCorpusStats) -> float:
    """Sensitivity scaled by the category's mean note token length."""
    cat_stats = stats.per_category.get(category)
    if cat_stats is None or cat_stats.mean_token_length is None:
        raise DiscoveryError(
            f"category {category!r} has no notes; normalized sensitivity undefined")
    return sensitivity * cat_stats.mean_token_length


def length_survival_correlation(instances: Iterable, category: str,
                                horizon: int) -> float:
    """Pearson correlation of per-admission category token length vs label."""
    if category not in CATEGORY_INDEX:
        raise DiscoveryError(f"unknown category {category!r}")
    lengths = []
    labels = []
    for inst in instances:
        lengths.append(float(len(inst.tokens_by_category.get(category) or ())))
        labels.append(float(inst.labels[horizon]))
    if len(lengths) < 2:
        raise DiscoveryError("correlation needs at least two admissions")
    x = np.asarray(lengths)
    y = np.asarray(labels)
    xc = x - x.mean()
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum() * (yc * yc).sum())
    if denom == 0.0:
        raise DiscoveryError(
            f"correlation undefined: zero variance in {category!r} lengths or labels")
    return float((xc * yc).sum() / denom)


@dataclass
class SignificanceThresholds:
    """Report-level flags; values mark |statistic| at or above the cut."""

    weight: float = 0.2
    normalized_sensitivity: float = 1.0
    correlation: float = 0.1


@dataclass
class CategoryRow:
    category: str
    weight: float
    sensitivity: float
    normalized_sensitivity: float | None
    length_survival_correlation: float | None
    note_count: int
    mean_token_length: float | None
    significant_weight: bool
    significant_sensitivity: bool
    significant_correlation: bool


@dataclass
class SensitivityReport:
    horizon: int
    rows: list[CategoryRow]

    def to_dict(self) -> dict:
        return {
            "horizon": self.horizon,
            "rows": [{
                "category": r.category,
                "weight": r.weight,
                "sensitivity": r.sensitivity,
                "normalized_sensitivity": r.normalized_sensitivity,
                "length_survival_correlation": r.length_survival_correlation,
                "note_count": r.note_count,
                "mean_token_length": r.mean_token_length,
                "significant_weight": r.significant_weight,
                "significant_sensitivity": r.significant_sensitivity,
                "significant_correlation": r.significant_correlation,
            } for r in self.rows],
        }

    def save_csv(self, path: str | Path) -> None:
        header = ["category", "weight", "sensitivity", "normalized_sensitivity",
                  "length_survival_correlation", "note_count", "mean_token_length",
                  "significant_weight", "significant_sensitivity",
                  "significant_correlation"]
        rows = [(r.category, r.weight, r.sensitivity, r.normalized_sensitivity,
                 r.length_survival_correlation, r.note_count, r.mean_token_length,
                 str(r.significant_weight).lower(),
                 str(r.significant_sensitivity).lower(),
                 str(r.significant_correlation).lower()) for r in self.rows]
        persist.write_csv(path, header, rows)


def build_sensitivity_report(params: PooledDnnParams, eval_set: EvalSet,
                             instances: Sequence, stats: NoteCorpusStats,
                             horizon: int,
                             thresholds: SignificanceThresholds | None = None,
                             ) -> SensitivityReport:
    """Per-category sensitivity table for one horizon.

    Categories with no notes get empty normalized-sensitivity cells, and
    categories with constant length (or constant labels) get empty
    correlation cells, rather than failing the whole report.
    """
    thresholds = thresholds or SignificanceThresholds()
    base = forward_many(params, eval_set.matrices, eval_set.basics)
    rows: list[CategoryRow] = []
    for i, category in enumerate(CANONICAL_CATEGORIES):
        vals = [_sensitivity_from_base(params, eval_set, i, j, base)
                for j in range(eval_set.vocab.size)]
        sens = float(np.mean(vals))
        cat_stats = stats.per_category[category]
        norm = (sens * cat_stats.mean_token_length
                if cat_stats.mean_token_length is not None else None)
        try:
            corr = length_survival_correlation(instances, category, horizon)
        except DiscoveryError:
            corr = None
        rows.append(CategoryRow(
            category=category,
            weight=float(params.w[i]),
            sensitivity=sens,
            normalized_sensitivity=norm,
            length_survival_correlation=corr,
            note_count=cat_stats.note_count,
            mean_token_length=cat_stats.mean_token_length,
            significant_weight=bool(abs(params.w[i]) >= thresholds.weight),
            significant_sensitivity=bool(norm is not None
                                         and abs(norm) >= thresholds.normalized_sensitivity),
            significant_correlation=bool(corr is not None
                                         and abs(corr) >= thresholds.correlation),
        ))
    return SensitivityReport(horizon=horizon, rows=rows)


@dataclass
class KeywordSurvival:
    token: str
    support: int
    fractions: dict[int, float | None]


def keyword_survival(instances: Iterable, token: str,
                     horizons: Sequence[int]) -> KeywordSurvival:
    """Survival fraction at each horizon among admissions mentioning a token.

    The query goes through the note tokenizer, so it must reduce to exactly
    one token. Fractions are None when no admission mentions it.
    """
    from notepool.featurize import tokenize

    parts = tokenize(token)
    if len(parts) != 1:
        raise DiscoveryError(
            f"keyword query must normalize to a single token, got {parts!r}")
    needle = parts[0]
    support = 0
    survived = {h: 0 for h in horizons}
    for inst in instances:
        present = any(needle in toks for toks in inst.tokens_by_category.values())
        if not present:
            continue
        support += 1
        for h in horizons:
            survived[h] += inst.labels[h]
    fractions: dict[int, float | None] = {}
    for h in horizons:
        fractions[h] = (survived[h] / support) if support else None
    return KeywordSurvival(token=needle, support=support, fractions=fractions)


@dataclass
class KeywordRow:
    rank: int
    token: str
    importance: float
    support: int
    fractions: dict[int, float | None]


@dataclass
class KeywordReport:
    horizons: list[int]
    rows: list[KeywordRow]

    def to_dict(self) -> dict:
        return {
            "horizons": list(self.horizons),
            "rows": [{
                "rank": r.rank,
                "token": r.token,
                "importance": r.importance,
                "support": r.support,
                "fractions": {str(h): r.fractions[h] for h in self.horizons},
            } for r in self.rows],
        }

    def save_csv(self, path: str | Path) -> None:
        header = ["rank", "token", "importance", "support"]
        header += [f"survival_{h}d" for h in self.horizons]
        rows = []
        for r in self.rows:
            row = [r.rank, r.token, r.importance, r.support]
            row += [r.fractions[h] for h in self.horizons]
            rows.append(row)
        persist.write_csv(path, header, rows)


def build_keyword_report(ranked_importance: Sequence[tuple[str, float]],
                         vocab: Vocabulary, instances: Sequence,
                         horizons: Sequence[int], top_n: int = 20) -> KeywordReport:
    """Survival table for the top-ranked vocabulary features.

    `ranked_importance` is feature_importance output over mixed feature
    names; only names that are vocabulary tokens are kept.
    """
    if top_n < 1:
        raise DiscoveryError(f"top_n must be >= 1, got {top_n}")
    rows: list[KeywordRow] = []
    for name, imp in ranked_importance:
        if name not in vocab.index:
            continue
        ks = keyword_survival(instances, name, horizons)
        rows.append(KeywordRow(rank=len(rows) + 1, token=name, importance=imp,
                               support=ks.support, fractions=ks.fractions))
        if len(rows) == top_n:
            break
    return KeywordReport(horizons=list(horizons), rows=rows)
