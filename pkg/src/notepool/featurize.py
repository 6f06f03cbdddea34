"""Note tokenization, bag-of-words vocabulary, and admission-level features.

An admission turns into three aligned pieces:
  * a (n_categories x vocab_size) count matrix, one row per canonical note
    category, plus per-category token lengths;
  * an "all notes" count vector (the column sums of that matrix);
  * a dense basic-features vector (one-hot demographics + admission age).

The vocabulary and the categorical levels are always fitted on the training
split only; everything downstream treats them as frozen.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from notepool.categories import (
    CANONICAL_CATEGORIES,
    CATEGORY_INDEX,
    N_CATEGORIES,
    canonical_category,
)
from notepool.errors import FeaturizeError
from notepool import persist

# De-identification placeholders look like [**2101-4-2**] or [**Hospital1 18**].
# They are stripped before splitting so their digits never become tokens.
_PLACEHOLDER = re.compile(r"\[\*\*.*?\*\*\]", re.DOTALL)
_TOKEN = re.compile(r"[0-9a-z]+")


def tokenize(text: str) -> list[str]:
    """Lowercase, drop de-id placeholders, and split into [0-9a-z]+ runs."""
    return _TOKEN.findall(_PLACEHOLDER.sub(" ", text.lower()))


@dataclass
class Vocabulary:
    """Top-k tokens of a corpus, ordered by (frequency desc, token asc)."""

    tokens: list[str]
    frequencies: list[int]
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.frequencies):
            raise FeaturizeError("vocabulary tokens and frequencies differ in length")
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise FeaturizeError("vocabulary contains duplicate tokens")

    @property
    def size(self) -> int:
        return len(self.tokens)

    def fingerprint(self) -> str:
        return persist.sha256_of_text("\n".join(self.tokens))

    def save_csv(self, path: str | Path) -> None:
        persist.write_csv(path, ["rank", "token", "frequency"],
                          [(i, t, f) for i, (t, f) in enumerate(zip(self.tokens, self.frequencies))])

    @classmethod
    def load_csv(cls, path: str | Path) -> "Vocabulary":
        header, rows = persist.read_csv(path)
        if header != ["rank", "token", "frequency"]:
            raise FeaturizeError(f"unexpected vocabulary header in {path}: {header}")
        return cls([r[1] for r in rows], [int(r[2]) for r in rows])


def build_vocabulary_from_streams(streams: Iterable[Sequence[str]], k: int) -> Vocabulary:
    """Build the top-k vocabulary from pre-tokenized note streams."""
    if k < 1:
        raise FeaturizeError(f"vocabulary size must be >= 1, got {k}")
    counts: Counter[str] = Counter()
    for toks in streams:
        counts.update(toks)
    if len(counts) < k:
        raise FeaturizeError(
            f"corpus has only {len(counts)} distinct tokens, need k={k}")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    return Vocabulary([t for t, _ in ranked], [c for _, c in ranked])


def build_vocabulary(texts: Iterable[str], k: int) -> Vocabulary:
    return build_vocabulary_from_streams((tokenize(t) for t in texts), k)


def vectorize(tokens: Sequence[str], vocab: Vocabulary) -> tuple[np.ndarray, int]:
    """Count in-vocabulary tokens. Returns (count vector, total token length).

    The length counts every token, in vocabulary or not.
    """
    vec = np.zeros(vocab.size, dtype=np.int64)
    idx = vocab.index
    for tok in tokens:
        j = idx.get(tok)
        if j is not None:
            vec[j] += 1
    return vec, len(tokens)


@dataclass
class CategoryMatrix:
    """Per-category bag-of-words for one admission.

    rows[i] is the count vector over the vocabulary for canonical category i;
    token_lengths[i] is the total token count of that category's notes.
    """

    rows: np.ndarray
    token_lengths: np.ndarray

    def all_notes(self) -> np.ndarray:
        return self.rows.sum(axis=0)


def featurize_admission(tokens_by_category: Mapping[str, Sequence[str]],
                        vocab: Vocabulary) -> CategoryMatrix:
    """Stack per-category count vectors in canonical category order.

    Categories absent from the mapping produce all-zero rows. Keys must be
    canonical category names.
    """
    for key in tokens_by_category:
        if key not in CATEGORY_INDEX:
            raise FeaturizeError(f"unknown note category {key!r}")
    rows = np.zeros((N_CATEGORIES, vocab.size), dtype=np.int64)
    lengths = np.zeros(N_CATEGORIES, dtype=np.int64)
    for i, cat in enumerate(CANONICAL_CATEGORIES):
        toks = tokens_by_category.get(cat)
        if toks:
            rows[i], lengths[i] = vectorize(toks, vocab)
    return CategoryMatrix(rows=rows, token_lengths=lengths)


BASIC_CATEGORICAL_FIELDS: tuple[str, ...] = (
    "ADMISSION_TYPE",
    "ADMISSION_LOCATION",
    "INSURANCE",
    "LANGUAGE",
    "RELIGION",
    "MARITAL_STATUS",
    "GENDER",
)

UNKNOWN_LEVEL = "UNKNOWN"


@dataclass
class BasicFeaturesEncoder:
    """One-hot encoder for admission demographics plus a real-valued age.

    Levels are fitted on the training split; every field carries an UNKNOWN
    column so unseen levels at inference map there instead of failing.
    """

    levels: dict[str, list[str]]

    def __post_init__(self) -> None:
        for fld in BASIC_CATEGORICAL_FIELDS:
            if fld not in self.levels:
                raise FeaturizeError(f"encoder missing levels for {fld}")
            if UNKNOWN_LEVEL not in self.levels[fld]:
                raise FeaturizeError(f"levels for {fld} lack {UNKNOWN_LEVEL}")
        self._offsets = {}
        off = 0
        for fld in BASIC_CATEGORICAL_FIELDS:
            self._offsets[fld] = off
            off += len(self.levels[fld])
        self._dim = off + 1  # final slot is admission age

    @classmethod
    def fit(cls, instances: Iterable) -> "BasicFeaturesEncoder":
        levels: dict[str, set[str]] = {f: {UNKNOWN_LEVEL} for f in BASIC_CATEGORICAL_FIELDS}
        for inst in instances:
            for fld in BASIC_CATEGORICAL_FIELDS:
                value = inst.basic.get(fld, "") or UNKNOWN_LEVEL
                levels[fld].add(value)
        return cls({f: sorted(vals) for f, vals in levels.items()})

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def feature_names(self) -> list[str]:
        names = [f"{fld}={lv}" for fld in BASIC_CATEGORICAL_FIELDS for lv in self.levels[fld]]
        names.append("ADMIT_AGE")
        return names

    def transform(self, instance) -> np.ndarray:
        vec = np.zeros(self._dim, dtype=np.float64)
        for fld in BASIC_CATEGORICAL_FIELDS:
            lvls = self.levels[fld]
            value = instance.basic.get(fld, "") or UNKNOWN_LEVEL
            if value not in lvls:
                value = UNKNOWN_LEVEL
            vec[self._offsets[fld] + lvls.index(value)] = 1.0
        vec[-1] = float(instance.admit_age)
        return vec

    def to_dict(self) -> dict:
        return {"levels": {f: list(v) for f, v in self.levels.items()}}

    @classmethod
    def from_dict(cls, data: dict) -> "BasicFeaturesEncoder":
        return cls({f: list(v) for f, v in data["levels"].items()})


@dataclass
class CategoryStats:
    note_count: int
    fraction: float
    mean_token_length: float | None


@dataclass
class NoteCorpusStats:
    """Per-category note counts, corpus fractions, and mean token lengths."""

    per_category: dict[str, CategoryStats]
    total_notes: int
    unmatched_notes: int

    def to_dict(self) -> dict:
        return {
            "total_notes": self.total_notes,
            "unmatched_notes": self.unmatched_notes,
            "per_category": {
                c: {
                    "note_count": s.note_count,
                    "fraction": s.fraction,
                    "mean_token_length": s.mean_token_length,
                }
                for c, s in self.per_category.items()
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "NoteCorpusStats":
        per = {
            c: CategoryStats(s["note_count"], s["fraction"], s["mean_token_length"])
            for c, s in data["per_category"].items()
        }
        return cls(per, data["total_notes"], data["unmatched_notes"])


def note_corpus_stats(notes: Iterable) -> NoteCorpusStats:
    """Tally notes per canonical category over any iterable of note rows.

    Each note needs .category and .text. Categories that do not canonicalize
    are counted as unmatched and excluded from fractions.
    """
    counts = {c: 0 for c in CANONICAL_CATEGORIES}
    token_totals = {c: 0 for c in CANONICAL_CATEGORIES}
    unmatched = 0
    for note in notes:
        cat = note.category if note.category in counts else canonical_category(note.category or "")
        if cat is None:
            unmatched += 1
            continue
        counts[cat] += 1
        token_totals[cat] += len(tokenize(note.text))
    total = sum(counts.values())
    per: dict[str, CategoryStats] = {}
    for cat in CANONICAL_CATEGORIES:
        n = counts[cat]
        per[cat] = CategoryStats(
            note_count=n,
            fraction=(n / total) if total else 0.0,
            mean_token_length=(token_totals[cat] / n) if n else None,
        )
    return NoteCorpusStats(per_category=per, total_notes=total, unmatched_notes=unmatched)
