"""Patient-disjoint splitting, feature assembly, and the model comparison.

The split groups admissions by patient so no subject straddles train and
test. compare_models reuses one split across every horizon and model spec:
vocabulary and encoder are fitted on the training split, baselines train on
train and are scored on test, and the pooled DNN additionally early-stops
on the validation split.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from notepool.categories import N_CATEGORIES
from notepool.errors import EvaluateError
from notepool.featurize import (
    BasicFeaturesEncoder,
    Vocabulary,
    build_vocabulary_from_streams,
    featurize_admission,
)
from notepool.ingest import CohortInstance
from notepool.metrics import auc_roc, roc_points
from notepool.baselines import (
    DenseDataset,
    ForestConfig,
    GbtConfig,
    LogisticConfig,
    predict,
    train_gradient_boosting,
    train_logistic,
    train_random_forest,
)
from notepool import persist
from notepool import pooled_dnn

DEFAULT_RATIOS: tuple[float, float, float] = (7.0, 1.5, 1.5)

SPLIT_NAMES = ("train", "val", "test")

MIN_COHORT = 10


@dataclass
class SplitAssignment:
    """hadm_id -> split name, plus the settings that produced it."""

    assignment: dict[int, str]
    seed: int
    ratios: tuple[float, float, float]

    def counts(self) -> dict[str, int]:
        out = {name: 0 for name in SPLIT_NAMES}
        for name in self.assignment.values():
            out[name] += 1
        return out

    def ids(self, name: str) -> list[int]:
        return [h for h, s in self.assignment.items() if s == name]

    def save(self, path: str | Path) -> None:
        persist.write_json(path, {
            "seed": self.seed,
            "ratios": list(self.ratios),
            "assignment": {str(h): s for h, s in self.assignment.items()},
        })

    @classmethod
    def load(cls, path: str | Path) -> "SplitAssignment":
        data = persist.read_json(path)
        return cls(assignment={int(h): s for h, s in data["assignment"].items()},
                   seed=int(data["seed"]),
                   ratios=tuple(float(r) for r in data["ratios"]))


def split(instances: Sequence[CohortInstance],
          ratios: Sequence[float] = DEFAULT_RATIOS,
          seed: int = 0) -> SplitAssignment:
    """Assign admissions to train/val/test, keeping each patient together.

    Patients are shuffled with the seed, then greedily fill validation up to
    floor(frac_val * n) admissions and test up to floor(frac_test * n); a
    patient whose admissions would overshoot the target is passed over, and
    everything left goes to train. With one admission per patient the val
    and test sizes hit the floors exactly.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or sum(ratios) <= 0 \
            or ratios[0] <= 0:
        raise EvaluateError(f"ratios must be three non-negative values with "
                            f"a positive train share, got {ratios}")
    n = len(instances)
    if n < MIN_COHORT:
        raise EvaluateError(f"cohort has {n} admissions; at least {MIN_COHORT} required")

    by_subject: dict[int, list[int]] = {}
    for inst in instances:
        by_subject.setdefault(inst.subject_id, []).append(inst.hadm_id)
    subjects = sorted(by_subject)
    order = np.random.default_rng(seed).permutation(len(subjects))

    total = sum(ratios)
    target_val = int(np.floor(ratios[1] / total * n))
    target_test = int(np.floor(ratios[2] / total * n))

    assignment: dict[int, str] = {}
    n_val = n_test = 0
    for idx in order:
        group = by_subject[subjects[idx]]
        if n_val + len(group) <= target_val:
            dest = "val"
            n_val += len(group)
        elif n_test + len(group) <= target_test:
            dest = "test"
            n_test += len(group)
        else:
            dest = "train"
        for hadm in group:
            assignment[hadm] = dest
    return SplitAssignment(assignment=assignment, seed=seed, ratios=ratios)


@dataclass
class FeatureBundle:
    """Every representation of a cohort, aligned row-by-row."""

    hadm_ids: list[int]
    subject_ids: list[int]
    basic: np.ndarray       # (m, basic_dim)
    all_notes: np.ndarray   # (m, vocab)
    matrices: np.ndarray    # (m, n_categories, vocab)
    labels: dict[int, np.ndarray]
    vocab: Vocabulary
    encoder: BasicFeaturesEncoder

    def row_index(self) -> dict[int, int]:
        return {h: i for i, h in enumerate(self.hadm_ids)}

    def dense(self, feature_set: str) -> tuple[np.ndarray, list[str]]:
        """Dense matrix for the baselines: basic, or basic ++ note counts."""
        if feature_set == "basic":
            return self.basic, self.encoder.feature_names
        if feature_set == "basic+notes":
            x = np.concatenate([self.basic, self.all_notes], axis=1)
            return x, self.encoder.feature_names + list(self.vocab.tokens)
        raise EvaluateError(f"unknown feature set {feature_set!r}")


def build_features(instances: Sequence[CohortInstance], vocab: Vocabulary,
                   encoder: BasicFeaturesEncoder,
                   horizons: Sequence[int]) -> FeatureBundle:
    m = len(instances)
    basic = np.zeros((m, encoder.dim), dtype=np.float64)
    matrices = np.zeros((m, N_CATEGORIES, vocab.size), dtype=np.float64)
    for i, inst in enumerate(instances):
        basic[i] = encoder.transform(inst)
        matrices[i] = featurize_admission(inst.tokens_by_category, vocab).rows
    all_notes = matrices.sum(axis=1)
    labels = {h: np.array([inst.labels[h] for inst in instances], dtype=np.int64)
              for h in horizons}
    return FeatureBundle(
        hadm_ids=[inst.hadm_id for inst in instances],
        subject_ids=[inst.subject_id for inst in instances],
        basic=basic, all_notes=all_notes, matrices=matrices, labels=labels,
        vocab=vocab, encoder=encoder,
    )


def fit_vocabulary_and_encoder(instances: Sequence[CohortInstance],
                               assignment: SplitAssignment,
                               k: int) -> tuple[Vocabulary, BasicFeaturesEncoder]:
    """Fit the vocabulary and categorical levels on the training split only."""
    train = [inst for inst in instances
             if assignment.assignment[inst.hadm_id] == "train"]
    if not train:
        raise EvaluateError("training split is empty")
    streams = (toks for inst in train
               for toks in inst.tokens_by_category.values() if toks)
    vocab = build_vocabulary_from_streams(streams, k)
    encoder = BasicFeaturesEncoder.fit(train)
    return vocab, encoder


@dataclass
class ModelSpec:
    model: str        # logistic | forest | gbt | pooled-dnn
    feature_set: str  # basic | basic+notes


def default_grid() -> list[ModelSpec]:
    grid = [ModelSpec(m, fs) for m in ("logistic", "forest", "gbt")
            for fs in ("basic", "basic+notes")]
    grid.append(ModelSpec("pooled-dnn", "basic+notes"))
    return grid


@dataclass
class ModelConfigs:
    logistic: LogisticConfig = dataclasses.field(default_factory=LogisticConfig)
    forest: ForestConfig = dataclasses.field(default_factory=ForestConfig)
    gbt: GbtConfig = dataclasses.field(default_factory=GbtConfig)
    pooled_dnn: pooled_dnn.TrainConfig = dataclasses.field(
        default_factory=pooled_dnn.TrainConfig)


@dataclass
class ResultRow:
    horizon: int
    model: str
    feature_set: str
    auc: float
    n_train: int
    n_val: int
    n_test: int
    seed: int
    val_auc: float | None = None


@dataclass
class ComparisonReport:
    rows: list[ResultRow]

    def to_dict(self) -> dict:
        return {"rows": [dataclasses.asdict(r) for r in self.rows]}

    def save_json(self, path: str | Path) -> None:
        persist.write_json(path, self.to_dict())

    def save_csv(self, path: str | Path) -> None:
        header = ["horizon", "model", "feature_set", "auc",
                  "n_train", "n_val", "n_test", "seed"]
        persist.write_csv(path, header,
                          [(r.horizon, r.model, r.feature_set, r.auc,
                            r.n_train, r.n_val, r.n_test, r.seed)
                           for r in self.rows])

    def get(self, horizon: int, model: str, feature_set: str) -> ResultRow:
        for r in self.rows:
            if (r.horizon, r.model, r.feature_set) == (horizon, model, feature_set):
                return r
        raise KeyError((horizon, model, feature_set))


def _train_baseline(model: str, x: np.ndarray, y: np.ndarray, names: list[str],
                    configs: ModelConfigs, seed: int):
    data = DenseDataset(x, y, names)
    if model == "logistic":
        return train_logistic(data, configs.logistic)
    if model == "forest":
        cfg = dataclasses.replace(configs.forest, seed=seed)
        return train_random_forest(data, cfg)
    if model == "gbt":
        return train_gradient_boosting(data, configs.gbt)
    raise EvaluateError(f"unknown model {model!r}")


def compare_models(instances: Sequence[CohortInstance], horizons: Sequence[int],
                   seed: int = 0, specs: Sequence[ModelSpec] | None = None,
                   configs: ModelConfigs | None = None,
                   ratios: Sequence[float] = DEFAULT_RATIOS,
                   vocab_k: int = 400,
                   out_dir: str | Path | None = None) -> ComparisonReport:
    """Train every spec at every horizon on one shared split.

    When out_dir is given, per-model ROC curves and test scores are written
    under roc/ and scores/.
    """
    specs = list(specs) if specs is not None else default_grid()
    configs = configs or ModelConfigs()
    assignment = split(instances, ratios, seed)
    vocab, encoder = fit_vocabulary_and_encoder(instances, assignment, vocab_k)
    bundle = build_features(instances, vocab, encoder, horizons)

    split_rows = {name: [] for name in SPLIT_NAMES}
    for i, hadm in enumerate(bundle.hadm_ids):
        split_rows[assignment.assignment[hadm]].append(i)
    rows_train = np.array(split_rows["train"], dtype=np.int64)
    rows_val = np.array(split_rows["val"], dtype=np.int64)
    rows_test = np.array(split_rows["test"], dtype=np.int64)

    if out_dir is not None:
        out_dir = Path(out_dir)
        (out_dir / "roc").mkdir(parents=True, exist_ok=True)
        (out_dir / "scores").mkdir(parents=True, exist_ok=True)

    report_rows: list[ResultRow] = []
    for horizon in horizons:
        y = bundle.labels[horizon]
        for spec in specs:
            val_auc = None
            if spec.model == "pooled-dnn":
                if spec.feature_set != "basic+notes":
                    raise EvaluateError("the pooled model always uses notes")
                dnn_cfg = dataclasses.replace(configs.pooled_dnn,
                                              seed=[seed, horizon])
                train_set = pooled_dnn.DnnDataset(
                    bundle.matrices[rows_train], bundle.basic[rows_train],
                    y[rows_train])
                val_set = pooled_dnn.DnnDataset(
                    bundle.matrices[rows_val], bundle.basic[rows_val], y[rows_val])
                params, trace = pooled_dnn.train(train_set, val_set, dnn_cfg)
                scores = pooled_dnn.forward_many(
                    params, bundle.matrices[rows_test], bundle.basic[rows_test])
                val_auc = max(trace.val_auc)
            else:
                x, names = bundle.dense(spec.feature_set)
                model = _train_baseline(spec.model, x[rows_train], y[rows_train],
                                        names, configs, seed)
                scores = predict(model, x[rows_test])
            auc = auc_roc(scores, y[rows_test])
            report_rows.append(ResultRow(
                horizon=horizon, model=spec.model, feature_set=spec.feature_set,
                auc=auc, n_train=len(rows_train), n_val=len(rows_val),
                n_test=len(rows_test), seed=seed, val_auc=val_auc))
            if out_dir is not None:
                tag = f"h{horizon}_{spec.model}_{spec.feature_set.replace('+', '-')}"
                roc_points(scores, y[rows_test]).save_csv(out_dir / "roc" / f"{tag}.csv")
                persist.write_csv(
                    out_dir / "scores" / f"{tag}.csv",
                    ["hadm_id", "score", "label"],
                    [(bundle.hadm_ids[i], float(s), int(lbl))
                     for i, s, lbl in zip(rows_test, scores, y[rows_test])])
    return ComparisonReport(rows=report_rows)
