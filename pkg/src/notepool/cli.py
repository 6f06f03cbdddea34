"""Command-line pipeline: synth -> cohort -> featurize -> train -> evaluate
-> discover.

Every command takes --config and an optional --seed override. Outputs land
under <output_dir>/<run-name>/, where the run name encodes the config
fingerprint and seed: re-running any command with the same config and seed
rewrites byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from notepool import persist, pooled_dnn, synthgen
from notepool.baselines import feature_importance, predict, save_model
from notepool.config import RunConfig
from notepool.discovery import (
    EvalSet,
    build_keyword_report,
    build_sensitivity_report,
)
from notepool.errors import ConfigError, NotepoolError, UsageError
from notepool.evaluate import (
    ModelConfigs,
    SplitAssignment,
    build_features,
    compare_models,
    fit_vocabulary_and_encoder,
    split,
)
from notepool.featurize import BasicFeaturesEncoder, NoteCorpusStats, Vocabulary, note_corpus_stats
from notepool.ingest import build_cohort, load_cohort, load_tables, save_cohort

MODEL_CHOICES = ("logistic", "forest", "gbt", "pooled-dnn")
FEATURE_CHOICES = ("basic", "basic+notes")


def _load_config(args) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if getattr(args, "seed", None) is not None:
        config.seed = args.seed
    return config


def _table_paths(config: RunConfig) -> dict[str, Path]:
    """Configured table paths, falling back to this run's synth output."""
    if config.paths.tables:
        paths = {name: Path(p) for name, p in config.paths.tables.items()}
    else:
        synth_dir = config.run_dir() / "synth"
        if not synth_dir.exists():
            raise UsageError(
                "no paths.tables in config and no synth/ directory in the run "
                "folder; run `notepool synth` first or point paths.tables at CSVs")
        paths = synthgen.table_paths(synth_dir)
    for name, p in paths.items():
        if not p.exists():
            raise UsageError(f"{name} table does not exist: {p}")
    return paths


def _features_dir(run_dir: Path) -> Path:
    return run_dir / "features"


def _require(path: Path, hint: str) -> Path:
    if not path.exists():
        raise UsageError(f"{path} not found; {hint}")
    return path


def cmd_synth(args) -> int:
    config = _load_config(args)
    out = config.run_dir() / "synth"
    manifest = synthgen.generate(config.synth, out)
    print(f"wrote synthetic tables to {out}")
    print(f"admissions: {manifest.counts['admissions_total']}, "
          f"cohort-eligible: {manifest.counts['labels_consistent']}")
    return 0


def cmd_cohort(args) -> int:
    config = _load_config(args)
    run_dir = config.run_dir()
    run_dir.mkdir(parents=True, exist_ok=True)
    raw = load_tables(_table_paths(config))
    result = build_cohort(raw, config.cohort.icd9_prefixes, config.horizons)
    save_cohort(run_dir / "cohort.json", result, config.horizons)
    persist.write_json(run_dir / "cohort_summary.json", {
        "summary": result.summary.to_dict(),
        "parse_report": raw.report.to_dict(),
    })
    kept = {inst.hadm_id for inst in result.instances}
    notes = [note for hadm in sorted(kept) for note in raw.notes_by_hadm.get(hadm, [])]
    stats = note_corpus_stats(notes)
    persist.write_json(run_dir / "note_stats.json", stats.to_dict())
    s = result.summary
    print(f"cohort: {s.labels_consistent} admissions from {s.unique_patients} patients "
          f"(of {s.admissions_total} total admissions)")
    print(f"wrote {run_dir / 'cohort.json'}")
    return 0


def _load_cohort_artifacts(run_dir: Path):
    path = _require(run_dir / "cohort.json", "run `notepool cohort` first")
    return load_cohort(path)


def cmd_featurize(args) -> int:
    config = _load_config(args)
    run_dir = config.run_dir()
    instances, horizons, _ = _load_cohort_artifacts(run_dir)
    assignment = split(instances, config.split.ratios, config.seed)
    vocab, encoder = fit_vocabulary_and_encoder(instances, assignment,
                                                config.vocabulary.k)
    bundle = build_features(instances, vocab, encoder, horizons)

    assignment.save(run_dir / "split.json")
    vocab.save_csv(run_dir / "vocabulary.csv")
    fdir = _features_dir(run_dir)
    fdir.mkdir(parents=True, exist_ok=True)
    persist.write_array(fdir / "basic.npy", bundle.basic)
    persist.write_array(fdir / "all_notes.npy", bundle.all_notes)
    persist.write_array(fdir / "category_matrices.npy", bundle.matrices)
    persist.write_json(fdir / "meta.json", {
        "hadm_ids": bundle.hadm_ids,
        "subject_ids": bundle.subject_ids,
        "basic_feature_names": encoder.feature_names,
        "encoder": encoder.to_dict(),
        "vocabulary_fingerprint": vocab.fingerprint(),
        "horizons": list(horizons),
    })
    counts = assignment.counts()
    print(f"split: train={counts['train']} val={counts['val']} test={counts['test']}")
    print(f"vocabulary: {vocab.size} tokens; features under {fdir}")
    return 0


def _load_feature_artifacts(run_dir: Path):
    fdir = _features_dir(run_dir)
    _require(fdir / "meta.json", "run `notepool featurize` first")
    meta = persist.read_json(fdir / "meta.json")
    basic = persist.read_array(fdir / "basic.npy")
    all_notes = persist.read_array(fdir / "all_notes.npy")
    matrices = persist.read_array(fdir / "category_matrices.npy")
    vocab = Vocabulary.load_csv(_require(run_dir / "vocabulary.csv",
                                         "run `notepool featurize` first"))
    assignment = SplitAssignment.load(_require(run_dir / "split.json",
                                               "run `notepool featurize` first"))
    encoder = BasicFeaturesEncoder.from_dict(meta["encoder"])
    return meta, basic, all_notes, matrices, vocab, assignment, encoder


def _split_rows(meta: dict, assignment: SplitAssignment) -> dict[str, np.ndarray]:
    rows = {"train": [], "val": [], "test": []}
    for i, hadm in enumerate(meta["hadm_ids"]):
        rows[assignment.assignment[int(hadm)]].append(i)
    return {k: np.asarray(v, dtype=np.int64) for k, v in rows.items()}


def cmd_train(args) -> int:
    config = _load_config(args)
    run_dir = config.run_dir()
    horizon = args.horizon
    if horizon not in config.horizons:
        raise UsageError(f"horizon {horizon} is not in the configured horizons "
                         f"{config.horizons}")
    instances, _, _ = _load_cohort_artifacts(run_dir)
    meta, basic, all_notes, matrices, vocab, assignment, encoder = \
        _load_feature_artifacts(run_dir)
    labels_by_hadm = {inst.hadm_id: inst.labels for inst in instances}
    y = np.array([labels_by_hadm[int(h)][horizon] for h in meta["hadm_ids"]],
                 dtype=np.float64)
    rows = _split_rows(meta, assignment)

    models_dir = run_dir / "models"
    models_dir.mkdir(parents=True, exist_ok=True)
    features = args.features
    tag = f"{args.model}_{features.replace('+', '-')}_h{horizon}"

    meta_out = {"horizon": horizon, "feature_set": features, "seed": config.seed,
                "vocabulary_fingerprint": meta["vocabulary_fingerprint"]}
    if args.model == "pooled-dnn":
        if features != "basic+notes":
            raise UsageError("pooled-dnn always trains on basic+notes")
        cfg = dataclasses.replace(config.models.pooled_dnn,
                                  seed=[config.seed, horizon])
        train_set = pooled_dnn.DnnDataset(matrices[rows["train"]],
                                          basic[rows["train"]], y[rows["train"]])
        val_set = pooled_dnn.DnnDataset(matrices[rows["val"]],
                                        basic[rows["val"]], y[rows["val"]])
        params, trace = pooled_dnn.train(train_set, val_set, cfg)
        pooled_dnn.save_params(models_dir / f"{tag}.json", params, meta_out)
        trace.save_csv(models_dir / f"{tag}_trace.csv")
        print(f"best epoch {trace.best_epoch}, val AUC {max(trace.val_auc):.4f}")
    else:
        if features == "basic":
            x, names = basic, meta["basic_feature_names"]
        else:
            x = np.concatenate([basic, all_notes], axis=1)
            names = meta["basic_feature_names"] + list(vocab.tokens)
        from notepool.evaluate import _train_baseline

        model = _train_baseline(args.model, x[rows["train"]], y[rows["train"]],
                                names, _model_configs(config), config.seed)
        save_model(models_dir / f"{tag}.json", model, meta_out)
        from notepool.metrics import auc_roc

        val_rows = rows["val"]
        if len(val_rows) and 0 < y[val_rows].sum() < len(val_rows):
            print(f"val AUC {auc_roc(predict(model, x[val_rows]), y[val_rows]):.4f}")
    print(f"wrote {models_dir / (tag + '.json')}")
    return 0


def _model_configs(config: RunConfig) -> ModelConfigs:
    return ModelConfigs(logistic=config.models.logistic,
                        forest=config.models.forest,
                        gbt=config.models.gbt,
                        pooled_dnn=config.models.pooled_dnn)


def cmd_evaluate(args) -> int:
    config = _load_config(args)
    run_dir = config.run_dir()
    instances, horizons, _ = _load_cohort_artifacts(run_dir)
    out = run_dir / "evaluate"
    out.mkdir(parents=True, exist_ok=True)
    report = compare_models(instances, horizons, seed=config.seed,
                            configs=_model_configs(config),
                            ratios=config.split.ratios,
                            vocab_k=config.vocabulary.k, out_dir=out)
    report.save_json(out / "comparison.json")
    report.save_csv(out / "comparison.csv")
    for row in report.rows:
        print(f"h={row.horizon:<4d} {row.model:<11s} {row.feature_set:<12s} "
              f"test AUC {row.auc:.4f}")
    print(f"wrote {out / 'comparison.csv'}")
    return 0


def cmd_discover(args) -> int:
    config = _load_config(args)
    run_dir = config.run_dir()
    horizon = args.horizon
    instances, horizons, _ = _load_cohort_artifacts(run_dir)
    meta, basic, all_notes, matrices, vocab, assignment, encoder = \
        _load_feature_artifacts(run_dir)
    stats = NoteCorpusStats.from_dict(
        persist.read_json(_require(run_dir / "note_stats.json",
                                   "run `notepool cohort` first")))
    tag = f"pooled-dnn_basic-notes_h{horizon}"
    params, _ = pooled_dnn.load_params(
        _require(run_dir / "models" / f"{tag}.json",
                 f"run `notepool train --model pooled-dnn --horizon {horizon}` first"))

    rows = _split_rows(meta, assignment)
    probe_rows = rows["test"][:config.analysis.max_eval_instances]
    eval_set = EvalSet(matrices[probe_rows], basic[probe_rows], vocab)
    by_hadm = {inst.hadm_id: inst for inst in instances}
    ordered = [by_hadm[int(h)] for h in meta["hadm_ids"]]
    probe_instances = [ordered[i] for i in probe_rows]

    out = run_dir / "discover" / f"h{horizon}"
    out.mkdir(parents=True, exist_ok=True)
    sens = build_sensitivity_report(params, eval_set, probe_instances, stats,
                                    horizon, config.analysis.thresholds)
    sens.save_csv(out / "sensitivity_report.csv")
    persist.write_json(out / "sensitivity_report.json", sens.to_dict())

    y = np.array([by_hadm[int(h)].labels[horizon] for h in meta["hadm_ids"]],
                 dtype=np.float64)
    x = np.concatenate([basic, all_notes], axis=1)
    names = meta["basic_feature_names"] + list(vocab.tokens)
    from notepool.evaluate import _train_baseline

    gbt = _train_baseline("gbt", x[rows["train"]], y[rows["train"]], names,
                          _model_configs(config), config.seed)
    ranked = feature_importance(gbt)
    keywords = build_keyword_report(ranked, vocab, instances, horizons,
                                    config.analysis.top_keywords)
    keywords.save_csv(out / "keyword_report.csv")
    persist.write_json(out / "keyword_report.json", keywords.to_dict())

    top = [r for r in sens.rows
           if r.normalized_sensitivity is not None]
    top.sort(key=lambda r: -abs(r.normalized_sensitivity))
    for r in top[:3]:
        print(f"{r.category}: weight {r.weight:+.4f}, "
              f"normalized sensitivity {r.normalized_sensitivity:+.4f}")
    if keywords.rows:
        print(f"top keyword: {keywords.rows[0].token} "
              f"(support {keywords.rows[0].support})")
    print(f"wrote {out / 'sensitivity_report.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="notepool",
        description="Mortality-after-discharge prediction from EHR notes")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="path to the run config JSON")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")

    p = sub.add_parser("synth", help="generate synthetic input tables")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cohort", help="build the labeled study cohort")
    common(p)
    p.set_defaults(func=cmd_cohort)

    p = sub.add_parser("featurize", help="split and vectorize the cohort")
    common(p)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train one model for one horizon")
    common(p)
    p.add_argument("--model", required=True, choices=MODEL_CHOICES)
    p.add_argument("--horizon", required=True, type=int)
    p.add_argument("--features", default="basic+notes", choices=FEATURE_CHOICES)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="run the full model comparison grid")
    common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("discover", help="sensitivity and keyword reports")
    common(p)
    p.add_argument("--horizon", required=True, type=int)
    p.set_defaults(func=cmd_discover)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NotepoolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
