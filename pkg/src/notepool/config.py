"""Run configuration: one JSON file drives the whole pipeline.

Unknown keys are rejected rather than ignored so typos cannot silently fall
back to defaults. The config fingerprint hashes everything except the paths
section and the seed; the run directory name combines both, so the same
experiment re-run elsewhere lands in an identically-named directory with
byte-identical artifacts.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from notepool.baselines import ForestConfig, GbtConfig, LogisticConfig
from notepool.discovery import SignificanceThresholds
from notepool.errors import ConfigError
from notepool.ingest import DEFAULT_HORIZONS, DEFAULT_ICD9_PREFIXES
from notepool.pooled_dnn import TrainConfig
from notepool.synthgen import SynthConfig
from notepool import persist

TABLE_NAMES = ("patients", "admissions", "diagnoses", "icd_dictionary", "noteevents")


def _check_keys(data: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {', '.join(unknown)}")


def _sub(cls, data: Any, where: str):
    """Build a flat dataclass from a dict, strictly."""
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be an object")
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(data, names, where)
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad values in {where}: {exc}") from None


@dataclass
class PathsConfig:
    output_dir: str = "runs"
    tables: dict[str, str] | None = None

    def validate(self) -> None:
        if self.tables is not None:
            unknown = sorted(set(self.tables) - set(TABLE_NAMES))
            if unknown:
                raise ConfigError(f"unknown table names in paths.tables: {unknown}")

    def to_dict(self) -> dict:
        out: dict[str, Any] = {"output_dir": self.output_dir}
        if self.tables is not None:
            out["tables"] = dict(self.tables)
        return out


@dataclass
class CohortConfig:
    icd9_prefixes: list[str] = field(
        default_factory=lambda: list(DEFAULT_ICD9_PREFIXES))

    def validate(self) -> None:
        if not self.icd9_prefixes:
            raise ConfigError("cohort.icd9_prefixes must be non-empty")
        for p in self.icd9_prefixes:
            if not isinstance(p, str) or not p:
                raise ConfigError(f"bad diagnosis prefix {p!r}")


@dataclass
class VocabularyConfig:
    k: int = 400

    def validate(self) -> None:
        if self.k < 1:
            raise ConfigError(f"vocabulary.k must be >= 1, got {self.k}")


@dataclass
class SplitConfig:
    ratios: list[float] = field(default_factory=lambda: [7.0, 1.5, 1.5])

    def validate(self) -> None:
        if len(self.ratios) != 3 or any(r < 0 for r in self.ratios) \
                or sum(self.ratios) <= 0:
            raise ConfigError(f"split.ratios must be three non-negative numbers, "
                              f"got {self.ratios}")


@dataclass
class AnalysisConfig:
    max_eval_instances: int = 500
    top_keywords: int = 20
    thresholds: SignificanceThresholds = field(default_factory=SignificanceThresholds)

    def validate(self) -> None:
        if self.max_eval_instances < 1:
            raise ConfigError("analysis.max_eval_instances must be >= 1")
        if self.top_keywords < 1:
            raise ConfigError("analysis.top_keywords must be >= 1")


@dataclass
class ModelsConfig:
    logistic: LogisticConfig = field(default_factory=LogisticConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    gbt: GbtConfig = field(default_factory=GbtConfig)
    pooled_dnn: TrainConfig = field(default_factory=TrainConfig)

    def validate(self) -> None:
        self.logistic.validate()
        self.forest.validate()
        self.gbt.validate()
        self.pooled_dnn.validate()


@dataclass
class RunConfig:
    seed: int = 0
    horizons: list[int] = field(default_factory=lambda: list(DEFAULT_HORIZONS))
    paths: PathsConfig = field(default_factory=PathsConfig)
    cohort: CohortConfig = field(default_factory=CohortConfig)
    vocabulary: VocabularyConfig = field(default_factory=VocabularyConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    models: ModelsConfig = field(default_factory=ModelsConfig)
    analysis: AnalysisConfig = field(default_factory=AnalysisConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)

    def validate(self) -> None:
        if not self.horizons:
            raise ConfigError("horizons must be non-empty")
        if any(h < 1 for h in self.horizons):
            raise ConfigError("horizons must be positive day counts")
        if len(set(self.horizons)) != len(self.horizons):
            raise ConfigError("horizons must be distinct")
        self.paths.validate()
        self.cohort.validate()
        self.vocabulary.validate()
        self.split.validate()
        self.models.validate()
        self.analysis.validate()
        self.synth.validate()

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "horizons": list(self.horizons),
            "paths": self.paths.to_dict(),
            "cohort": {"icd9_prefixes": list(self.cohort.icd9_prefixes)},
            "vocabulary": {"k": self.vocabulary.k},
            "split": {"ratios": list(self.split.ratios)},
            "models": {
                "logistic": dataclasses.asdict(self.models.logistic),
                "forest": dataclasses.asdict(self.models.forest),
                "gbt": dataclasses.asdict(self.models.gbt),
                "pooled_dnn": dataclasses.asdict(self.models.pooled_dnn),
            },
            "analysis": {
                "max_eval_instances": self.analysis.max_eval_instances,
                "top_keywords": self.analysis.top_keywords,
                "thresholds": dataclasses.asdict(self.analysis.thresholds),
            },
            "synth": self.synth.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("config root must be an object")
        _check_keys(data, {f.name for f in dataclasses.fields(cls)}, "config")
        models_data = data.get("models") or {}
        if not isinstance(models_data, dict):
            raise ConfigError("models must be an object")
        _check_keys(models_data, {"logistic", "forest", "gbt", "pooled_dnn"}, "models")
        analysis_data = dict(data.get("analysis") or {})
        if not isinstance(analysis_data, dict):
            raise ConfigError("analysis must be an object")
        thresholds = _sub(SignificanceThresholds, analysis_data.pop("thresholds", None),
                          "analysis.thresholds")
        analysis = _sub(AnalysisConfig, analysis_data, "analysis")
        analysis.thresholds = thresholds
        synth_data = data.get("synth")
        try:
            synth = SynthConfig.from_dict(synth_data) if synth_data else SynthConfig()
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigError(f"bad values in synth: {exc}") from None
        config = cls(
            seed=int(data.get("seed", 0)),
            horizons=[int(h) for h in data.get("horizons", DEFAULT_HORIZONS)],
            paths=_sub(PathsConfig, data.get("paths"), "paths"),
            cohort=_sub(CohortConfig, data.get("cohort"), "cohort"),
            vocabulary=_sub(VocabularyConfig, data.get("vocabulary"), "vocabulary"),
            split=_sub(SplitConfig, data.get("split"), "split"),
            models=ModelsConfig(
                logistic=_sub(LogisticConfig, models_data.get("logistic"),
                              "models.logistic"),
                forest=_sub(ForestConfig, models_data.get("forest"), "models.forest"),
                gbt=_sub(GbtConfig, models_data.get("gbt"), "models.gbt"),
                pooled_dnn=_sub(TrainConfig, models_data.get("pooled_dnn"),
                                "models.pooled_dnn"),
            ),
            analysis=analysis,
            synth=synth,
        )
        try:
            config.validate()
        except TypeError as exc:
            # a value of the wrong type (e.g. a string where a number belongs)
            # passes dataclass construction and only trips comparisons here
            raise ConfigError(f"bad value type in config: {exc}") from None
        return config

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = persist.read_json(path)
        except ValueError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    def fingerprint(self) -> str:
        """Hash of everything that shapes the outputs, except paths and seed."""
        data = self.to_dict()
        data.pop("paths")
        data.pop("seed")
        return persist.sha256_of_json(data)

    def run_name(self) -> str:
        return f"run-{self.fingerprint()[:12]}-seed{self.seed}"

    def run_dir(self) -> Path:
        return Path(self.paths.output_dir) / self.run_name()
