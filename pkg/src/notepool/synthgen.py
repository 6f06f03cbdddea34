"""Synthetic EHR generator with plantable note-keyword risk signals.

Writes the five input tables for a fake kidney-failure population. Death is
driven only by planted signal tokens: an admission that receives token t
(with configured prevalence) adds t's log-odds to a hazard shift, and
post-discharge survival at horizon h is sigmoid(logit(base_survival[h]) -
shift), sampled once per patient at their last admission. Background text is
Zipf noise, so any model signal beyond demographics must come from the
planted tokens.

The manifest records the config, the exact admission counts the cohort
filters should report, per-horizon label counts, and where each signal token
was injected: ground truth for recovery tests.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path

import numpy as np

from notepool.categories import (
    CANONICAL_CATEGORIES,
    CATEGORY_INDEX,
    N_CATEGORIES,
    REFERENCE_MEAN_TOKENS,
    REFERENCE_NOTE_PROPORTIONS,
)
from notepool.errors import SynthError
from notepool.featurize import tokenize
from notepool.ingest import DEFAULT_HORIZONS, TIMESTAMP_FORMAT, compute_labels
from notepool.numerics import logit, sigmoid
from notepool import persist

KIDNEY_CODES: tuple[str, ...] = ("5845", "5849", "5851", "5853", "5856", "5859", "586")

DECOY_CODES: tuple[str, ...] = ("4019", "25000", "42731", "486", "5070")

ICD_TITLES: dict[str, str] = {
    "5845": "Acute kidney failure with lesion of tubular necrosis",
    "5849": "Acute kidney failure, unspecified",
    "5851": "Chronic kidney disease, stage I",
    "5853": "Chronic kidney disease, stage III (moderate)",
    "5856": "End stage renal disease",
    "5859": "Chronic kidney disease, unspecified",
    "586": "Renal failure, unspecified",
    "4019": "Unspecified essential hypertension",
    "25000": "Diabetes mellitus without mention of complication",
    "42731": "Atrial fibrillation",
    "486": "Pneumonia, organism unspecified",
    "5070": "Pneumonitis due to inhalation of food or vomitus",
}

ADMISSION_TYPES = ("EMERGENCY", "ELECTIVE", "URGENT")
ADMISSION_TYPE_P = (0.7, 0.2, 0.1)
ADMISSION_LOCATIONS = ("EMERGENCY ROOM ADMIT", "PHYS REFERRAL/NORMAL DELI",
                       "TRANSFER FROM HOSP/EXTRAM")
INSURANCES = ("Medicare", "Private", "Medicaid", "Self Pay")
LANGUAGES = ("ENGL", "SPAN", "")  # empty exercises the UNKNOWN path downstream
RELIGIONS = ("CATHOLIC", "PROTESTANT QUAKER", "JEWISH", "NOT SPECIFIED")
MARITALS = ("MARRIED", "SINGLE", "WIDOWED", "DIVORCED")
ALIVE_LOCATIONS = ("HOME", "SNF", "HOME HEALTH CARE", "REHAB/DISTINCT PART HOSP")

PLACEHOLDER = "[**2101-01-01**]"


@dataclass
class SignalTokenSpec:
    """A planted risk keyword.

    Injected into notes of `category` for a `prevalence` fraction of
    admissions; each positive admission adds `log_odds` to the hazard shift
    (positive log_odds means more death).
    """

    token: str
    category: str
    log_odds: float
    prevalence: float

    def validate(self) -> None:
        parts = tokenize(self.token)
        if len(parts) != 1 or parts[0] != self.token:
            raise SynthError(f"signal token must be a single normalized token, "
                             f"got {self.token!r}")
        if self.category not in CATEGORY_INDEX:
            raise SynthError(f"signal category {self.category!r} is not canonical")
        if not np.isfinite(self.log_odds):
            raise SynthError("signal log_odds must be finite")
        if not (0.0 < self.prevalence <= 1.0):
            raise SynthError(f"signal prevalence must be in (0, 1], got {self.prevalence}")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _default_signals() -> list[SignalTokenSpec]:
    return [SignalTokenSpec("hospice", "Nursing/other", 2.5, 0.3)]


def _default_base_survival() -> dict[int, float]:
    return {15: 0.93, 30: 0.88, 60: 0.80, 365: 0.65}


def _default_admissions_mix() -> dict[int, float]:
    return {1: 0.7, 2: 0.2, 3: 0.1}


@dataclass
class SynthConfig:
    n_patients: int = 1500
    seed: int = 0
    admissions_per_patient: dict[int, float] = field(default_factory=_default_admissions_mix)
    mean_notes_per_admission: float = 12.0
    note_length_scale: float = 0.15  # scales the reference mean note lengths
    min_note_tokens: int = 5
    lexicon_size: int = 2000
    zipf_exponent: float = 1.05
    category_proportions: tuple[float, ...] = REFERENCE_NOTE_PROPORTIONS
    category_mean_tokens: tuple[float, ...] = REFERENCE_MEAN_TOKENS
    base_survival: dict[int, float] = field(default_factory=_default_base_survival)
    signal_tokens: list[SignalTokenSpec] = field(default_factory=_default_signals)
    signal_repeat_mean: float = 1.0
    placeholder_rate: float = 0.1
    overage_fraction: float = 0.01
    dead_discharge_fraction: float = 0.02
    decoy_only_fraction: float = 0.1  # patients whose admissions never qualify
    survivor_dod_fraction: float = 0.5

    def validate(self) -> None:
        if self.n_patients < 1:
            raise SynthError(f"n_patients must be >= 1, got {self.n_patients}")
        if not self.admissions_per_patient:
            raise SynthError("admissions_per_patient must be non-empty")
        if any(k < 1 for k in self.admissions_per_patient):
            raise SynthError("admission counts must be >= 1")
        total = sum(self.admissions_per_patient.values())
        if abs(total - 1.0) > 1e-9 or any(v < 0 for v in self.admissions_per_patient.values()):
            raise SynthError("admissions_per_patient must be a probability distribution")
        if self.mean_notes_per_admission <= 0:
            raise SynthError("mean_notes_per_admission must be positive")
        if self.note_length_scale <= 0:
            raise SynthError("note_length_scale must be positive")
        if self.min_note_tokens < 1:
            raise SynthError("min_note_tokens must be >= 1")
        if self.lexicon_size < 10:
            raise SynthError("lexicon_size must be >= 10")
        if self.zipf_exponent <= 0:
            raise SynthError("zipf_exponent must be positive")
        if (len(self.category_proportions) != N_CATEGORIES
                or len(self.category_mean_tokens) != N_CATEGORIES):
            raise SynthError("category mix must cover every canonical category")
        if any(p < 0 for p in self.category_proportions) or sum(self.category_proportions) <= 0:
            raise SynthError("category proportions must be non-negative and sum > 0")
        horizons = sorted(self.base_survival)
        if not horizons:
            raise SynthError("base_survival must cover at least one horizon")
        values = [self.base_survival[h] for h in horizons]
        if any(not (0.0 < v < 1.0) for v in values):
            raise SynthError("base survival probabilities must lie in (0, 1)")
        if any(a <= b for a, b in zip(values, values[1:])):
            raise SynthError("base survival must strictly decrease with the horizon")
        for spec in self.signal_tokens:
            spec.validate()
        for name in ("signal_repeat_mean",):
            if getattr(self, name) < 0:
                raise SynthError(f"{name} must be >= 0")
        for name in ("placeholder_rate", "overage_fraction", "dead_discharge_fraction",
                     "decoy_only_fraction", "survivor_dod_fraction"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise SynthError(f"{name} must lie in [0, 1], got {v}")

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["admissions_per_patient"] = {str(k): v for k, v in
                                          self.admissions_per_patient.items()}
        data["base_survival"] = {str(k): v for k, v in self.base_survival.items()}
        data["signal_tokens"] = [s.to_dict() for s in self.signal_tokens]
        data["category_proportions"] = list(self.category_proportions)
        data["category_mean_tokens"] = list(self.category_mean_tokens)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "SynthConfig":
        kwargs = dict(data)
        if "admissions_per_patient" in kwargs:
            kwargs["admissions_per_patient"] = {int(k): float(v) for k, v in
                                                kwargs["admissions_per_patient"].items()}
        if "base_survival" in kwargs:
            kwargs["base_survival"] = {int(k): float(v) for k, v in
                                       kwargs["base_survival"].items()}
        if "signal_tokens" in kwargs:
            kwargs["signal_tokens"] = [SignalTokenSpec(**s) for s in kwargs["signal_tokens"]]
        if "category_proportions" in kwargs:
            kwargs["category_proportions"] = tuple(kwargs["category_proportions"])
        if "category_mean_tokens" in kwargs:
            kwargs["category_mean_tokens"] = tuple(kwargs["category_mean_tokens"])
        return cls(**kwargs)


@dataclass
class SynthManifest:
    """Ground truth for tests: what the generator actually planted."""

    config: dict
    counts: dict
    label_positives: dict[str, int]
    signal_positives: dict[str, int]
    horizons: list[int]

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "counts": self.counts,
            "label_positives": self.label_positives,
            "signal_positives": self.signal_positives,
            "horizons": self.horizons,
        }


def _ts(dt: datetime) -> str:
    return dt.strftime(TIMESTAMP_FORMAT)


def _zipf_probs(size: int, exponent: float) -> np.ndarray:
    ranks = np.arange(1, size + 1, dtype=np.float64)
    p = ranks ** (-exponent)
    return p / p.sum()


def _note_text(tokens: list[str]) -> str:
    # Break into lines every dozen tokens so the CSVs exercise quoting.
    parts = []
    for i in range(0, len(tokens), 12):
        parts.append(" ".join(tokens[i:i + 12]))
    return "\n".join(parts)


def generate(config: SynthConfig, out_dir: str | Path) -> SynthManifest:
    """Write PATIENTS, ADMISSIONS, DIAGNOSES_ICD, D_ICD_DIAGNOSES, and
    NOTEEVENTS CSVs plus manifest.json under out_dir."""
    config.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.seed)

    horizons = sorted(config.base_survival)
    lexicon = [f"w{i:04d}" for i in range(1, config.lexicon_size + 1)]
    zipf = _zipf_probs(config.lexicon_size, config.zipf_exponent)
    cat_props = np.asarray(config.category_proportions, dtype=np.float64)
    cat_props = cat_props / cat_props.sum()
    mean_tokens = np.asarray(config.category_mean_tokens, dtype=np.float64)
    adm_counts = sorted(config.admissions_per_patient)
    adm_probs = np.asarray([config.admissions_per_patient[k] for k in adm_counts])

    patient_rows: list[tuple] = []
    admission_rows: list[tuple] = []
    diagnosis_rows: list[tuple] = []
    note_rows: list[tuple] = []

    # Exact counts the cohort filters should reproduce, in filter order.
    counts = {
        "admissions_total": 0,
        "with_matching_diagnosis": 0,
        "with_patient_record": 0,
        "age_at_most_120": 0,
        "discharged_alive": 0,
        "labels_consistent": 0,
        "cohort_patients": 0,
    }
    label_pos = {h: 0 for h in horizons}
    signal_pos = {spec.token: 0 for spec in config.signal_tokens}

    epoch = datetime(2100, 1, 1)
    next_hadm = 100000

    def draw_note(cat_idx: int) -> list[str]:
        mean_len = max(config.min_note_tokens,
                       mean_tokens[cat_idx] * config.note_length_scale)
        length = max(config.min_note_tokens, int(rng.poisson(mean_len)))
        picks = rng.choice(config.lexicon_size, size=length, p=zipf)
        return [lexicon[i] for i in picks]

    for pid in range(config.n_patients):
        subject_id = 10000 + pid
        n_adm = int(rng.choice(adm_counts, p=adm_probs))
        decoy_only = rng.random() < config.decoy_only_fraction
        overage = rng.random() < config.overage_fraction
        dead_discharge = rng.random() < config.dead_discharge_fraction
        gender = "M" if rng.random() < 0.5 else "F"
        age0 = rng.uniform(125.0, 290.0) if overage else rng.uniform(25.0, 90.0)

        first_admit = epoch + timedelta(days=float(rng.uniform(0, 36500)),
                                        hours=float(rng.integers(0, 24)),
                                        minutes=float(rng.integers(0, 60)))
        dob = first_admit - timedelta(days=age0 * 365.25)

        admissions = []
        admit = first_admit
        for a in range(n_adm):
            los = timedelta(days=float(rng.uniform(2, 20)))
            disch = admit + los
            admissions.append((admit, disch))
            admit = disch + timedelta(days=float(rng.uniform(30, 400)))

        hazard_shift = 0.0
        per_adm_signals: list[set[str]] = []
        for a, (admit_t, disch_t) in enumerate(admissions):
            hadm_id = next_hadm
            next_hadm += 1
            is_last = a == n_adm - 1
            dead_here = dead_discharge and is_last

            codes = [str(rng.choice(DECOY_CODES))] if rng.random() < 0.6 else []
            if not decoy_only:
                codes.insert(0, str(rng.choice(KIDNEY_CODES)))
            if not codes:
                codes = [str(rng.choice(DECOY_CODES))]
            for code in codes:
                diagnosis_rows.append((subject_id, hadm_id, code))

            n_notes = max(1, int(rng.poisson(config.mean_notes_per_admission)))
            cat_ids = rng.choice(N_CATEGORIES, size=n_notes, p=cat_props)
            notes = [(int(c), draw_note(int(c))) for c in cat_ids]

            present: set[str] = set()
            for spec in config.signal_tokens:
                if rng.random() >= spec.prevalence:
                    continue
                present.add(spec.token)
                occurrences = 1 + int(rng.poisson(config.signal_repeat_mean))
                target_cat = CATEGORY_INDEX[spec.category]
                slots = [k for k, (c, _) in enumerate(notes) if c == target_cat]
                if slots:
                    k = int(slots[rng.integers(0, len(slots))])
                else:
                    notes.append((target_cat, draw_note(target_cat)))
                    k = len(notes) - 1
                toks = notes[k][1]
                for _ in range(occurrences):
                    toks.insert(int(rng.integers(0, len(toks) + 1)), spec.token)
            per_adm_signals.append(present)
            if is_last:
                hazard_shift = sum(spec.log_odds for spec in config.signal_tokens
                                   if spec.token in present)

            for cat_idx, toks in notes:
                if rng.random() < config.placeholder_rate:
                    toks = list(toks)
                    toks.insert(int(rng.integers(0, len(toks) + 1)), PLACEHOLDER)
                note_rows.append((subject_id, hadm_id,
                                  CANONICAL_CATEGORIES[cat_idx], _note_text(toks)))

            admission_rows.append((
                subject_id, hadm_id, _ts(admit_t), _ts(disch_t),
                str(rng.choice(ADMISSION_TYPES, p=ADMISSION_TYPE_P)),
                str(rng.choice(ADMISSION_LOCATIONS)),
                "DEAD/EXPIRED" if dead_here else str(rng.choice(ALIVE_LOCATIONS)),
                str(rng.choice(INSURANCES)),
                str(rng.choice(LANGUAGES)),
                str(rng.choice(RELIGIONS)),
                str(rng.choice(MARITALS)),
            ))

        last_disch = admissions[-1][1]
        if dead_discharge:
            dod = last_disch
        else:
            u = rng.random()
            death_day = None
            prev_h = 0
            for h in horizons:
                s_h = sigmoid(np.array(logit(config.base_survival[h]) - hazard_shift))
                if u >= float(s_h):
                    low = prev_h + 1 if prev_h else 0
                    death_day = int(rng.integers(low, h + 1))
                    break
                prev_h = h
            if death_day is not None:
                dod = last_disch + timedelta(days=death_day)
            elif rng.random() < config.survivor_dod_fraction:
                dod = last_disch + timedelta(days=int(rng.integers(400, 2001)))
            else:
                dod = None

        patient_rows.append((subject_id, gender, _ts(dob), _ts(dod) if dod else ""))

        # Mirror the cohort filters on what was just written.
        cohort_member = False
        for a, (admit_t, disch_t) in enumerate(admissions):
            counts["admissions_total"] += 1
            if decoy_only:
                continue
            counts["with_matching_diagnosis"] += 1
            counts["with_patient_record"] += 1
            if overage:
                continue
            counts["age_at_most_120"] += 1
            if dead_discharge and a == n_adm - 1:
                continue
            counts["discharged_alive"] += 1
            counts["labels_consistent"] += 1
            cohort_member = True
            labels = compute_labels(disch_t, dod, horizons)
            for h in horizons:
                label_pos[h] += labels[h]
            for spec in config.signal_tokens:
                if spec.token in per_adm_signals[a]:
                    signal_pos[spec.token] += 1
        if cohort_member:
            counts["cohort_patients"] += 1

    persist.write_csv(out / "PATIENTS.csv",
                      ["SUBJECT_ID", "GENDER", "DOB", "DOD"], patient_rows)
    persist.write_csv(out / "ADMISSIONS.csv",
                      ["SUBJECT_ID", "HADM_ID", "ADMITTIME", "DISCHTIME",
                       "ADMISSION_TYPE", "ADMISSION_LOCATION", "DISCHARGE_LOCATION",
                       "INSURANCE", "LANGUAGE", "RELIGION", "MARITAL_STATUS"],
                      admission_rows)
    persist.write_csv(out / "DIAGNOSES_ICD.csv",
                      ["SUBJECT_ID", "HADM_ID", "ICD9_CODE"], diagnosis_rows)
    persist.write_csv(out / "D_ICD_DIAGNOSES.csv", ["ICD9_CODE", "LONG_TITLE"],
                      [(c, ICD_TITLES[c]) for c in KIDNEY_CODES + DECOY_CODES])
    persist.write_csv(out / "NOTEEVENTS.csv",
                      ["SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT"], note_rows)

    manifest = SynthManifest(
        config=config.to_dict(),
        counts=counts,
        label_positives={str(h): label_pos[h] for h in horizons},
        signal_positives=signal_pos,
        horizons=horizons,
    )
    persist.write_json(out / "manifest.json", manifest.to_dict())
    return manifest


def table_paths(synth_dir: str | Path) -> dict[str, Path]:
    """Map table names to the files generate() writes."""
    out = Path(synth_dir)
    return {
        "patients": out / "PATIENTS.csv",
        "admissions": out / "ADMISSIONS.csv",
        "diagnoses": out / "DIAGNOSES_ICD.csv",
        "icd_dictionary": out / "D_ICD_DIAGNOSES.csv",
        "noteevents": out / "NOTEEVENTS.csv",
    }
