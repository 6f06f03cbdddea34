"""EHR table ingest and cohort construction.

Reads the five standard tables (patients, admissions, diagnoses, the ICD
dictionary, note events) from CSV, applies row-level integrity checks, and
builds the study cohort: admissions carrying a qualifying diagnosis, with a
known patient, plausible age, discharged alive, and consistent timestamps.
Each kept admission becomes one modeling instance with per-horizon survival
labels and its notes tokenized per canonical category.

Malformed rows are skipped with a counted warning; structural problems
(missing files, missing columns) are fatal.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from notepool.categories import CANONICAL_CATEGORIES, canonical_category
from notepool.errors import IngestError
from notepool.featurize import BASIC_CATEGORICAL_FIELDS, UNKNOWN_LEVEL, tokenize

TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

DEFAULT_HORIZONS: tuple[int, ...] = (15, 30, 60, 365)

DEFAULT_ICD9_PREFIXES: tuple[str, ...] = ("584", "585", "586")

DAYS_PER_YEAR = 365.25

MAX_PLAUSIBLE_AGE = 120.0

DEAD_EXPIRED = "DEAD/EXPIRED"

REQUIRED_COLUMNS: dict[str, tuple[str, ...]] = {
    "patients": ("SUBJECT_ID", "GENDER", "DOB", "DOD"),
    "admissions": (
        "SUBJECT_ID",
        "HADM_ID",
        "ADMITTIME",
        "DISCHTIME",
        "ADMISSION_TYPE",
        "ADMISSION_LOCATION",
        "DISCHARGE_LOCATION",
        "INSURANCE",
        "LANGUAGE",
        "RELIGION",
        "MARITAL_STATUS",
    ),
    "diagnoses": ("SUBJECT_ID", "HADM_ID", "ICD9_CODE"),
    "icd_dictionary": ("ICD9_CODE", "LONG_TITLE"),
    "noteevents": ("SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT"),
}


@dataclass
class PatientRow:
    subject_id: int
    gender: str
    dob: datetime
    dod: datetime | None


@dataclass
class AdmissionRow:
    subject_id: int
    hadm_id: int
    admittime: datetime
    dischtime: datetime
    discharge_location: str
    basic: dict[str, str]


@dataclass
class NoteRow:
    subject_id: int
    hadm_id: int
    category: str | None
    raw_category: str
    text: str


@dataclass
class ParseReport:
    """Row-level accounting from load_tables."""

    rows_read: Counter = field(default_factory=Counter)
    rows_kept: Counter = field(default_factory=Counter)
    warnings: Counter = field(default_factory=Counter)
    samples: list[str] = field(default_factory=list)
    unmatched_note_categories: Counter = field(default_factory=Counter)

    def warn(self, table: str, reason: str, detail: str) -> None:
        self.warnings[f"{table}:{reason}"] += 1
        if len(self.samples) < 20:
            self.samples.append(f"{table}: {reason}: {detail}")

    def to_dict(self) -> dict:
        return {
            "rows_read": dict(self.rows_read),
            "rows_kept": dict(self.rows_kept),
            "warnings": dict(self.warnings),
            "sample_messages": list(self.samples),
            "unmatched_note_categories": dict(self.unmatched_note_categories),
        }


@dataclass
class RawTables:
    patients: dict[int, PatientRow]
    admissions: list[AdmissionRow]
    diagnoses_by_hadm: dict[int, list[str]]
    icd_titles: dict[str, str]
    notes_by_hadm: dict[int, list[NoteRow]]
    report: ParseReport


def _parse_timestamp(cell: str) -> datetime | None:
    cell = cell.strip()
    if not cell:
        return None
    return datetime.strptime(cell, TIMESTAMP_FORMAT)


def _iter_rows(path: Path, table: str):
    """Yield dict rows; raise IngestError if the file or columns are missing."""
    if not path.exists():
        raise IngestError(f"{table} table not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{table} table is empty: {path}") from None
        missing = [c for c in REQUIRED_COLUMNS[table] if c not in header]
        if missing:
            raise IngestError(f"{table} table missing columns {missing}: {path}")
        col = {name: header.index(name) for name in REQUIRED_COLUMNS[table]}
        width = len(header)
        for row in reader:
            if len(row) != width:
                yield None, row
                continue
            yield {name: row[i] for name, i in col.items()}, row


def load_tables(paths: Mapping[str, str | Path]) -> RawTables:
    """Load and validate the input tables.

    `paths` maps table names (patients, admissions, diagnoses, noteevents,
    and optionally icd_dictionary) to CSV files. Row-level problems are
    counted in the report; file-level problems raise IngestError.
    """
    for required in ("patients", "admissions", "diagnoses", "noteevents"):
        if required not in paths:
            raise IngestError(f"no path given for required table {required!r}")

    report = ParseReport()

    patients: dict[int, PatientRow] = {}
    for rec, raw in _iter_rows(Path(paths["patients"]), "patients"):
        report.rows_read["patients"] += 1
        if rec is None:
            report.warn("patients", "ragged_row", str(raw[:3]))
            continue
        try:
            sid = int(rec["SUBJECT_ID"])
            dob = _parse_timestamp(rec["DOB"])
            dod = _parse_timestamp(rec["DOD"])
        except ValueError as exc:
            report.warn("patients", "unparseable", f"{rec.get('SUBJECT_ID')}: {exc}")
            continue
        if dob is None:
            report.warn("patients", "missing_dob", rec["SUBJECT_ID"])
            continue
        if sid in patients:
            report.warn("patients", "duplicate_subject", rec["SUBJECT_ID"])
            continue
        if dod is not None and dod < dob:
            report.warn("patients", "dod_before_dob", rec["SUBJECT_ID"])
            continue
        patients[sid] = PatientRow(sid, rec["GENDER"].strip() or UNKNOWN_LEVEL, dob, dod)
        report.rows_kept["patients"] += 1

    admissions: list[AdmissionRow] = []
    seen_hadm: set[int] = set()
    for rec, raw in _iter_rows(Path(paths["admissions"]), "admissions"):
        report.rows_read["admissions"] += 1
        if rec is None:
            report.warn("admissions", "ragged_row", str(raw[:3]))
            continue
        try:
            sid = int(rec["SUBJECT_ID"])
            hadm = int(rec["HADM_ID"])
            admit = _parse_timestamp(rec["ADMITTIME"])
            disch = _parse_timestamp(rec["DISCHTIME"])
        except ValueError as exc:
            report.warn("admissions", "unparseable", f"{rec.get('HADM_ID')}: {exc}")
            continue
        if admit is None or disch is None:
            report.warn("admissions", "missing_timestamp", rec["HADM_ID"])
            continue
        if disch < admit:
            report.warn("admissions", "discharge_before_admission", rec["HADM_ID"])
            continue
        if hadm in seen_hadm:
            report.warn("admissions", "duplicate_hadm", rec["HADM_ID"])
            continue
        seen_hadm.add(hadm)
        basic = {}
        for fld in BASIC_CATEGORICAL_FIELDS:
            if fld == "GENDER":
                continue  # gender lives on the patient row
            basic[fld] = rec[fld].strip() or UNKNOWN_LEVEL
        admissions.append(AdmissionRow(
            subject_id=sid,
            hadm_id=hadm,
            admittime=admit,
            dischtime=disch,
            discharge_location=rec["DISCHARGE_LOCATION"].strip(),
            basic=basic,
        ))
        report.rows_kept["admissions"] += 1

    diagnoses_by_hadm: dict[int, list[str]] = {}
    for rec, raw in _iter_rows(Path(paths["diagnoses"]), "diagnoses"):
        report.rows_read["diagnoses"] += 1
        if rec is None:
            report.warn("diagnoses", "ragged_row", str(raw[:3]))
            continue
        try:
            hadm = int(rec["HADM_ID"])
        except ValueError:
            report.warn("diagnoses", "unparseable", str(raw[:3]))
            continue
        code = rec["ICD9_CODE"].strip().strip('"')
        if not code:
            report.warn("diagnoses", "empty_code", rec["HADM_ID"])
            continue
        diagnoses_by_hadm.setdefault(hadm, []).append(code)
        report.rows_kept["diagnoses"] += 1

    icd_titles: dict[str, str] = {}
    if "icd_dictionary" in paths:
        for rec, raw in _iter_rows(Path(paths["icd_dictionary"]), "icd_dictionary"):
            report.rows_read["icd_dictionary"] += 1
            if rec is None:
                report.warn("icd_dictionary", "ragged_row", str(raw[:2]))
                continue
            code = rec["ICD9_CODE"].strip().strip('"')
            if code and code not in icd_titles:
                icd_titles[code] = rec["LONG_TITLE"].strip()
                report.rows_kept["icd_dictionary"] += 1

    notes_by_hadm: dict[int, list[NoteRow]] = {}
    for rec, raw in _iter_rows(Path(paths["noteevents"]), "noteevents"):
        report.rows_read["noteevents"] += 1
        if rec is None:
            report.warn("noteevents", "ragged_row", str(raw[:3]))
            continue
        hadm_cell = rec["HADM_ID"].strip()
        if not hadm_cell:
            report.warn("noteevents", "missing_hadm", rec["SUBJECT_ID"])
            continue
        try:
            sid = int(rec["SUBJECT_ID"])
            hadm = int(float(hadm_cell))
        except ValueError:
            report.warn("noteevents", "unparseable", hadm_cell)
            continue
        cat = canonical_category(rec["CATEGORY"])
        if cat is None:
            report.unmatched_note_categories[rec["CATEGORY"].strip()] += 1
        note = NoteRow(sid, hadm, cat, rec["CATEGORY"], rec["TEXT"])
        notes_by_hadm.setdefault(hadm, []).append(note)
        report.rows_kept["noteevents"] += 1

    return RawTables(patients, admissions, diagnoses_by_hadm, icd_titles,
                     notes_by_hadm, report)


def admit_age(admittime: datetime, dob: datetime) -> float:
    """Age in years at admission: days between dob and admittime / 365.25."""
    if admittime < dob:
        raise IngestError("admission precedes date of birth")
    delta = admittime - dob
    return (delta.days + delta.seconds / 86400.0) / DAYS_PER_YEAR


def compute_labels(dischtime: datetime, dod: datetime | None,
                   horizons: Sequence[int] = DEFAULT_HORIZONS) -> dict[int, int]:
    """Per-horizon survival labels.

    label(h) = 1 iff the patient has no recorded death or died strictly more
    than h days after discharge. Death before discharge is a data-integrity
    error.
    """
    if dod is not None and dod < dischtime:
        raise IngestError("date of death precedes discharge")
    labels: dict[int, int] = {}
    for h in horizons:
        if dod is None:
            labels[h] = 1
        else:
            labels[h] = 1 if (dod - dischtime) > timedelta(days=h) else 0
    return labels


@dataclass
class CohortInstance:
    """One admission prepared for modeling."""

    hadm_id: int
    subject_id: int
    admit_age: float
    basic: dict[str, str]
    labels: dict[int, int]
    tokens_by_category: dict[str, list[str]]

    def to_dict(self) -> dict:
        return {
            "hadm_id": self.hadm_id,
            "subject_id": self.subject_id,
            "admit_age": self.admit_age,
            "basic": dict(self.basic),
            "labels": {str(h): v for h, v in self.labels.items()},
            "tokens_by_category": {c: list(t) for c, t in self.tokens_by_category.items() if t},
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CohortInstance":
        tokens = {c: [] for c in CANONICAL_CATEGORIES}
        for c, t in data["tokens_by_category"].items():
            tokens[c] = list(t)
        return cls(
            hadm_id=int(data["hadm_id"]),
            subject_id=int(data["subject_id"]),
            admit_age=float(data["admit_age"]),
            basic=dict(data["basic"]),
            labels={int(h): int(v) for h, v in data["labels"].items()},
            tokens_by_category=tokens,
        )


@dataclass
class CohortSummary:
    """Admission counts after each cohort filter, in application order."""

    admissions_total: int
    with_matching_diagnosis: int
    with_patient_record: int
    age_at_most_120: int
    discharged_alive: int
    labels_consistent: int
    unique_patients: int
    dropped: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "admissions_total": self.admissions_total,
            "with_matching_diagnosis": self.with_matching_diagnosis,
            "with_patient_record": self.with_patient_record,
            "age_at_most_120": self.age_at_most_120,
            "discharged_alive": self.discharged_alive,
            "labels_consistent": self.labels_consistent,
            "unique_patients": self.unique_patients,
            "dropped": dict(self.dropped),
        }


@dataclass
class CohortResult:
    instances: list[CohortInstance]
    summary: CohortSummary


def matches_prefix(code: str, prefixes: Sequence[str]) -> bool:
    return any(code.startswith(p) for p in prefixes)


def build_cohort(raw: RawTables,
                 icd9_prefixes: Sequence[str] = DEFAULT_ICD9_PREFIXES,
                 horizons: Sequence[int] = DEFAULT_HORIZONS) -> CohortResult:
    """Filter admissions into the study cohort and label them.

    Filters, in order: qualifying diagnosis prefix, patient record present,
    admission age <= 120 years, not discharged dead, death-vs-discharge
    timestamps consistent. Admissions failing a check are dropped (counted);
    an empty final cohort is an error.
    """
    if not icd9_prefixes:
        raise IngestError("at least one diagnosis prefix is required")

    total = len(raw.admissions)
    dropped: dict[str, int] = {
        "no_matching_diagnosis": 0,
        "missing_patient_record": 0,
        "age_over_120": 0,
        "admitted_before_birth": 0,
        "discharged_dead": 0,
        "death_before_discharge": 0,
    }

    stage_diag: list[AdmissionRow] = []
    for adm in raw.admissions:
        codes = raw.diagnoses_by_hadm.get(adm.hadm_id, [])
        if any(matches_prefix(c, icd9_prefixes) for c in codes):
            stage_diag.append(adm)
        else:
            dropped["no_matching_diagnosis"] += 1

    stage_patient: list[AdmissionRow] = []
    for adm in stage_diag:
        if adm.subject_id in raw.patients:
            stage_patient.append(adm)
        else:
            dropped["missing_patient_record"] += 1

    stage_age: list[tuple[AdmissionRow, float]] = []
    for adm in stage_patient:
        patient = raw.patients[adm.subject_id]
        try:
            age = admit_age(adm.admittime, patient.dob)
        except IngestError:
            dropped["admitted_before_birth"] += 1
            continue
        if age <= MAX_PLAUSIBLE_AGE:
            stage_age.append((adm, age))
        else:
            dropped["age_over_120"] += 1

    stage_alive: list[tuple[AdmissionRow, float]] = []
    for adm, age in stage_age:
        if adm.discharge_location.upper() == DEAD_EXPIRED:
            dropped["discharged_dead"] += 1
        else:
            stage_alive.append((adm, age))

    instances: list[CohortInstance] = []
    for adm, age in stage_alive:
        patient = raw.patients[adm.subject_id]
        try:
            labels = compute_labels(adm.dischtime, patient.dod, horizons)
        except IngestError:
            dropped["death_before_discharge"] += 1
            continue
        tokens: dict[str, list[str]] = {c: [] for c in CANONICAL_CATEGORIES}
        for note in raw.notes_by_hadm.get(adm.hadm_id, []):
            if note.category is not None:
                tokens[note.category].extend(tokenize(note.text))
        basic = dict(adm.basic)
        basic["GENDER"] = patient.gender
        instances.append(CohortInstance(
            hadm_id=adm.hadm_id,
            subject_id=adm.subject_id,
            admit_age=age,
            basic=basic,
            labels=labels,
            tokens_by_category=tokens,
        ))

    if not instances:
        raise IngestError("cohort is empty after filtering; check diagnosis prefixes and tables")

    summary = CohortSummary(
        admissions_total=total,
        with_matching_diagnosis=len(stage_diag),
        with_patient_record=len(stage_patient),
        age_at_most_120=len(stage_age),
        discharged_alive=len(stage_alive),
        labels_consistent=len(instances),
        unique_patients=len({inst.subject_id for inst in instances}),
        dropped=dropped,
    )
    return CohortResult(instances=instances, summary=summary)


def save_cohort(path: str | Path, result: CohortResult, horizons: Sequence[int]) -> None:
    from notepool import persist

    persist.write_json(path, {
        "horizons": list(horizons),
        "summary": result.summary.to_dict(),
        "instances": [inst.to_dict() for inst in result.instances],
    })


def load_cohort(path: str | Path) -> tuple[list[CohortInstance], list[int], dict]:
    from notepool import persist

    data = persist.read_json(path)
    instances = [CohortInstance.from_dict(d) for d in data["instances"]]
    return instances, [int(h) for h in data["horizons"]], data["summary"]
