"""Shared builders for the test suite."""

from __future__ import annotations

from datetime import datetime, timedelta

import numpy as np
import pytest

from notepool.categories import CANONICAL_CATEGORIES
from notepool.ingest import CohortInstance, DEFAULT_HORIZONS


def make_instance(hadm_id: int, subject_id: int, *, age: float = 60.0,
                  labels: dict[int, int] | None = None,
                  tokens: dict[str, list[str]] | None = None,
                  basic: dict[str, str] | None = None) -> CohortInstance:
    base_basic = {
        "ADMISSION_TYPE": "EMERGENCY",
        "ADMISSION_LOCATION": "EMERGENCY ROOM ADMIT",
        "INSURANCE": "Medicare",
        "LANGUAGE": "ENGL",
        "RELIGION": "CATHOLIC",
        "MARITAL_STATUS": "MARRIED",
        "GENDER": "F",
    }
    if basic:
        base_basic.update(basic)
    all_tokens = {c: [] for c in CANONICAL_CATEGORIES}
    if tokens:
        for cat, toks in tokens.items():
            all_tokens[cat] = list(toks)
    return CohortInstance(
        hadm_id=hadm_id,
        subject_id=subject_id,
        admit_age=age,
        basic=base_basic,
        labels=labels or {h: 1 for h in DEFAULT_HORIZONS},
        tokens_by_category=all_tokens,
    )


def random_cohort(rng: np.random.Generator, n: int, *,
                  singleton_patients: bool = True,
                  horizons=DEFAULT_HORIZONS) -> list[CohortInstance]:
    """Random labeled instances; labels are horizon-consistent by design."""
    instances = []
    subject = 0
    hadm = 0
    while len(instances) < n:
        subject += 1
        group = 1 if singleton_patients else int(rng.integers(1, 4))
        group = min(group, n - len(instances))
        for _ in range(group):
            hadm += 1
            death_day = None if rng.random() < 0.6 else int(rng.integers(0, 500))
            labels = {h: 1 if death_day is None or death_day > h else 0
                      for h in horizons}
            words = [f"tok{rng.integers(0, 40):02d}" for _ in range(20)]
            instances.append(make_instance(
                hadm, subject, age=float(rng.uniform(30, 90)), labels=labels,
                tokens={"Nursing": words[:12], "Radiology": words[12:]}))
    return instances


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


def write_table(path, header: list[str], rows: list[tuple]) -> None:
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


TS = "%Y-%m-%d %H:%M:%S"


def ts(year=2100, month=1, day=1, hour=0, minute=0, second=0) -> str:
    return datetime(year, month, day, hour, minute, second).strftime(TS)


def days_after(start: str, days: float) -> str:
    return (datetime.strptime(start, TS) + timedelta(days=days)).strftime(TS)


def standard_tables(tmp_path, *, patients=None, admissions=None,
                    diagnoses=None, notes=None, icd=None) -> dict[str, str]:
    """Write a minimal five-table set and return the path mapping.

    Defaults give two patients, one qualifying admission each. Callers
    override individual tables to probe edge cases.
    """
    if patients is None:
        patients = [
            (1, "F", ts(2040), ""),
            (2, "M", ts(2035), days_after(ts(2100, 6, 1), 100.0)),
        ]
    if admissions is None:
        admissions = [
            (1, 10, ts(2100, 1, 1, 8), ts(2100, 1, 11, 8), "EMERGENCY",
             "EMERGENCY ROOM ADMIT", "HOME", "Medicare", "ENGL", "CATHOLIC",
             "MARRIED"),
            (2, 20, ts(2100, 5, 1), ts(2100, 6, 1), "ELECTIVE",
             "PHYS REFERRAL/NORMAL DELI", "SNF", "Private", "", "NOT SPECIFIED",
             "SINGLE"),
        ]
    if diagnoses is None:
        diagnoses = [(1, 10, "5849"), (2, 20, "58510"), (2, 20, "4019")]
    if notes is None:
        notes = [
            (1, 10, "Nursing", "Pt resting comfortably, [**Name 12**] notified."),
            (1, 10, "Radiology", "CHEST X-RAY: no acute process."),
            (2, 20, "Discharge summary", "Discharged home in stable condition."),
            (2, 20, "WeirdCategory", "should not match any canonical name"),
        ]
    if icd is None:
        icd = [("5849", "Acute kidney failure, unspecified"),
               ("58510", "made-up code"), ("4019", "Hypertension NOS")]

    paths = {
        "patients": tmp_path / "PATIENTS.csv",
        "admissions": tmp_path / "ADMISSIONS.csv",
        "diagnoses": tmp_path / "DIAGNOSES_ICD.csv",
        "icd_dictionary": tmp_path / "D_ICD_DIAGNOSES.csv",
        "noteevents": tmp_path / "NOTEEVENTS.csv",
    }
    write_table(paths["patients"], ["SUBJECT_ID", "GENDER", "DOB", "DOD"], patients)
    write_table(paths["admissions"],
                ["SUBJECT_ID", "HADM_ID", "ADMITTIME", "DISCHTIME",
                 "ADMISSION_TYPE", "ADMISSION_LOCATION", "DISCHARGE_LOCATION",
                 "INSURANCE", "LANGUAGE", "RELIGION", "MARITAL_STATUS"],
                admissions)
    write_table(paths["diagnoses"], ["SUBJECT_ID", "HADM_ID", "ICD9_CODE"], diagnoses)
    write_table(paths["icd_dictionary"], ["ICD9_CODE", "LONG_TITLE"], icd)
    write_table(paths["noteevents"], ["SUBJECT_ID", "HADM_ID", "CATEGORY", "TEXT"],
                notes)
    return {k: str(v) for k, v in paths.items()}
