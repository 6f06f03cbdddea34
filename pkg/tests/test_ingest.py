from datetime import datetime, timedelta

import pytest
from hypothesis import given, strategies as st

from notepool.errors import IngestError
from notepool.ingest import (
    DEFAULT_HORIZONS,
    CohortInstance,
    admit_age,
    build_cohort,
    compute_labels,
    load_cohort,
    load_tables,
    matches_prefix,
    save_cohort,
)
from conftest import days_after, standard_tables, ts, write_table


class TestComputeLabels:
    def test_no_death_is_survivor_everywhere(self):
        disch = datetime(2100, 1, 1)
        assert compute_labels(disch, None) == {h: 1 for h in DEFAULT_HORIZONS}

    def test_boundary_is_strict(self):
        # Death exactly h days out means death within the window.
        disch = datetime(2100, 1, 1, 12, 0, 0)
        dod = disch + timedelta(days=30)
        labels = compute_labels(disch, dod)
        assert labels[15] == 1
        assert labels[30] == 0
        assert labels[60] == 0
        one_second_past = disch + timedelta(days=30, seconds=1)
        assert compute_labels(disch, one_second_past)[30] == 1

    def test_death_before_discharge_raises(self):
        disch = datetime(2100, 1, 1)
        with pytest.raises(IngestError, match="precedes discharge"):
            compute_labels(disch, disch - timedelta(seconds=1))

    def test_death_at_discharge_fails_every_horizon(self):
        disch = datetime(2100, 1, 1)
        assert compute_labels(disch, disch) == {h: 0 for h in DEFAULT_HORIZONS}

    @given(st.integers(min_value=0, max_value=800),
           st.integers(min_value=0, max_value=86399))
    def test_labels_non_increasing_in_horizon(self, days, seconds):
        disch = datetime(2100, 1, 1)
        labels = compute_labels(disch, disch + timedelta(days=days, seconds=seconds))
        ordered = [labels[h] for h in sorted(DEFAULT_HORIZONS)]
        assert all(a >= b for a, b in zip(ordered, ordered[1:]))


class TestAdmitAge:
    def test_exact_year_arithmetic(self):
        dob = datetime(2040, 1, 1)
        admit = datetime(2100, 1, 1)
        days = (admit - dob).days
        assert admit_age(admit, dob) == days / 365.25

    def test_partial_day_counts(self):
        dob = datetime(2040, 1, 1)
        admit = datetime(2040, 1, 1, 12)
        assert admit_age(admit, dob) == 0.5 / 365.25

    def test_admission_before_birth_raises(self):
        with pytest.raises(IngestError):
            admit_age(datetime(2039, 12, 31), datetime(2040, 1, 1))


class TestMatchesPrefix:
    def test_prefix_semantics(self):
        assert matches_prefix("5849", ("584", "585", "586"))
        assert matches_prefix("586", ("584", "585", "586"))
        assert not matches_prefix("58", ("584",))
        assert not matches_prefix("4019", ("584", "585", "586"))


class TestLoadTables:
    def test_standard_fixture_loads_cleanly(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        assert set(raw.patients) == {1, 2}
        assert [a.hadm_id for a in raw.admissions] == [10, 20]
        assert raw.diagnoses_by_hadm == {10: ["5849"], 20: ["58510", "4019"]}
        assert raw.icd_titles["5849"] == "Acute kidney failure, unspecified"
        assert raw.report.rows_kept["noteevents"] == 4

    def test_missing_file_raises(self, tmp_path):
        paths = standard_tables(tmp_path)
        paths["patients"] = str(tmp_path / "nope.csv")
        with pytest.raises(IngestError, match="not found"):
            load_tables(paths)

    def test_missing_column_raises(self, tmp_path):
        paths = standard_tables(tmp_path)
        write_table(tmp_path / "PATIENTS.csv", ["SUBJECT_ID", "GENDER", "DOB"],
                    [(1, "F", ts(2040))])
        with pytest.raises(IngestError, match="missing columns"):
            load_tables(paths)

    def test_missing_required_path_raises(self, tmp_path):
        paths = standard_tables(tmp_path)
        del paths["noteevents"]
        with pytest.raises(IngestError, match="noteevents"):
            load_tables(paths)

    def test_icd_dictionary_is_optional(self, tmp_path):
        paths = standard_tables(tmp_path)
        del paths["icd_dictionary"]
        raw = load_tables(paths)
        assert raw.icd_titles == {}

    def test_ragged_row_warned_and_skipped(self, tmp_path):
        paths = standard_tables(tmp_path)
        with open(paths["patients"], "a", encoding="utf-8") as fh:
            fh.write("3,F\n")
        raw = load_tables(paths)
        assert 3 not in raw.patients
        assert raw.report.warnings["patients:ragged_row"] == 1

    def test_duplicate_subject_keeps_first(self, tmp_path):
        paths = standard_tables(
            tmp_path,
            patients=[(1, "F", ts(2040), ""), (1, "M", ts(2041), "")])
        raw = load_tables(paths)
        assert raw.patients[1].gender == "F"
        assert raw.report.warnings["patients:duplicate_subject"] == 1

    def test_dod_before_dob_dropped(self, tmp_path):
        paths = standard_tables(
            tmp_path, patients=[(1, "F", ts(2040), ts(2039)), (2, "M", ts(2035), "")])
        raw = load_tables(paths)
        assert 1 not in raw.patients
        assert raw.report.warnings["patients:dod_before_dob"] == 1

    def test_discharge_before_admission_dropped(self, tmp_path):
        paths = standard_tables(tmp_path, admissions=[
            (1, 10, ts(2100, 2, 1), ts(2100, 1, 1), "EMERGENCY",
             "EMERGENCY ROOM ADMIT", "HOME", "Medicare", "ENGL", "CATHOLIC",
             "MARRIED"),
        ])
        raw = load_tables(paths)
        assert raw.admissions == []
        assert raw.report.warnings["admissions:discharge_before_admission"] == 1

    def test_duplicate_hadm_keeps_first(self, tmp_path):
        adm = (1, 10, ts(2100, 1, 1), ts(2100, 1, 2), "EMERGENCY",
               "EMERGENCY ROOM ADMIT", "HOME", "Medicare", "ENGL", "CATHOLIC",
               "MARRIED")
        paths = standard_tables(tmp_path, admissions=[adm, adm])
        raw = load_tables(paths)
        assert len(raw.admissions) == 1
        assert raw.report.warnings["admissions:duplicate_hadm"] == 1

    def test_empty_categoricals_become_unknown(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        second = raw.admissions[1]
        assert second.basic["LANGUAGE"] == "UNKNOWN"
        assert second.basic["RELIGION"] == "NOT SPECIFIED"
        assert "GENDER" not in second.basic  # taken from the patient later

    def test_note_hadm_parsed_from_float_text(self, tmp_path):
        paths = standard_tables(tmp_path, notes=[
            (1, "10.0", "Nursing", "stable overnight"),
        ])
        raw = load_tables(paths)
        assert [n.text for n in raw.notes_by_hadm[10]] == ["stable overnight"]

    def test_note_without_hadm_warned(self, tmp_path):
        paths = standard_tables(tmp_path, notes=[
            (1, "", "Nursing", "orphan note"),
        ])
        raw = load_tables(paths)
        assert raw.notes_by_hadm == {}
        assert raw.report.warnings["noteevents:missing_hadm"] == 1

    def test_unmatched_category_counted_but_kept(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        assert raw.report.unmatched_note_categories == {"WeirdCategory": 1}
        weird = [n for n in raw.notes_by_hadm[20] if n.raw_category == "WeirdCategory"]
        assert len(weird) == 1
        assert weird[0].category is None

    def test_category_canonicalized_case_insensitively(self, tmp_path):
        paths = standard_tables(tmp_path, notes=[
            (1, 10, "NURSING/OTHER ", "note text"),
        ])
        raw = load_tables(paths)
        assert raw.notes_by_hadm[10][0].category == "Nursing/other"


class TestBuildCohort:
    def test_standard_fixture_counts_and_labels(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        result = build_cohort(raw)
        s = result.summary
        assert (s.admissions_total, s.with_matching_diagnosis, s.with_patient_record,
                s.age_at_most_120, s.discharged_alive, s.labels_consistent) == (2, 2, 2, 2, 2, 2)
        assert s.unique_patients == 2
        by_hadm = {i.hadm_id: i for i in result.instances}
        assert by_hadm[10].labels == {15: 1, 30: 1, 60: 1, 365: 1}
        # second patient died 100 days after discharge
        assert by_hadm[20].labels == {15: 1, 30: 1, 60: 1, 365: 0}

    def test_gender_comes_from_patient_row(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        by_hadm = {i.hadm_id: i for i in build_cohort(raw).instances}
        assert by_hadm[10].basic["GENDER"] == "F"
        assert by_hadm[20].basic["GENDER"] == "M"

    def test_notes_tokenized_per_category(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        inst = {i.hadm_id: i for i in build_cohort(raw).instances}[10]
        assert inst.tokens_by_category["Nursing"] == [
            "pt", "resting", "comfortably", "notified"]
        assert inst.tokens_by_category["Radiology"] == [
            "chest", "x", "ray", "no", "acute", "process"]
        assert inst.tokens_by_category["ECG"] == []

    def test_unmatched_category_notes_excluded(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        inst = {i.hadm_id: i for i in build_cohort(raw).instances}[20]
        flat = [t for toks in inst.tokens_by_category.values() for t in toks]
        assert "canonical" not in flat  # WeirdCategory text never enters

    def test_non_matching_diagnosis_dropped_first(self, tmp_path):
        paths = standard_tables(tmp_path, diagnoses=[(1, 10, "5849"), (2, 20, "4019")])
        result = build_cohort(load_tables(paths))
        assert result.summary.with_matching_diagnosis == 1
        assert result.summary.dropped["no_matching_diagnosis"] == 1
        assert [i.hadm_id for i in result.instances] == [10]

    def test_missing_patient_record_dropped(self, tmp_path):
        paths = standard_tables(tmp_path, patients=[(1, "F", ts(2040), "")])
        result = build_cohort(load_tables(paths))
        assert result.summary.dropped["missing_patient_record"] == 1
        assert result.summary.with_patient_record == 1

    def test_implausible_age_dropped(self, tmp_path):
        paths = standard_tables(
            tmp_path,
            patients=[(1, "F", ts(1950), ""), (2, "M", ts(2035), "")])
        result = build_cohort(load_tables(paths))
        assert result.summary.dropped["age_over_120"] == 1
        assert [i.hadm_id for i in result.instances] == [20]

    def test_age_exactly_120_kept(self, tmp_path):
        admit = ts(2100, 1, 1, 8)
        dob = (datetime.strptime(admit, "%Y-%m-%d %H:%M:%S")
               - timedelta(days=120 * 365.25)).strftime("%Y-%m-%d %H:%M:%S")
        paths = standard_tables(
            tmp_path, patients=[(1, "F", dob, ""), (2, "M", ts(2035), "")])
        result = build_cohort(load_tables(paths))
        assert result.summary.dropped["age_over_120"] == 0
        ages = {i.hadm_id: i.admit_age for i in result.instances}
        assert ages[10] == pytest.approx(120.0)

    def test_dead_discharge_dropped(self, tmp_path):
        paths = standard_tables(tmp_path, admissions=[
            (1, 10, ts(2100, 1, 1, 8), ts(2100, 1, 11, 8), "EMERGENCY",
             "EMERGENCY ROOM ADMIT", "DEAD/EXPIRED", "Medicare", "ENGL",
             "CATHOLIC", "MARRIED"),
            (2, 20, ts(2100, 5, 1), ts(2100, 6, 1), "ELECTIVE",
             "PHYS REFERRAL/NORMAL DELI", "SNF", "Private", "", "NOT SPECIFIED",
             "SINGLE"),
        ])
        result = build_cohort(load_tables(paths))
        assert result.summary.dropped["discharged_dead"] == 1
        assert [i.hadm_id for i in result.instances] == [20]

    def test_death_before_discharge_dropped_not_fatal(self, tmp_path):
        # dod falls inside the stay for hadm 10 and discharge says alive
        paths = standard_tables(
            tmp_path,
            patients=[(1, "F", ts(2040), ts(2100, 1, 5)), (2, "M", ts(2035), "")])
        result = build_cohort(load_tables(paths))
        assert result.summary.dropped["death_before_discharge"] == 1
        assert result.summary.labels_consistent == 1
        assert [i.hadm_id for i in result.instances] == [20]

    def test_empty_cohort_raises(self, tmp_path):
        paths = standard_tables(tmp_path, diagnoses=[(1, 10, "4019"), (2, 20, "4019")])
        with pytest.raises(IngestError, match="empty"):
            build_cohort(load_tables(paths))

    def test_no_prefixes_raises(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        with pytest.raises(IngestError, match="prefix"):
            build_cohort(raw, icd9_prefixes=())

    def test_custom_prefixes(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        result = build_cohort(raw, icd9_prefixes=("4019",))
        assert [i.hadm_id for i in result.instances] == [20]

    def test_custom_horizons(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        result = build_cohort(raw, horizons=(90, 180))
        assert all(set(i.labels) == {90, 180} for i in result.instances)


class TestCohortSerialization:
    def test_round_trip_preserves_instances(self, tmp_path):
        raw = load_tables(standard_tables(tmp_path))
        result = build_cohort(raw)
        path = tmp_path / "cohort.json"
        save_cohort(path, result, DEFAULT_HORIZONS)
        instances, horizons, summary = load_cohort(path)
        assert horizons == list(DEFAULT_HORIZONS)
        assert summary == result.summary.to_dict()
        assert [i.to_dict() for i in instances] == [i.to_dict() for i in result.instances]

    def test_from_dict_restores_empty_categories(self):
        inst = CohortInstance(
            hadm_id=1, subject_id=2, admit_age=50.0,
            basic={"GENDER": "F"}, labels={30: 1},
            tokens_by_category={"Nursing": ["stable"], "ECG": []})
        again = CohortInstance.from_dict(inst.to_dict())
        assert again.tokens_by_category["Nursing"] == ["stable"]
        assert again.tokens_by_category["Echo"] == []
        assert len(again.tokens_by_category) == 15
