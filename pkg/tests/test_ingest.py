"""Record file parsing, integrity checks, and the leakage audit."""

import json
from datetime import date, datetime, timedelta

import pytest

from wardwatch.cohort import PatientDayKey, enumerate_patient_days
from wardwatch.errors import CorpusError
from wardwatch.ingest import (
    DROP_OUTSIDE_ADMISSION,
    IntegrityReport,
    eligible_records,
    leakage_audit,
    parse_cohort_file,
)
from wardwatch.records import dump_line, stay_to_dict, write_stays


@pytest.fixture()
def cohort_file(tmp_path, small_kept):
    path = tmp_path / "cohort.jsonl"
    write_stays(small_kept[:10], path)
    return path


def test_well_formed_file_parses_clean(cohort_file):
    stays, report = parse_cohort_file(cohort_file)
    assert len(stays) == 10
    assert report.malformed_lines == 0
    assert sum(report.records_dropped.values()) == 0


def test_truncated_line_is_counted_not_fatal(tmp_path, small_kept):
    path = tmp_path / "cohort.jsonl"
    lines = [dump_line(s) for s in small_kept[:10]]
    lines[4] = lines[4][: len(lines[4]) // 2]
    path.write_text("\n".join(lines) + "\n")
    stays, report = parse_cohort_file(path)
    assert len(stays) == 9
    assert report.malformed_lines == 1


def test_mostly_malformed_file_raises_corpus_error(tmp_path):
    path = tmp_path / "garbage.jsonl"
    path.write_text("not json\n{broken\n<xml/>\n")
    with pytest.raises(CorpusError):
        parse_cohort_file(path)


def test_record_before_admission_dropped(tmp_path, small_kept):
    stay = small_kept[0]
    doc = stay_to_dict(stay)
    early = (stay.admission_ts - timedelta(hours=3)).strftime("%Y-%m-%dT%H:%M")
    doc["labs"] = list(doc.get("labs", [])) + [
        {"name": "lactate", "value": 2.0, "ts": early}
    ]
    path = tmp_path / "cohort.jsonl"
    path.write_text(json.dumps(doc) + "\n")
    stays, report = parse_cohort_file(path)
    assert report.records_dropped.get(DROP_OUTSIDE_ADMISSION, 0) == 1
    assert all(lab.ts >= stay.admission_ts for lab in stays[0].labs)


def test_report_accounting_invariant(cohort_file):
    _, report = parse_cohort_file(cohort_file)
    assert report.records_read == report.records_kept + sum(
        report.records_dropped.values()
    )


def test_round_trip_field_for_field(tmp_path, small_kept):
    path = tmp_path / "cohort.jsonl"
    write_stays(small_kept, path)
    parsed, _ = parse_cohort_file(path)
    assert [stay_to_dict(s) for s in parsed] == [stay_to_dict(s) for s in small_kept]


def test_timestamps_normalized_to_minute(tmp_path, small_kept):
    doc = stay_to_dict(small_kept[0])
    doc["vitals"] = [{"name": "heart_rate", "value": 80.0, "ts": "2024-01-20T10:15:45"}]
    doc["admission_ts"] = "2024-01-19T08:00:30"
    path = tmp_path / "cohort.jsonl"
    path.write_text(json.dumps(doc) + "\n")
    stays, _ = parse_cohort_file(path)
    assert stays[0].vitals[0].ts.second == 0
    assert stays[0].admission_ts.second == 0


# ---------------------------------------------------------------------------
# leakage audit
# ---------------------------------------------------------------------------


def test_vital_at_2358_eligible_same_day(small_kept):
    stay = next(s for s in small_kept if s.vitals)
    key = enumerate_patient_days(stay)[0]
    probe = stay.vitals[0].__class__(
        name="heart_rate", value=99.0, ts=datetime.combine(key.day, datetime.min.time()).replace(hour=23, minute=58)
    )
    stay_copy = stay.__class__(**{**stay.__dict__, "vitals": [probe]})
    assert probe in eligible_records(stay_copy, key)


def test_vital_at_0001_next_day_belongs_to_next_day(small_kept):
    stay = next(s for s in small_kept if len(enumerate_patient_days(s)) >= 2)
    day1, day2 = enumerate_patient_days(stay)[:2]
    ts = datetime.combine(day2.day, datetime.min.time()).replace(minute=1)
    probe = stay.vitals[0].__class__(name="heart_rate", value=99.0, ts=ts)
    stay_copy = stay.__class__(**{**stay.__dict__, "vitals": [probe]})
    assert probe not in eligible_records(stay_copy, day1)
    assert probe in eligible_records(stay_copy, day2)


def test_clean_generator_output_has_zero_violations(small_kept):
    keys = [k for s in small_kept for k in enumerate_patient_days(s)]
    report = leakage_audit(small_kept, keys)
    assert report.leakage_violations == 0
    assert report.records_read > 0


def test_buggy_selector_is_caught(small_kept):
    """The audit exists to catch a selection path that ignores the cut."""

    def leaky(stay, key):
        return [r for r in stay.vitals if r.ts.date() in (key.day, key.day + timedelta(days=1))]

    keys = [k for s in small_kept for k in enumerate_patient_days(s)]
    report = leakage_audit(small_kept, keys, selector=leaky)
    assert report.leakage_violations > 0


def test_report_write_and_shape(tmp_path):
    report = IntegrityReport(records_read=5, malformed_lines=1)
    report.drop("OutsideAdmissionWindow", 2)
    out = tmp_path / "report.json"
    report.write(out)
    doc = json.loads(out.read_text())
    assert doc["records_read"] == 5
    assert doc["records_dropped"]["OutsideAdmissionWindow"] == 2
