"""Cohort file parsing and pre-featurization integrity checks.

Malformed lines never crash a run; they are counted and skipped.  A file
where most lines fail to parse is treated as the wrong file entirely.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable

from .cohort import PatientDayKey, PatientStay
from .errors import CorpusError
from .records import stay_from_dict

DROP_OUTSIDE_ADMISSION = "OutsideAdmissionWindow"

DayRecord = Any  # VitalSample | LabSample | MedicationOrder | DiagnosisRecord
RecordSelector = Callable[[PatientStay, PatientDayKey], list[DayRecord]]


@dataclass
class IntegrityReport:
    records_read: int = 0
    records_dropped: dict[str, int] = field(default_factory=dict)
    leakage_violations: int = 0
    malformed_lines: int = 0

    @property
    def records_kept(self) -> int:
        return self.records_read - sum(self.records_dropped.values())

    def drop(self, reason: str, n: int = 1) -> None:
        self.records_dropped[reason] = self.records_dropped.get(reason, 0) + n

    def to_dict(self) -> dict[str, Any]:
        return {
            "records_read": self.records_read,
            "records_kept": self.records_kept,
            "records_dropped": dict(sorted(self.records_dropped.items())),
            "leakage_violations": self.leakage_violations,
            "malformed_lines": self.malformed_lines,
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


def parse_cohort_file(path: str | Path) -> tuple[list[PatientStay], IntegrityReport]:
    """Parse a stay-per-line record file, dropping what fails validation.

    Stream records timestamped outside the stay's admission window are
    dropped record-by-record; outcome events are left alone because whole-stay
    cohort filters own that decision.  More than half the lines failing to
    parse raises CorpusError.
    """
    report = IntegrityReport()
    stays: list[PatientStay] = []
    n_lines = 0
    try:
        fh = Path(path).open("r", encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read cohort file {path}: {exc}") from exc
    with fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            n_lines += 1
            try:
                doc = json.loads(line)
                stay = stay_from_dict(doc)
            except (ValueError, KeyError, TypeError):
                report.malformed_lines += 1
                continue
            _normalize_timestamps(stay)
            _drop_out_of_window(stay, report)
            stays.append(stay)

    if n_lines > 0 and report.malformed_lines * 2 > n_lines:
        raise CorpusError(
            f"{report.malformed_lines} of {n_lines} lines malformed in {path}; "
            "this does not look like a cohort record file"
        )
    return stays, report


def _normalize_timestamps(stay: PatientStay) -> None:
    trunc = lambda ts: ts.replace(second=0, microsecond=0)
    if stay.admission_ts is not None:
        stay.admission_ts = trunc(stay.admission_ts)
    if stay.discharge_ts is not None:
        stay.discharge_ts = trunc(stay.discharge_ts)
    stay.in_icu_intervals = [(trunc(a), trunc(b)) for a, b in stay.in_icu_intervals]
    for attr in ("vitals", "labs", "medications", "diagnoses", "outcome_events"):
        setattr(
            stay,
            attr,
            [_with_ts(rec, trunc(rec.ts)) for rec in getattr(stay, attr)],
        )


def _with_ts(rec, ts):
    return rec if rec.ts == ts else replace(rec, ts=ts)


def _drop_out_of_window(stay: PatientStay, report: IntegrityReport) -> None:
    for attr in ("vitals", "labs", "medications", "diagnoses"):
        records = getattr(stay, attr)
        report.records_read += len(records)
        if stay.admission_ts is None:
            continue
        kept = []
        for rec in records:
            if rec.ts < stay.admission_ts or (
                stay.discharge_ts is not None and rec.ts > stay.discharge_ts
            ):
                report.drop(DROP_OUTSIDE_ADMISSION)
            else:
                kept.append(rec)
        setattr(stay, attr, kept)


def eligible_records(stay: PatientStay, key: PatientDayKey) -> list[DayRecord]:
    """Records usable for `key`'s feature vector: same calendar day, ts at or
    before the 23:59 cut.  This is the selection featurization builds on."""
    cut = key.cut
    out: list[DayRecord] = []
    for attr in ("vitals", "labs", "medications", "diagnoses"):
        for rec in getattr(stay, attr):
            if rec.ts.date() == key.day and rec.ts <= cut:
                out.append(rec)
    return out


def leakage_audit(
    stays: Iterable[PatientStay],
    day_keys: Iterable[PatientDayKey],
    selector: RecordSelector = eligible_records,
) -> IntegrityReport:
    """Cross-check the per-day record selection against raw timestamps.

    The selector is a parameter precisely so this audit does not trust the
    production selection path: any selected record timestamped after its
    day's cut counts as a leakage violation.  Violations are reported, and
    featurization independently re-filters by timestamp, so a flagged record
    never reaches a feature vector.
    """
    by_patient: dict[str, PatientStay] = {s.patient_id: s for s in stays}
    report = IntegrityReport()
    for key in day_keys:
        stay = by_patient.get(key.patient_id)
        if stay is None:
            continue
        selected = selector(stay, key)
        report.records_read += len(selected)
        for rec in selected:
            if rec.ts > key.cut:
                report.leakage_violations += 1
    return report
