"""JSONL serialization for patient stays.

One stay per line, keys sorted, timestamps as ISO-8601 to minute precision.
Serialization is deterministic: the same cohort always produces the same bytes.
"""

from __future__ import annotations

import json
from datetime import datetime
from pathlib import Path
from typing import Any

from .cohort import (
    AlcoholUse,
    DiagnosisRecord,
    LabSample,
    MedAction,
    MedicationOrder,
    OutcomeEvent,
    OutcomeKind,
    PatientStay,
    Route,
    StayLocation,
    TabularStatics,
    VitalSample,
)


def ts_str(ts: datetime) -> str:
    return ts.strftime("%Y-%m-%dT%H:%M")


def parse_ts(text: str) -> datetime:
    return datetime.fromisoformat(text)


def stay_to_dict(stay: PatientStay) -> dict[str, Any]:
    doc: dict[str, Any] = {
        "patient_id": stay.patient_id,
        "admission_ts": ts_str(stay.admission_ts) if stay.admission_ts else None,
        "discharge_ts": ts_str(stay.discharge_ts) if stay.discharge_ts else None,
        "in_icu_intervals": [
            [ts_str(a), ts_str(b)] for a, b in stay.in_icu_intervals
        ],
        "vitals": [
            {"name": s.name, "value": s.value, "ts": ts_str(s.ts)} for s in stay.vitals
        ],
        "labs": [
            {"name": s.name, "value": s.value, "ts": ts_str(s.ts)} for s in stay.labs
        ],
        "medications": [
            {
                "name": m.name,
                "dose": m.dose,
                "route": m.route.value,
                "action": m.action.value,
                "ts": ts_str(m.ts),
            }
            for m in stay.medications
        ],
        "diagnoses": [
            {"code": d.code, "description": d.description, "ts": ts_str(d.ts)}
            for d in stay.diagnoses
        ],
        "outcome_events": [
            {"kind": e.kind.value, "ts": ts_str(e.ts)} for e in stay.outcome_events
        ],
    }
    if stay.statics is not None:
        doc["statics"] = {
            "age": stay.statics.age,
            "alcohol_user": stay.statics.alcohol_user.value,
            "dnr_order": stay.statics.dnr_order,
            "future_surgery_date": stay.statics.future_surgery_date,
            "admitting_ward": stay.statics.admitting_ward,
        }
    if stay.location is not None:
        doc["location"] = {
            "department": stay.location.department,
            "room": stay.location.room,
            "bed": stay.location.bed,
            "service": stay.location.service,
        }
    return doc


def stay_from_dict(doc: dict[str, Any]) -> PatientStay:
    statics = None
    if doc.get("statics") is not None:
        s = doc["statics"]
        statics = TabularStatics(
            age=float(s["age"]),
            alcohol_user=AlcoholUse(s["alcohol_user"]),
            dnr_order=bool(s["dnr_order"]),
            future_surgery_date=(
                int(s["future_surgery_date"])
                if s.get("future_surgery_date") is not None
                else None
            ),
            admitting_ward=s["admitting_ward"],
        )
    location = None
    if doc.get("location") is not None:
        loc = doc["location"]
        location = StayLocation(
            department=loc["department"],
            room=loc["room"],
            bed=loc["bed"],
            service=loc["service"],
        )
    return PatientStay(
        patient_id=doc["patient_id"],
        admission_ts=parse_ts(doc["admission_ts"]) if doc.get("admission_ts") else None,
        discharge_ts=parse_ts(doc["discharge_ts"]) if doc.get("discharge_ts") else None,
        in_icu_intervals=[
            (parse_ts(a), parse_ts(b)) for a, b in doc.get("in_icu_intervals", [])
        ],
        vitals=[
            VitalSample(name=v["name"], value=float(v["value"]), ts=parse_ts(v["ts"]))
            for v in doc.get("vitals", [])
        ],
        labs=[
            LabSample(name=v["name"], value=float(v["value"]), ts=parse_ts(v["ts"]))
            for v in doc.get("labs", [])
        ],
        medications=[
            MedicationOrder(
                name=m["name"],
                dose=m["dose"],
                route=Route(m["route"]),
                action=MedAction(m["action"]),
                ts=parse_ts(m["ts"]),
            )
            for m in doc.get("medications", [])
        ],
        diagnoses=[
            DiagnosisRecord(code=d["code"], description=d["description"], ts=parse_ts(d["ts"]))
            for d in doc.get("diagnoses", [])
        ],
        statics=statics,
        outcome_events=[
            OutcomeEvent(kind=OutcomeKind(e["kind"]), ts=parse_ts(e["ts"]))
            for e in doc.get("outcome_events", [])
        ],
        location=location,
    )


def dump_line(stay: PatientStay) -> str:
    return json.dumps(stay_to_dict(stay), sort_keys=True, separators=(",", ":"))


def write_stays(stays: list[PatientStay], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for stay in stays:
            fh.write(dump_line(stay))
            fh.write("\n")
