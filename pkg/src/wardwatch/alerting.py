"""Daily scoring runs, alert tiers, persistence, and the feedback ledger.

A run for date D uses records up to D 23:59 and announces at 08:00 on D+1.
Alert files are append-only, one per run date, written deterministically so
a rerun of the same date is byte-identical.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from enum import Enum
from pathlib import Path
from typing import Sequence

from .cohort import PatientDayKey, PatientStay, apply_cohort_filters
from .errors import ConfigurationError, InputValidationError
from .features import FeatureConfig, featurize_cohort
from .model import TreeEnsemble, require_matching_manifest
from .records import parse_ts, ts_str

logger = logging.getLogger(__name__)

ANNOUNCE_TIME = time(8, 0)
STALE_AFTER_DAYS = 182


class Tier(str, Enum):
    RED = "Red"
    YELLOW = "Yellow"
    WHITE = "White"


class FeedbackVerdict(str, Enum):
    TRUE_POSITIVE = "TruePositive"
    FALSE_POSITIVE = "FalsePositive"
    FALSE_NEGATIVE = "FalseNegative"
    CORNER_CASE = "CornerCase"


@dataclass(frozen=True)
class TierThresholds:
    red_level: float = 0.12
    red_delta: float = 0.06
    yellow_level: float = 0.03
    yellow_delta: float = 0.015

    def __post_init__(self) -> None:
        if not self.red_level > self.yellow_level > 0:
            raise ConfigurationError(
                f"need red_level > yellow_level > 0, got "
                f"{self.red_level} / {self.yellow_level}"
            )
        if not self.red_delta > self.yellow_delta > 0:
            raise ConfigurationError(
                f"need red_delta > yellow_delta > 0, got "
                f"{self.red_delta} / {self.yellow_delta}"
            )

    def to_dict(self) -> dict:
        return {
            "red_level": self.red_level,
            "red_delta": self.red_delta,
            "yellow_level": self.yellow_level,
            "yellow_delta": self.yellow_delta,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TierThresholds":
        return cls(**doc)


@dataclass(frozen=True)
class AlertRecord:
    patient_day: PatientDayKey
    risk: float
    risk_prev1: float | None
    risk_prev2: float | None
    tier: Tier
    scored_at: datetime
    department: str
    room: str
    bed: str
    service: str
    stale_model: bool = False

    def to_dict(self) -> dict:
        return {
            "patient_day": self.patient_day.isoformat(),
            "risk": self.risk,
            "risk_prev1": self.risk_prev1,
            "risk_prev2": self.risk_prev2,
            "tier": self.tier.value,
            "scored_at": ts_str(self.scored_at),
            "location": {
                "department": self.department,
                "room": self.room,
                "bed": self.bed,
                "service": self.service,
            },
            "stale_model": self.stale_model,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "AlertRecord":
        loc = doc.get("location", {})
        return cls(
            patient_day=PatientDayKey.from_string(doc["patient_day"]),
            risk=float(doc["risk"]),
            risk_prev1=None if doc.get("risk_prev1") is None else float(doc["risk_prev1"]),
            risk_prev2=None if doc.get("risk_prev2") is None else float(doc["risk_prev2"]),
            tier=Tier(doc["tier"]),
            scored_at=parse_ts(doc["scored_at"]),
            department=loc.get("department", ""),
            room=loc.get("room", ""),
            bed=loc.get("bed", ""),
            service=loc.get("service", ""),
            stale_model=bool(doc.get("stale_model", False)),
        )


@dataclass(frozen=True)
class FeedbackEntry:
    patient_day: PatientDayKey
    verdict: FeedbackVerdict
    note: str
    author: str
    ts: datetime

    def to_dict(self) -> dict:
        return {
            "patient_day": self.patient_day.isoformat(),
            "verdict": self.verdict.value,
            "note": self.note,
            "author": self.author,
            "ts": ts_str(self.ts),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FeedbackEntry":
        return cls(
            patient_day=PatientDayKey.from_string(doc["patient_day"]),
            verdict=FeedbackVerdict(doc["verdict"]),
            note=doc["note"],
            author=doc["author"],
            ts=parse_ts(doc["ts"]),
        )


def assign_tier(
    risk: float, risk_prev1: float | None, thresholds: TierThresholds
) -> Tier:
    """Red rules first, then yellow, else white; all comparisons strict.

    Deltas are absolute risk differences vs the previous day; with no
    previous risk, only the level rules apply.
    """
    if not 0.0 <= risk <= 1.0:
        raise InputValidationError(f"risk must be a probability, got {risk}")
    delta = None if risk_prev1 is None else risk - risk_prev1
    if risk > thresholds.red_level or (delta is not None and delta > thresholds.red_delta):
        return Tier.RED
    if risk > thresholds.yellow_level or (
        delta is not None and delta > thresholds.yellow_delta
    ):
        return Tier.YELLOW
    return Tier.WHITE


def retrain_schedule_check(trained_on: date | None, today: date) -> str:
    """"fresh" within 182 days of training (inclusive), else "stale"."""
    if trained_on is None:
        return "stale"
    return "stale" if (today - trained_on).days > STALE_AFTER_DAYS else "fresh"


# ---------------------------------------------------------------------------
# Alert persistence
# ---------------------------------------------------------------------------


class AlertStore:
    """One alert file per run date plus an index of run dates.

    Files are written whole, with rows sorted by patient id and keys sorted
    inside each row, so rewriting a run is byte-identical.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def _run_path(self, run_date: date) -> Path:
        return self.root / f"alerts-{run_date.isoformat()}.jsonl"

    def write_run(self, run_date: date, records: Sequence[AlertRecord]) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        path = self._run_path(run_date)
        rows = sorted(records, key=lambda r: r.patient_day.patient_id)
        with path.open("w", encoding="utf-8") as fh:
            for rec in rows:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True, separators=(",", ":")))
                fh.write("\n")
        self._update_index(run_date)
        return path

    def _update_index(self, run_date: date) -> None:
        index = self.root / "runs.json"
        dates = set(self.run_dates())
        dates.add(run_date)
        index.write_text(
            json.dumps(sorted(d.isoformat() for d in dates)) + "\n"
        )

    def run_dates(self) -> list[date]:
        index = self.root / "runs.json"
        if not index.exists():
            return []
        return [date.fromisoformat(d) for d in json.loads(index.read_text())]

    def has_run(self, run_date: date) -> bool:
        return self._run_path(run_date).exists()

    def read_run(self, run_date: date) -> list[AlertRecord]:
        path = self._run_path(run_date)
        if not path.exists():
            return []
        return [
            AlertRecord.from_dict(json.loads(line))
            for line in path.read_text(encoding="utf-8").splitlines()
            if line
        ]

    def risks_for_run(self, run_date: date) -> dict[str, float]:
        return {
            rec.patient_day.patient_id: rec.risk for rec in self.read_run(run_date)
        }

    def find_alert(self, key: PatientDayKey) -> AlertRecord | None:
        for rec in self.read_run(key.day):
            if rec.patient_day == key:
                return rec
        return None

    def patient_history(self, patient_id: str) -> list[AlertRecord]:
        out = []
        for run_date in self.run_dates():
            for rec in self.read_run(run_date):
                if rec.patient_day.patient_id == patient_id:
                    out.append(rec)
        return sorted(out, key=lambda r: r.patient_day.day)

    # realized outcome labels, reconciled after the fact, for what-if analyses
    def _labels_path(self, run_date: date) -> Path:
        return self.root / f"labels-{run_date.isoformat()}.json"

    def write_labels(self, run_date: date, labels: dict[str, int]) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        self._labels_path(run_date).write_text(
            json.dumps(dict(sorted(labels.items())), sort_keys=True) + "\n"
        )

    def read_labels(self, run_date: date) -> dict[str, int]:
        path = self._labels_path(run_date)
        if not path.exists():
            return {}
        return {k: int(v) for k, v in json.loads(path.read_text()).items()}


# ---------------------------------------------------------------------------
# Daily scoring cycle
# ---------------------------------------------------------------------------


def screen_future_records(stays: list[PatientStay], cut: datetime) -> tuple[list[PatientStay], int]:
    """Exclude records timestamped after the run cut; returns screened copies
    and the number of excluded records."""
    screened: list[PatientStay] = []
    flagged = 0
    for stay in stays:
        copy = PatientStay(
            patient_id=stay.patient_id,
            admission_ts=stay.admission_ts,
            discharge_ts=stay.discharge_ts,
            in_icu_intervals=list(stay.in_icu_intervals),
            vitals=[r for r in stay.vitals if r.ts <= cut],
            labs=[r for r in stay.labs if r.ts <= cut],
            medications=[r for r in stay.medications if r.ts <= cut],
            diagnoses=[r for r in stay.diagnoses if r.ts <= cut],
            statics=stay.statics,
            outcome_events=list(stay.outcome_events),
            location=stay.location,
        )
        flagged += (
            len(stay.vitals) + len(stay.labs) + len(stay.medications) + len(stay.diagnoses)
        ) - (
            len(copy.vitals) + len(copy.labs) + len(copy.medications) + len(copy.diagnoses)
        )
        screened.append(copy)
    if flagged:
        logger.warning("screened %d records timestamped after the run cut", flagged)
    return screened, flagged


def daily_run(
    stays: list[PatientStay],
    model: TreeEnsemble,
    run_date: date,
    store: AlertStore | None = None,
    thresholds: TierThresholds | None = None,
    feature_config: FeatureConfig | None = None,
) -> list[AlertRecord]:
    """Score every eligible patient-day closing at run_date's 23:59 cut.

    Risk deltas come from the previous two run dates' persisted records;
    without a store (or without those runs) deltas are absent and tiers fall
    back to level rules.  The alert file for the date is (re)written
    deterministically.
    """
    if thresholds is None:
        thresholds = TierThresholds()
    if feature_config is None:
        feature_config = FeatureConfig()

    cut = PatientDayKey(patient_id="", day=run_date).cut
    screened, _ = screen_future_records(stays, cut)
    kept, _ = apply_cohort_filters(screened)

    manifest_fm = featurize_cohort(kept, config=feature_config, until=run_date)
    require_matching_manifest(model, manifest_fm.manifest)
    today_rows = [
        i for i, key in enumerate(manifest_fm.keys) if key.day == run_date
    ]

    prev1: dict[str, float] = {}
    prev2: dict[str, float] = {}
    if store is None:
        logger.warning("no alert store configured; risk deltas will be absent")
    else:
        prev1 = store.risks_for_run(run_date - timedelta(days=1))
        prev2 = store.risks_for_run(run_date - timedelta(days=2))
        if not prev1:
            logger.warning(
                "no prior run found for %s; risk deltas will be absent",
                run_date - timedelta(days=1),
            )

    scored_at = datetime.combine(run_date + timedelta(days=1), ANNOUNCE_TIME)
    staleness = retrain_schedule_check(model.trained_on, scored_at.date())
    by_id = {stay.patient_id: stay for stay in kept}

    records: list[AlertRecord] = []
    if today_rows:
        risks = model.predict_proba(manifest_fm.X[today_rows])
        for pos, i in enumerate(today_rows):
            key = manifest_fm.keys[i]
            stay = by_id[key.patient_id]
            loc = stay.location
            risk = float(risks[pos])
            p1 = prev1.get(key.patient_id)
            records.append(
                AlertRecord(
                    patient_day=key,
                    risk=risk,
                    risk_prev1=p1,
                    risk_prev2=prev2.get(key.patient_id),
                    tier=assign_tier(risk, p1, thresholds),
                    scored_at=scored_at,
                    department=loc.department if loc else "",
                    room=loc.room if loc else "",
                    bed=loc.bed if loc else "",
                    service=loc.service if loc else "",
                    stale_model=staleness == "stale",
                )
            )

    records.sort(key=lambda r: r.patient_day.patient_id)
    if store is not None:
        store.write_run(run_date, records)
    return records


# ---------------------------------------------------------------------------
# Feedback ledger
# ---------------------------------------------------------------------------


class FeedbackLedger:
    """Append-only feedback file; entries reference existing alerts."""

    def __init__(self, path: str | Path, store: AlertStore):
        self.path = Path(path)
        self.store = store

    def record_feedback(self, entry: FeedbackEntry) -> dict:
        if self.store.find_alert(entry.patient_day) is None:
            raise InputValidationError(
                f"feedback references unknown alert {entry.patient_day.isoformat()}"
            )
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry.to_dict(), sort_keys=True, separators=(",", ":")))
            fh.write("\n")
        return {"stored": True, "patient_day": entry.patient_day.isoformat()}

    def entries(
        self,
        start: date | None = None,
        end: date | None = None,
        verdict: FeedbackVerdict | None = None,
    ) -> list[FeedbackEntry]:
        if not self.path.exists():
            return []
        out = []
        for line in self.path.read_text(encoding="utf-8").splitlines():
            if not line:
                continue
            entry = FeedbackEntry.from_dict(json.loads(line))
            if start is not None and entry.patient_day.day < start:
                continue
            if end is not None and entry.patient_day.day > end:
                continue
            if verdict is not None and entry.verdict is not verdict:
                continue
            out.append(entry)
        return sorted(out, key=lambda e: (e.ts, e.author))


# ---------------------------------------------------------------------------
# Threshold what-if
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class WhatIfSummary:
    thresholds: TierThresholds
    tier_counts: dict[str, int]
    n_alerts: int
    n_days: int
    expected_daily_alert_volume: float
    sensitivity: float | None
    specificity: float | None
    precision: float | None
    n_labeled: int

    def to_dict(self) -> dict:
        return {
            "thresholds": self.thresholds.to_dict(),
            "tier_counts": self.tier_counts,
            "n_alerts": self.n_alerts,
            "n_days": self.n_days,
            "expected_daily_alert_volume": self.expected_daily_alert_volume,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "precision": self.precision,
            "n_labeled": self.n_labeled,
        }


def threshold_whatif(
    alerts: Sequence[AlertRecord],
    candidate: TierThresholds,
    labels: dict[str, int] | None = None,
) -> WhatIfSummary:
    """Re-tier stored alerts under candidate thresholds, without mutating them.

    An alert counts as flagged when its recomputed tier is Yellow or Red.
    Sensitivity/specificity/precision are computed over the alerts that have
    a realized outcome label (keyed by patient_day string); None when no
    labels are available.
    """
    if not alerts:
        raise InputValidationError("what-if needs a non-empty historical window")
    labels = labels or {}
    counts = {Tier.RED.value: 0, Tier.YELLOW.value: 0, Tier.WHITE.value: 0}
    tp = fp = tn = fn = 0
    n_labeled = 0
    for rec in alerts:
        tier = assign_tier(rec.risk, rec.risk_prev1, candidate)
        counts[tier.value] += 1
        label = labels.get(rec.patient_day.isoformat())
        if label is None:
            continue
        n_labeled += 1
        flagged = tier in (Tier.RED, Tier.YELLOW)
        if flagged and label:
            tp += 1
        elif flagged:
            fp += 1
        elif label:
            fn += 1
        else:
            tn += 1

    n_days = len({rec.patient_day.day for rec in alerts})
    volume = (counts[Tier.RED.value] + counts[Tier.YELLOW.value]) / n_days
    return WhatIfSummary(
        thresholds=candidate,
        tier_counts=counts,
        n_alerts=len(alerts),
        n_days=n_days,
        expected_daily_alert_volume=volume,
        sensitivity=tp / (tp + fn) if (tp + fn) > 0 else None,
        specificity=tn / (tn + fp) if (tn + fp) > 0 else None,
        precision=tp / (tp + fp) if (tp + fp) > 0 else None,
        n_labeled=n_labeled,
    )
