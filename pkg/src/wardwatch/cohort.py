"""EHR-style data model, cohort inclusion rules, and the synthetic cohort generator.

A "patient day" is a calendar day ending at a 23:59 data cut; predictions for
that day may only use records timestamped at or before the cut, and the label
window is the following 24 hours.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import date, datetime, time, timedelta
from enum import Enum

import numpy as np

from .errors import ConfigurationError, InputValidationError

DAY_CUT = time(23, 59)
LABEL_WINDOW = timedelta(hours=24)

WARDS = ("Medicine", "Surgery", "Telemetry", "Oncology")
WARD_SERVICES = {
    "Medicine": "General Medicine",
    "Surgery": "Surgical Care",
    "Telemetry": "Cardiology",
    "Oncology": "Oncology",
}


class Route(str, Enum):
    INTRAVENOUS = "intravenous"
    ORAL = "oral"
    OTHER = "other"


class MedAction(str, Enum):
    STARTED = "started"
    CONTINUED = "continued"
    DISCONTINUED = "discontinued"


class AlcoholUse(str, Enum):
    """Ordered categorical; encoding order is none < former < current."""

    NONE = "none"
    FORMER = "former"
    CURRENT = "current"


ALCOHOL_ORDER = (AlcoholUse.NONE, AlcoholUse.FORMER, AlcoholUse.CURRENT)


class OutcomeKind(str, Enum):
    RRT = "RRT"
    CARDIAC_ALERT = "CardiacAlert"
    ANESTHESIA_STAT = "AnesthesiaSTAT"
    DART = "DART"
    ICU_ADMISSION = "ICUAdmission"
    MORTALITY = "Mortality"


class RejectReason(str, Enum):
    MISSING_ADMISSION = "MissingAdmission"
    SHORT_STAY = "ShortStay"
    EVENT_OUTSIDE_WINDOW = "EventOutsideWindow"


@dataclass(frozen=True)
class VitalSample:
    name: str
    value: float
    ts: datetime


@dataclass(frozen=True)
class LabSample:
    name: str
    value: float
    ts: datetime


@dataclass(frozen=True)
class MedicationOrder:
    name: str
    dose: str
    route: Route
    action: MedAction
    ts: datetime


@dataclass(frozen=True)
class DiagnosisRecord:
    code: str
    description: str
    ts: datetime


@dataclass(frozen=True)
class TabularStatics:
    """Admission-time patient attributes.

    future_surgery_date counts days from the admission date to the scheduled
    surgery (None when no surgery is planned); per-day featurization rebases
    it onto the scoring day.
    """

    age: float
    alcohol_user: AlcoholUse
    dnr_order: bool
    future_surgery_date: int | None
    admitting_ward: str


@dataclass(frozen=True)
class StayLocation:
    department: str
    room: str
    bed: str
    service: str


@dataclass(frozen=True)
class OutcomeEvent:
    kind: OutcomeKind
    ts: datetime


@dataclass
class PatientStay:
    """One hospital admission with its raw event streams.

    admission_ts may be None in raw feeds; such stays are rejected by
    apply_cohort_filters rather than at construction time.
    """

    patient_id: str
    admission_ts: datetime | None
    discharge_ts: datetime | None
    in_icu_intervals: list[tuple[datetime, datetime]] = field(default_factory=list)
    vitals: list[VitalSample] = field(default_factory=list)
    labs: list[LabSample] = field(default_factory=list)
    medications: list[MedicationOrder] = field(default_factory=list)
    diagnoses: list[DiagnosisRecord] = field(default_factory=list)
    statics: TabularStatics | None = None
    outcome_events: list[OutcomeEvent] = field(default_factory=list)
    location: StayLocation | None = None


@dataclass(frozen=True, order=True)
class PatientDayKey:
    """One scored patient-day; `day` is the calendar day whose data cut closes it."""

    patient_id: str
    day: date

    @property
    def cut(self) -> datetime:
        return datetime.combine(self.day, DAY_CUT)

    @property
    def label_window(self) -> tuple[datetime, datetime]:
        """Half-open-from-the-left window (cut, cut + 24h] for outcome events."""
        return (self.cut, self.cut + LABEL_WINDOW)

    def isoformat(self) -> str:
        return f"{self.patient_id}:{self.day.isoformat()}"

    @classmethod
    def from_string(cls, text: str) -> "PatientDayKey":
        patient_id, _, day = text.rpartition(":")
        try:
            return cls(patient_id=patient_id, day=date.fromisoformat(day))
        except ValueError as exc:
            raise InputValidationError(
                f"expected '<patient_id>:<YYYY-MM-DD>', got {text!r}"
            ) from exc


@dataclass(frozen=True)
class OutcomeLabel:
    patient_day: PatientDayKey
    value: int


@dataclass
class CohortConfig:
    n_patients: int
    date_range: tuple[date, date]
    base_event_rate: float = 0.05
    seed: int = 0
    signal_strength: float = 1.0
    violation_fraction: float = 0.04

    def validate(self) -> None:
        if self.n_patients <= 0:
            raise ConfigurationError("n_patients must be positive")
        start, end = self.date_range
        if end <= start:
            raise ConfigurationError(f"empty date range: {start}..{end}")
        if not 0.0 < self.base_event_rate < 1.0:
            raise ConfigurationError(
                f"base_event_rate must be in (0, 1), got {self.base_event_rate}"
            )
        if self.signal_strength < 0:
            raise ConfigurationError("signal_strength must be >= 0")
        if not 0.0 <= self.violation_fraction < 1.0:
            raise ConfigurationError("violation_fraction must be in [0, 1)")


def apply_cohort_filters(
    stays: list[PatientStay],
) -> tuple[list[PatientStay], list[tuple[PatientStay, RejectReason]]]:
    """Split stays into kept and rejected-with-reason.

    Rejection precedence when several rules trigger:
    MissingAdmission, then ShortStay, then EventOutsideWindow.
    """
    kept: list[PatientStay] = []
    rejected: list[tuple[PatientStay, RejectReason]] = []
    for stay in stays:
        reason = _rejection_reason(stay)
        if reason is None:
            kept.append(stay)
        else:
            rejected.append((stay, reason))
    return kept, rejected


def _rejection_reason(stay: PatientStay) -> RejectReason | None:
    if stay.admission_ts is None:
        return RejectReason.MISSING_ADMISSION
    if stay.discharge_ts is not None:
        if stay.discharge_ts - stay.admission_ts < timedelta(hours=24):
            return RejectReason.SHORT_STAY
    for event in stay.outcome_events:
        if event.ts < stay.admission_ts:
            return RejectReason.EVENT_OUTSIDE_WINDOW
        if stay.discharge_ts is not None and event.ts > stay.discharge_ts:
            return RejectReason.EVENT_OUTSIDE_WINDOW
    return None


def enumerate_patient_days(
    stay: PatientStay, until: date | None = None
) -> list[PatientDayKey]:
    """One key per calendar day from admission date to the day before discharge.

    A day is skipped when its 23:59 cut falls inside an ICU interval: the
    patient is not on a scorable ward at scoring time.  For still-admitted
    stays (no discharge), `until` bounds the enumeration.
    """
    if stay.admission_ts is None:
        return []
    first = stay.admission_ts.date()
    if stay.discharge_ts is not None:
        last = stay.discharge_ts.date() - timedelta(days=1)
    elif until is not None:
        last = until
    else:
        return []
    if until is not None and until < last:
        last = until

    keys = []
    day = first
    while day <= last:
        key = PatientDayKey(patient_id=stay.patient_id, day=day)
        if not _in_icu_at(stay, key.cut):
            keys.append(key)
        day += timedelta(days=1)
    return keys


def _in_icu_at(stay: PatientStay, instant: datetime) -> bool:
    return any(start <= instant < end for start, end in stay.in_icu_intervals)


def label_day(stay: PatientStay, day: PatientDayKey) -> OutcomeLabel:
    """1 iff any outcome event (of any kind) falls in (cut, cut + 24h]."""
    lo, hi = day.label_window
    hit = any(lo < event.ts <= hi for event in stay.outcome_events)
    return OutcomeLabel(patient_day=day, value=int(hit))


# ---------------------------------------------------------------------------
# Synthetic cohort generation
# ---------------------------------------------------------------------------

# Default signal-bearing medication lists; the real lists are site-specific
# and ship as editable configuration.
DEFAULT_GREEN_MEDICATIONS = (
    "ceftriaxone",
    "vancomycin",
    "piperacillin-tazobactam",
)
DEFAULT_YELLOW_MEDICATIONS = (
    "norepinephrine",
    "vasopressin",
    "amiodarone",
)
_ROUTINE_MEDICATIONS = (
    "acetaminophen",
    "atorvastatin",
    "enoxaparin",
    "lisinopril",
    "metformin",
    "pantoprazole",
)

_DIAGNOSES = (
    ("I50.9", "heart failure, unspecified"),
    ("J18.9", "pneumonia, unspecified organism"),
    ("N17.9", "acute kidney failure, unspecified"),
    ("A41.9", "sepsis, unspecified organism"),
    ("I48.91", "atrial fibrillation, unspecified"),
    ("E11.9", "type 2 diabetes mellitus"),
    ("J44.1", "copd with acute exacerbation"),
    ("K92.2", "gastrointestinal hemorrhage"),
)

# (name, baseline, acuity slope, sample noise, samples/day lo..hi, decimals)
_VITAL_PLAN = (
    ("heart_rate", 78.0, 14.0, 6.0, 4, 8, 1),
    ("spo2", 97.0, -2.2, 1.1, 4, 8, 1),
    ("sbp", 122.0, -6.0, 9.0, 3, 6, 1),
    ("resp_rate", 16.0, 2.0, 2.0, 3, 6, 1),
    ("temperature", 36.9, 0.3, 0.35, 2, 4, 2),
)
_LAB_PLAN = (
    ("potassium", 4.1, 0.25, 0.4, 2),
    ("lactate", 1.3, 0.8, 0.5, 2),
    ("wbc", 8.0, 2.0, 2.2, 1),
    ("creatinine", 1.0, 0.2, 0.3, 2),
)

_EVENT_KINDS = (
    (OutcomeKind.RRT, 0.45),
    (OutcomeKind.ICU_ADMISSION, 0.25),
    (OutcomeKind.CARDIAC_ALERT, 0.10),
    (OutcomeKind.ANESTHESIA_STAT, 0.05),
    (OutcomeKind.DART, 0.05),
    (OutcomeKind.MORTALITY, 0.10),
)

# Driver weights for the planted event model.  Each modality carries part of
# the signal so that combining modalities genuinely helps a learner.
_W_HEART_RATE = 0.9
_W_SPO2 = 0.9
_W_DNR = 0.8
_W_CENSUS = 0.55
_W_YELLOW_MED = 1.0
_W_SURGERY_TOMORROW = 0.7


@dataclass
class _DayState:
    key: PatientDayKey
    acuity: float
    hr_avg: float
    spo2_avg: float
    yellow_active: bool
    surgery_tomorrow: bool


def generate_cohort(config: CohortConfig) -> list[PatientStay]:
    """Generate a reproducible synthetic cohort with a planted outcome signal.

    Event occurrence per patient-day follows a logistic model over planted
    drivers (heart rate, SpO2, DNR, ward census, yellow medications, imminent
    surgery), with the intercept solved numerically so the mean daily event
    probability equals base_event_rate regardless of signal_strength.  A
    violation_fraction of stays is then mutated to violate cohort filters.
    """
    config.validate()
    root = np.random.SeedSequence(config.seed)
    patient_seeds = root.spawn(config.n_patients)
    event_rng = np.random.default_rng(root.spawn(1)[0])

    stays: list[PatientStay] = []
    day_states: list[list[_DayState]] = []
    for i in range(config.n_patients):
        rng = np.random.default_rng(patient_seeds[i])
        stay, states = _generate_stay_body(f"p{i:05d}", rng, config)
        stays.append(stay)
        day_states.append(states)

    census = _ward_census(stays)
    census_values = np.array(list(census.values()), dtype=float)
    census_mean = census_values.mean()
    census_std = census_values.std() or 1.0

    scores: list[float] = []
    for stay, states in zip(stays, day_states):
        ward = stay.statics.admitting_ward
        for state in states:
            z_census = (census.get((ward, state.key.day), 0) - census_mean) / census_std
            state_score = (
                _W_HEART_RATE * (state.hr_avg - 78.0) / 14.0
                + _W_SPO2 * (97.0 - state.spo2_avg) / 2.2
                + _W_DNR * float(stay.statics.dnr_order)
                + _W_CENSUS * z_census
                + _W_YELLOW_MED * float(state.yellow_active)
                + _W_SURGERY_TOMORROW * float(state.surgery_tomorrow)
            )
            scores.append(config.signal_strength * state_score)
    score_arr = np.asarray(scores)
    intercept = _solve_intercept(score_arr, config.base_event_rate)

    pos = 0
    for stay, states in zip(stays, day_states):
        stay_scores = scores[pos : pos + len(states)]
        pos += len(states)
        for state, score in zip(states, stay_scores):
            if stay.discharge_ts is not None and state.key.day >= stay.discharge_ts.date():
                break  # stay truncated by an earlier mortality event
            p = _sigmoid(intercept + score)
            if event_rng.random() < p:
                _plant_event(stay, state.key, event_rng)

    _inject_violations(stays, config, np.random.default_rng(root.spawn(2)[1]))
    return stays


def _generate_stay_body(
    patient_id: str, rng: np.random.Generator, config: CohortConfig
) -> tuple[PatientStay, list[_DayState]]:
    start, end = config.date_range
    span_days = (end - start).days
    los_days = int(rng.integers(2, 9))
    latest_admit = max(span_days - los_days - 1, 0)
    admit_day = start + timedelta(days=int(rng.integers(0, latest_admit + 1)))
    admission = datetime.combine(admit_day, time(0, 0)) + timedelta(
        minutes=int(rng.integers(0, 1440))
    )
    discharge = admission + timedelta(
        days=los_days, minutes=int(rng.integers(-600, 600))
    )
    if discharge - admission < timedelta(hours=25):
        discharge = admission + timedelta(hours=25)

    ward = WARDS[int(rng.integers(0, len(WARDS)))]
    severity = float(rng.normal(0.0, 1.0))
    surgery_offset = int(rng.integers(1, 8)) if rng.random() < 0.25 else None
    statics = TabularStatics(
        age=float(np.round(rng.uniform(18.0, 95.0), 1)),
        alcohol_user=ALCOHOL_ORDER[int(rng.integers(0, 3))],
        dnr_order=bool(rng.random() < 0.08 + 0.10 * _sigmoid(severity)),
        future_surgery_date=surgery_offset,
        admitting_ward=ward,
    )
    location = StayLocation(
        department=ward,
        room=str(100 + int(rng.integers(0, 60))),
        bed=("A", "B")[int(rng.integers(0, 2))],
        service=WARD_SERVICES[ward],
    )
    stay = PatientStay(
        patient_id=patient_id,
        admission_ts=admission,
        discharge_ts=discharge,
        statics=statics,
        location=location,
    )

    for _ in range(int(rng.integers(1, 4))):
        code, desc = _DIAGNOSES[int(rng.integers(0, len(_DIAGNOSES)))]
        stay.diagnoses.append(
            DiagnosisRecord(code=code, description=desc, ts=_jitter_ts(admission, discharge, rng))
        )

    # Occasionally park the patient in the ICU mid-stay to exercise day exclusion.
    if rng.random() < 0.08 and los_days >= 4:
        icu_start = admission + timedelta(days=1, minutes=int(rng.integers(0, 720)))
        icu_end = min(icu_start + timedelta(days=int(rng.integers(1, 3))), discharge)
        if icu_end > icu_start:
            stay.in_icu_intervals.append((icu_start, icu_end))

    green_active = False
    states: list[_DayState] = []
    day = admission.date()
    last_day = discharge.date() - timedelta(days=1)
    while day <= last_day:
        acuity = 0.55 * severity + float(rng.normal(0.0, 0.9))
        day_start = datetime.combine(day, time(0, 0))
        lo = max(admission, day_start)
        hi = min(discharge, day_start + timedelta(days=1) - timedelta(minutes=1))

        hr_avg = spo2_avg = None
        for name, base, slope, noise, smin, smax, nd in _VITAL_PLAN:
            n = int(rng.integers(smin, smax + 1))
            values = []
            for _ in range(n):
                value = float(np.round(base + slope * acuity + rng.normal(0, noise), nd))
                if name == "spo2":
                    value = min(value, 100.0)
                stay.vitals.append(
                    VitalSample(name=name, value=value, ts=_jitter_ts(lo, hi, rng))
                )
                values.append(value)
            if name == "heart_rate":
                hr_avg = float(np.mean(values))
            elif name == "spo2":
                spo2_avg = float(np.mean(values))

        for name, base, slope, noise, nd in _LAB_PLAN:
            if rng.random() < 0.75:
                value = float(np.round(max(base + slope * acuity + rng.normal(0, noise), 0.1), nd))
                stay.labs.append(LabSample(name=name, value=value, ts=_jitter_ts(lo, hi, rng)))

        if rng.random() < 0.4:
            name = _ROUTINE_MEDICATIONS[int(rng.integers(0, len(_ROUTINE_MEDICATIONS)))]
            stay.medications.append(
                MedicationOrder(
                    name=name, dose="1 dose", route=Route.ORAL,
                    action=MedAction.STARTED, ts=_jitter_ts(lo, hi, rng),
                )
            )
        yellow_today = rng.random() < _sigmoid(-2.4 + 1.1 * acuity)
        if yellow_today:
            name = DEFAULT_YELLOW_MEDICATIONS[int(rng.integers(0, len(DEFAULT_YELLOW_MEDICATIONS)))]
            stay.medications.append(
                MedicationOrder(
                    name=name, dose="iv drip", route=Route.INTRAVENOUS,
                    action=MedAction.STARTED, ts=_jitter_ts(lo, hi, rng),
                )
            )
        if not green_active and rng.random() < 0.22:
            name = DEFAULT_GREEN_MEDICATIONS[int(rng.integers(0, len(DEFAULT_GREEN_MEDICATIONS)))]
            stay.medications.append(
                MedicationOrder(
                    name=name, dose="1g iv", route=Route.INTRAVENOUS,
                    action=MedAction.STARTED, ts=_jitter_ts(lo, hi, rng),
                )
            )
            green_active = name
        elif green_active and acuity < -0.3 and rng.random() < 0.5:
            stop_ts = _jitter_ts(lo, hi, rng)
            oral_ts = min(stop_ts + timedelta(minutes=int(rng.integers(30, 300))), hi)
            stay.medications.append(
                MedicationOrder(
                    name=green_active, dose="1g iv", route=Route.INTRAVENOUS,
                    action=MedAction.DISCONTINUED, ts=stop_ts,
                )
            )
            stay.medications.append(
                MedicationOrder(
                    name=green_active, dose="500mg po", route=Route.ORAL,
                    action=MedAction.STARTED, ts=oral_ts,
                )
            )
            green_active = False

        surgery_tomorrow = (
            surgery_offset is not None
            and (day - admission.date()).days + 1 == surgery_offset
        )
        states.append(
            _DayState(
                key=PatientDayKey(patient_id=patient_id, day=day),
                acuity=acuity,
                hr_avg=hr_avg,
                spo2_avg=spo2_avg,
                yellow_active=yellow_today,
                surgery_tomorrow=surgery_tomorrow,
            )
        )
        day += timedelta(days=1)

    stay.vitals.sort(key=lambda s: (s.ts, s.name))
    stay.labs.sort(key=lambda s: (s.ts, s.name))
    stay.medications.sort(key=lambda s: (s.ts, s.name))
    stay.diagnoses.sort(key=lambda s: (s.ts, s.code))
    return stay, states


def _plant_event(stay: PatientStay, key: PatientDayKey, rng: np.random.Generator) -> None:
    lo, hi = key.label_window
    ts = lo + timedelta(minutes=int(rng.integers(1, 1441)))
    if stay.discharge_ts is not None:
        ts = min(ts, stay.discharge_ts)
    kind = _pick_event_kind(rng)
    stay.outcome_events.append(OutcomeEvent(kind=kind, ts=ts))
    stay.outcome_events.sort(key=lambda e: (e.ts, e.kind.value))
    if kind is OutcomeKind.MORTALITY:
        _truncate_stay(stay, ts)
    elif kind is OutcomeKind.ICU_ADMISSION and stay.discharge_ts is not None:
        end = min(ts + timedelta(days=int(rng.integers(1, 3))), stay.discharge_ts)
        if end > ts:
            stay.in_icu_intervals.append((ts, end))
            stay.in_icu_intervals.sort()


def _truncate_stay(stay: PatientStay, ts: datetime) -> None:
    stay.discharge_ts = ts
    stay.vitals = [s for s in stay.vitals if s.ts <= ts]
    stay.labs = [s for s in stay.labs if s.ts <= ts]
    stay.medications = [s for s in stay.medications if s.ts <= ts]
    stay.diagnoses = [s for s in stay.diagnoses if s.ts <= ts]
    stay.outcome_events = [e for e in stay.outcome_events if e.ts <= ts]
    stay.in_icu_intervals = [
        (start, min(end, ts)) for start, end in stay.in_icu_intervals if start < ts
    ]


def _pick_event_kind(rng: np.random.Generator) -> OutcomeKind:
    u = rng.random()
    acc = 0.0
    for kind, weight in _EVENT_KINDS:
        acc += weight
        if u < acc:
            return kind
    return _EVENT_KINDS[-1][0]


def _inject_violations(
    stays: list[PatientStay], config: CohortConfig, rng: np.random.Generator
) -> None:
    n_bad = int(round(config.violation_fraction * len(stays)))
    if n_bad == 0:
        return
    chosen = rng.choice(len(stays), size=n_bad, replace=False)
    for j, idx in enumerate(sorted(int(i) for i in chosen)):
        stay = stays[idx]
        mode = j % 3
        if mode == 0 and stay.admission_ts is not None:
            short_discharge = stay.admission_ts + timedelta(hours=int(rng.integers(2, 23)))
            _truncate_stay(stay, short_discharge)
        elif mode == 1 and stay.admission_ts is not None:
            bad_ts = stay.admission_ts - timedelta(minutes=int(rng.integers(60, 1440)))
            stay.outcome_events.insert(
                0, OutcomeEvent(kind=_pick_event_kind(rng), ts=bad_ts)
            )
        else:
            stay.admission_ts = None


def _ward_census(stays: list[PatientStay]) -> dict[tuple[str, date], int]:
    """End-of-day headcount per (ward, calendar day), from stay intervals only."""
    census: dict[tuple[str, date], int] = {}
    for stay in stays:
        if stay.admission_ts is None or stay.statics is None or stay.discharge_ts is None:
            continue
        ward = stay.statics.admitting_ward
        day = stay.admission_ts.date()
        end = stay.discharge_ts
        while True:
            cut = datetime.combine(day, DAY_CUT)
            if cut >= end:
                break
            if stay.admission_ts <= cut:
                census[(ward, day)] = census.get((ward, day), 0) + 1
            day += timedelta(days=1)
    return census


def hospital_admission_counts(stays: list[PatientStay]) -> dict[date, int]:
    counts: dict[date, int] = {}
    for stay in stays:
        if stay.admission_ts is None:
            continue
        day = stay.admission_ts.date()
        counts[day] = counts.get(day, 0) + 1
    return counts


def ward_census(stays: list[PatientStay]) -> dict[tuple[str, date], int]:
    return _ward_census(stays)


def _solve_intercept(scores: np.ndarray, target_rate: float) -> float:
    """Bisection for c with mean(sigmoid(c + scores)) == target_rate."""
    if scores.size == 0:
        return _logit(target_rate)
    lo, hi = _logit(target_rate) - 20.0, _logit(target_rate) + 20.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if float(np.mean(_sigmoid(mid + scores))) < target_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def _logit(p: float) -> float:
    return math.log(p / (1.0 - p))


def _jitter_ts(lo: datetime, hi: datetime, rng: np.random.Generator) -> datetime:
    span = max(int((hi - lo).total_seconds() // 60), 1)
    return lo + timedelta(minutes=int(rng.integers(0, span)))
