"""Per-patient-day feature extraction.

Turns each scored day's eligible records into one fixed-width vector:
tabular statics plus operational context, five daily statistics per tracked
measurement, medication signal flags, and a pooled text embedding of the
day's medication and diagnosis records.  Missing values are imputed last
observation carried forward within the stay, then 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import date, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .cohort import (
    ALCOHOL_ORDER,
    DEFAULT_GREEN_MEDICATIONS,
    DEFAULT_YELLOW_MEDICATIONS,
    LabSample,
    MedAction,
    MedicationOrder,
    OutcomeLabel,
    PatientDayKey,
    PatientStay,
    Route,
    TabularStatics,
    VitalSample,
    enumerate_patient_days,
    hospital_admission_counts,
    label_day,
    ward_census,
)
from .errors import ConfigurationError, InputValidationError
from .ingest import eligible_records
from .textembed import EMBEDDING_DIM, HashingEmbedder, PromptTemplate, embed_text, pool_day

TABULAR = "tabular"
TIMESERIES = "timeseries"
TEXT = "text"
MODALITIES = (TABULAR, TIMESERIES, TEXT)

DEFAULT_MEASUREMENTS = (
    "heart_rate",
    "spo2",
    "sbp",
    "resp_rate",
    "temperature",
    "potassium",
    "lactate",
    "wbc",
    "creatinine",
)
STAT_NAMES = ("avg", "peak", "min", "last", "trend")

TABULAR_NAMES = (
    "age",
    "alcohol_user",
    "dnr_order",
    "days_to_surgery",
    "day_of_week",
    "ward_census",
    "hospital_admissions",
)
MED_FLAG_NAMES = (
    "green_active",
    "yellow_active",
    "green_deescalated",
    "yellow_then_green",
)


@dataclass(frozen=True)
class DailyStats:
    avg: float | None
    peak: float | None
    min: float | None
    last: float | None
    trend: float | None

    def as_row(self) -> list[float]:
        return [
            v if v is not None else math.nan
            for v in (self.avg, self.peak, self.min, self.last, self.trend)
        ]


EMPTY_STATS = DailyStats(avg=None, peak=None, min=None, last=None, trend=None)


def aggregate_day(
    samples: Sequence[tuple[float, object]], prev_avg: float | None
) -> DailyStats:
    """Daily avg/peak/min, last value by timestamp, and trend vs the previous
    day's average.  Empty input leaves every field missing."""
    if not samples:
        return EMPTY_STATS
    values = [v for v, _ in samples]
    avg = sum(values) / len(values)
    last = max(samples, key=lambda s: s[1])[0]
    trend = avg - prev_avg if prev_avg is not None else None
    return DailyStats(avg=avg, peak=max(values), min=min(values), last=last, trend=trend)


@dataclass(frozen=True)
class MedicationSignalConfig:
    green_names: frozenset[str]
    yellow_names: frozenset[str]

    def __post_init__(self) -> None:
        overlap = self.green_names & self.yellow_names
        if overlap:
            raise ConfigurationError(
                f"medication appears in both lists: {sorted(overlap)}"
            )

    @classmethod
    def default(cls) -> "MedicationSignalConfig":
        return cls(
            green_names=frozenset(DEFAULT_GREEN_MEDICATIONS),
            yellow_names=frozenset(DEFAULT_YELLOW_MEDICATIONS),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "MedicationSignalConfig":
        """Parse a two-section list file:

            [green]
            ceftriaxone
            [yellow]
            norepinephrine

        Blank lines and #-comments are ignored; names are lowercased.
        """
        sections: dict[str, set[str]] = {"green": set(), "yellow": set()}
        current: str | None = None
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("[") and line.endswith("]"):
                current = line[1:-1].strip().lower()
                if current not in sections:
                    raise ConfigurationError(f"unknown medication section [{current}]")
                continue
            if current is None:
                raise ConfigurationError(f"medication name before any section: {line!r}")
            sections[current].add(line.lower())
        return cls(
            green_names=frozenset(sections["green"]),
            yellow_names=frozenset(sections["yellow"]),
        )


@dataclass(frozen=True)
class OperationalContext:
    """Non-patient-specific covariates for one ward-day."""

    day_of_week: int
    ward_census: int
    hospital_admissions: int


def encode_tabular(
    statics: TabularStatics, ops: OperationalContext, days_since_admission: int
) -> dict[str, float]:
    """Map statics plus operational context onto the tabular feature names.

    alcohol_user keeps its clinical ordering (none < former < current);
    days_to_surgery is signed relative to the scoring day and missing (NaN)
    when no surgery is planned.
    """
    if statics.alcohol_user not in ALCOHOL_ORDER:
        raise InputValidationError(
            f"unknown alcohol_user level: {statics.alcohol_user!r}"
        )
    if statics.future_surgery_date is None:
        days_to_surgery = math.nan
    else:
        days_to_surgery = float(statics.future_surgery_date - days_since_admission)
    return {
        "age": statics.age,
        "alcohol_user": float(ALCOHOL_ORDER.index(statics.alcohol_user)),
        "dnr_order": float(statics.dnr_order),
        "days_to_surgery": days_to_surgery,
        "day_of_week": float(ops.day_of_week),
        "ward_census": float(ops.ward_census),
        "hospital_admissions": float(ops.hospital_admissions),
    }


def medication_signals(
    orders: Sequence[MedicationOrder],
    config: MedicationSignalConfig,
    day: date,
) -> dict[str, float]:
    """Signal flags from the order history up to the scoring day's cut.

    green_active: a green-list drug has an open intravenous order.
    yellow_active: a yellow-list drug has an open order on any route.
    green_deescalated: a green IV order was discontinued today with an oral
    order of the same drug started today and no later IV restart.
    yellow_then_green: any yellow order so far, with green currently active.
    """
    iv_green_state: dict[str, MedAction] = {}
    yellow_state: dict[str, MedAction] = {}
    saw_yellow = False
    deescalated = 0.0
    stopped_today: dict[str, bool] = {}
    oral_today: set[str] = set()

    for order in orders:
        name = order.name.lower()
        if name in config.yellow_names:
            saw_yellow = True
            yellow_state[name] = order.action
        if name in config.green_names:
            if order.route is Route.INTRAVENOUS:
                iv_green_state[name] = order.action
                if order.ts.date() == day:
                    if order.action is MedAction.DISCONTINUED:
                        stopped_today[name] = True
                    else:
                        stopped_today[name] = False
            elif order.route is Route.ORAL and order.ts.date() == day:
                if order.action in (MedAction.STARTED, MedAction.CONTINUED):
                    oral_today.add(name)

    green_active = any(
        action in (MedAction.STARTED, MedAction.CONTINUED)
        for action in iv_green_state.values()
    )
    yellow_active = any(
        action in (MedAction.STARTED, MedAction.CONTINUED)
        for action in yellow_state.values()
    )
    for name, stopped in stopped_today.items():
        if stopped and name in oral_today:
            deescalated = 1.0
    return {
        "green_active": float(green_active),
        "yellow_active": float(yellow_active),
        "green_deescalated": deescalated,
        "yellow_then_green": float(saw_yellow and green_active),
    }


@dataclass(frozen=True)
class FeatureManifest:
    names: tuple[str, ...]
    modalities: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.modalities):
            raise ConfigurationError("manifest names and modality tags differ in length")
        bad = set(self.modalities) - set(MODALITIES)
        if bad:
            raise ConfigurationError(f"unknown modality tags: {sorted(bad)}")
        if len(set(self.names)) != len(self.names):
            raise ConfigurationError("duplicate feature names in manifest")

    def __len__(self) -> int:
        return len(self.names)

    def indices(self, modalities: Sequence[str]) -> np.ndarray:
        wanted = set(modalities)
        return np.array(
            [i for i, m in enumerate(self.modalities) if m in wanted], dtype=int
        )

    def index_of(self, name: str) -> int:
        return self.names.index(name)

    def to_dict(self) -> dict:
        return {"names": list(self.names), "modalities": list(self.modalities)}

    @classmethod
    def from_dict(cls, doc: dict) -> "FeatureManifest":
        return cls(names=tuple(doc["names"]), modalities=tuple(doc["modalities"]))


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    manifest: FeatureManifest
    patient_day: PatientDayKey


@dataclass
class FeatureConfig:
    measurements: tuple[str, ...] = DEFAULT_MEASUREMENTS
    med_config: MedicationSignalConfig = field(
        default_factory=MedicationSignalConfig.default
    )
    embedding_dim: int = EMBEDDING_DIM
    modalities: tuple[str, ...] = MODALITIES

    def validate(self) -> None:
        bad = set(self.modalities) - set(MODALITIES)
        if bad:
            raise ConfigurationError(f"unknown modalities requested: {sorted(bad)}")
        if not self.modalities:
            raise ConfigurationError("at least one modality is required")


def build_manifest(config: FeatureConfig) -> FeatureManifest:
    names: list[str] = []
    tags: list[str] = []
    if TABULAR in config.modalities:
        names.extend(TABULAR_NAMES)
        tags.extend([TABULAR] * len(TABULAR_NAMES))
    if TIMESERIES in config.modalities:
        for m in config.measurements:
            for stat in STAT_NAMES:
                names.append(f"{m}_{stat}")
                tags.append(TIMESERIES)
    if TEXT in config.modalities:
        names.extend(MED_FLAG_NAMES)
        tags.extend([TEXT] * len(MED_FLAG_NAMES))
        for j in range(config.embedding_dim):
            names.append(f"emb_{j:03d}")
            tags.append(TEXT)
    return FeatureManifest(names=tuple(names), modalities=tuple(tags))


def assemble_vector(
    tabular: dict[str, float] | None,
    stats: dict[str, DailyStats] | None,
    med_flags: dict[str, float] | None,
    text_embedding: np.ndarray | None,
    manifest: FeatureManifest,
    patient_day: PatientDayKey,
) -> FeatureVector:
    """Concatenate the per-modality pieces in manifest order.

    Each manifest entry must be resolvable from the provided parts; a part
    given for a modality the manifest does not list (or vice versa) is a
    pipeline wiring error.
    """
    values = np.empty(len(manifest))
    pos = 0
    for name, modality in zip(manifest.names, manifest.modalities):
        if modality == TABULAR:
            if tabular is None or name not in tabular:
                raise ConfigurationError(f"manifest expects tabular entry {name!r}")
            values[pos] = tabular[name]
        elif modality == TIMESERIES:
            measurement, _, stat = name.rpartition("_")
            if stats is None or measurement not in stats:
                raise ConfigurationError(f"manifest expects timeseries entry {name!r}")
            value = getattr(stats[measurement], stat)
            values[pos] = value if value is not None else math.nan
        else:
            if name in MED_FLAG_NAMES:
                if med_flags is None:
                    raise ConfigurationError(f"manifest expects med flag {name!r}")
                values[pos] = med_flags[name]
            else:
                if text_embedding is None:
                    raise ConfigurationError(f"manifest expects text entry {name!r}")
                j = int(name.split("_")[1])
                if j >= text_embedding.shape[0]:
                    raise ConfigurationError(
                        f"text embedding dimension {text_embedding.shape[0]} "
                        f"too small for {name!r}"
                    )
                values[pos] = text_embedding[j]
        pos += 1
    return FeatureVector(values=values, manifest=manifest, patient_day=patient_day)


def impute(matrix: np.ndarray) -> np.ndarray:
    """Fill missing cells: last observation carried forward down the rows
    (one stay, chronological), then 0 for columns never observed."""
    out = np.array(matrix, dtype=float)
    for t in range(1, out.shape[0]):
        nan = np.isnan(out[t])
        out[t, nan] = out[t - 1, nan]
    out[np.isnan(out)] = 0.0
    return out


# ---------------------------------------------------------------------------
# Cohort-level driver
# ---------------------------------------------------------------------------


@dataclass
class FeatureMatrix:
    X: np.ndarray
    y: np.ndarray
    keys: list[PatientDayKey]
    manifest: FeatureManifest

    def modality_view(self, modalities: Sequence[str]) -> "FeatureMatrix":
        idx = self.manifest.indices(modalities)
        sub = FeatureManifest(
            names=tuple(self.manifest.names[i] for i in idx),
            modalities=tuple(self.manifest.modalities[i] for i in idx),
        )
        return FeatureMatrix(
            X=self.X[:, idx], y=self.y, keys=self.keys, manifest=sub
        )


def featurize_stay(
    stay: PatientStay,
    keys: list[PatientDayKey],
    ops_by_day: dict[date, OperationalContext],
    config: FeatureConfig,
    manifest: FeatureManifest,
    embedder=None,
    prompt: PromptTemplate | None = None,
) -> np.ndarray:
    """Feature rows for one stay's scored days, imputed stay-locally."""
    if embedder is None:
        embedder = HashingEmbedder(config.embedding_dim)
    if prompt is None:
        prompt = PromptTemplate()

    samples_by_day: dict[date, dict[str, list[tuple[float, object]]]] = {}
    for rec in list(stay.vitals) + list(stay.labs):
        samples_by_day.setdefault(rec.ts.date(), {}).setdefault(rec.name, []).append(
            (rec.value, rec.ts)
        )

    admission_date = stay.admission_ts.date()
    rows = []
    for key in keys:
        day_records = eligible_records(stay, key)
        day_records = [r for r in day_records if r.ts <= key.cut]

        tabular = None
        if TABULAR in config.modalities:
            ops = ops_by_day.get(
                key.day, OperationalContext(key.day.weekday(), 0, 0)
            )
            tabular = encode_tabular(
                stay.statics, ops, (key.day - admission_date).days
            )

        stats = None
        if TIMESERIES in config.modalities:
            today = samples_by_day.get(key.day, {})
            yesterday = samples_by_day.get(key.day - timedelta(days=1), {})
            stats = {}
            for m in config.measurements:
                prev = yesterday.get(m)
                prev_avg = (
                    sum(v for v, _ in prev) / len(prev) if prev else None
                )
                stats[m] = aggregate_day(today.get(m, []), prev_avg)

        med_flags = None
        text_vec = None
        if TEXT in config.modalities:
            history = [m for m in stay.medications if m.ts <= key.cut]
            med_flags = medication_signals(history, config.med_config, key.day)
            embeddings = []
            for rec in day_records:
                if isinstance(rec, (VitalSample, LabSample)):
                    continue
                text = _record_text(rec)
                vec = embed_text(embedder, prompt, text)
                if vec is None:
                    vec = np.zeros(config.embedding_dim)
                embeddings.append(vec)
            text_vec = pool_day(embeddings, config.embedding_dim)

        rows.append(
            assemble_vector(tabular, stats, med_flags, text_vec, manifest, key).values
        )
    if not rows:
        return np.empty((0, len(manifest)))
    return impute(np.vstack(rows))


def _record_text(rec) -> str:
    if isinstance(rec, MedicationOrder):
        return f"medication {rec.name} {rec.dose} {rec.route.value} {rec.action.value}"
    return f"diagnosis {rec.description}"


def featurize_cohort(
    stays: list[PatientStay],
    config: FeatureConfig | None = None,
    embedder=None,
    prompt: PromptTemplate | None = None,
    until: date | None = None,
) -> FeatureMatrix:
    """Feature matrix plus labels for every scorable day of the given stays.

    Stays are assumed to have passed cohort filters.  Operational context
    (ward census, admission counts) is computed from the same stays.
    """
    if config is None:
        config = FeatureConfig()
    config.validate()
    manifest = build_manifest(config)
    census = ward_census(stays)
    admissions = hospital_admission_counts(stays)
    if embedder is None:
        embedder = HashingEmbedder(config.embedding_dim)
    if prompt is None:
        prompt = PromptTemplate()

    all_keys: list[PatientDayKey] = []
    blocks: list[np.ndarray] = []
    labels: list[int] = []
    for stay in stays:
        keys = enumerate_patient_days(stay, until=until)
        if not keys:
            continue
        ward = stay.statics.admitting_ward if stay.statics else ""
        ops_by_day = {
            key.day: OperationalContext(
                day_of_week=key.day.weekday(),
                ward_census=census.get((ward, key.day), 0),
                hospital_admissions=admissions.get(key.day, 0),
            )
            for key in keys
        }
        block = featurize_stay(
            stay, keys, ops_by_day, config, manifest, embedder, prompt
        )
        blocks.append(block)
        all_keys.extend(keys)
        labels.extend(label_day(stay, key).value for key in keys)

    if blocks:
        X = np.vstack(blocks)
    else:
        X = np.empty((0, len(manifest)))
    return FeatureMatrix(
        X=X, y=np.asarray(labels, dtype=float), keys=all_keys, manifest=manifest
    )


# ---------------------------------------------------------------------------
# Persistence: tab-separated table plus a manifest sidecar
# ---------------------------------------------------------------------------


def save_matrix(fm: FeatureMatrix, table_path: str | Path) -> None:
    table_path = Path(table_path)
    table_path.parent.mkdir(parents=True, exist_ok=True)
    with table_path.open("w", encoding="utf-8") as fh:
        fh.write("patient_id\tday\tlabel\t" + "\t".join(fm.manifest.names) + "\n")
        for key, label, row in zip(fm.keys, fm.y, fm.X):
            cells = "\t".join(repr(float(v)) for v in row)
            fh.write(f"{key.patient_id}\t{key.day.isoformat()}\t{int(label)}\t{cells}\n")
    sidecar = table_path.with_suffix(table_path.suffix + ".manifest.json")
    sidecar.write_text(json.dumps(fm.manifest.to_dict(), indent=2) + "\n")


def load_matrix(table_path: str | Path) -> FeatureMatrix:
    table_path = Path(table_path)
    sidecar = table_path.with_suffix(table_path.suffix + ".manifest.json")
    try:
        manifest = FeatureManifest.from_dict(json.loads(sidecar.read_text()))
    except OSError as exc:
        raise ConfigurationError(f"cannot read feature table {table_path}: {exc}") from exc
    keys: list[PatientDayKey] = []
    labels: list[int] = []
    rows: list[list[float]] = []
    with table_path.open("r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if tuple(header[3:]) != manifest.names:
            raise ConfigurationError(
                f"table {table_path} does not match its manifest sidecar"
            )
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            keys.append(
                PatientDayKey(patient_id=parts[0], day=date.fromisoformat(parts[1]))
            )
            labels.append(int(parts[2]))
            rows.append([float(v) for v in parts[3:]])
    X = np.asarray(rows) if rows else np.empty((0, len(manifest)))
    return FeatureMatrix(
        X=X, y=np.asarray(labels, dtype=float), keys=keys, manifest=manifest
    )
