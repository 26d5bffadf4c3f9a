"""Application configuration: one JSON file, flat dataclass, path helpers.

Every CLI verb reads the same config; command-line flags override file
values, which override the defaults here.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from datetime import date
from pathlib import Path

from .alerting import TierThresholds
from .cohort import CohortConfig
from .errors import ConfigurationError
from .features import MODALITIES, FeatureConfig, MedicationSignalConfig

DEFAULT_SWEEP = (0.03, 0.06, 0.12)


@dataclass
class AppConfig:
    data_dir: Path = Path("data")
    seed: int = 0
    n_patients: int = 300
    start: date = date(2024, 1, 1)
    end: date = date(2024, 4, 30)
    base_event_rate: float = 0.05
    signal_strength: float = 1.0
    violation_fraction: float = 0.04
    modalities: tuple[str, ...] = MODALITIES
    med_list_file: Path | None = None
    model_kind: str = "gradient_boosted"
    thresholds: TierThresholds = field(default_factory=TierThresholds)
    sweep_thresholds: tuple[float, ...] = DEFAULT_SWEEP
    host: str = "127.0.0.1"
    port: int = 8000

    # pipeline file layout under data_dir
    @property
    def cohort_file(self) -> Path:
        return self.data_dir / "cohort.jsonl"

    @property
    def kept_file(self) -> Path:
        return self.data_dir / "kept.jsonl"

    @property
    def rejects_file(self) -> Path:
        return self.data_dir / "rejects.json"

    @property
    def integrity_file(self) -> Path:
        return self.data_dir / "integrity.json"

    @property
    def features_file(self) -> Path:
        return self.data_dir / "features.tsv"

    @property
    def model_file(self) -> Path:
        return self.data_dir / "model.json"

    @property
    def metrics_file(self) -> Path:
        return self.data_dir / "metrics.json"

    @property
    def ablation_file(self) -> Path:
        return self.data_dir / "ablation.json"

    @property
    def alerts_dir(self) -> Path:
        return self.data_dir / "alerts"

    @property
    def feedback_file(self) -> Path:
        return self.data_dir / "feedback.jsonl"

    def cohort_config(self) -> CohortConfig:
        return CohortConfig(
            n_patients=self.n_patients,
            date_range=(self.start, self.end),
            base_event_rate=self.base_event_rate,
            seed=self.seed,
            signal_strength=self.signal_strength,
            violation_fraction=self.violation_fraction,
        )

    def feature_config(self) -> FeatureConfig:
        med = (
            MedicationSignalConfig.from_file(self.med_list_file)
            if self.med_list_file is not None
            else MedicationSignalConfig.default()
        )
        return FeatureConfig(med_config=med, modalities=tuple(self.modalities))

    @classmethod
    def from_file(cls, path: str | Path) -> "AppConfig":
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "AppConfig":
        known = {
            "data_dir": Path,
            "seed": int,
            "n_patients": int,
            "start": date.fromisoformat,
            "end": date.fromisoformat,
            "base_event_rate": float,
            "signal_strength": float,
            "violation_fraction": float,
            "modalities": tuple,
            "med_list_file": Path,
            "model_kind": str,
            "sweep_thresholds": tuple,
            "host": str,
            "port": int,
        }
        kwargs = {}
        for key, value in doc.items():
            if key == "thresholds":
                kwargs["thresholds"] = TierThresholds.from_dict(value)
            elif key in known:
                kwargs[key] = known[key](value) if value is not None else None
            else:
                raise ConfigurationError(f"unknown config key {key!r}")
        return cls(**kwargs)

    def override(self, **kwargs) -> "AppConfig":
        changes = {k: v for k, v in kwargs.items() if v is not None}
        return replace(self, **changes)
