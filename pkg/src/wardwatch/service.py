"""HTTP service over daily run outputs: alerts, risk histories, explanations,
feedback capture, threshold what-if, and model status.

The app is built from an explicit context object so tests can assemble one
from fixtures; nothing here recomputes risks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import date, datetime
from pathlib import Path
from typing import Callable

import numpy as np
from fastapi import FastAPI, HTTPException, Query
from pydantic import BaseModel

from .alerting import (
    AlertStore,
    FeedbackEntry,
    FeedbackLedger,
    FeedbackVerdict,
    Tier,
    TierThresholds,
    retrain_schedule_check,
    threshold_whatif,
)
from .cohort import PatientDayKey, PatientStay
from .errors import InputValidationError, WardwatchError
from .explain import tree_shap, top_drivers
from .features import FeatureConfig, featurize_cohort
from .model import TreeEnsemble

DEFAULT_EXPLANATION_K = 10

Explainer = Callable[[PatientDayKey, int], dict | None]


@dataclass
class ServiceContext:
    store: AlertStore
    ledger: FeedbackLedger
    thresholds: TierThresholds = field(default_factory=TierThresholds)
    model: TreeEnsemble | None = None
    explainer: Explainer | None = None
    today: Callable[[], date] = date.today


def build_explainer(
    stays: list[PatientStay],
    model: TreeEnsemble,
    feature_config: FeatureConfig | None = None,
    background_size: int = 200,
    seed: int = 0,
) -> Explainer:
    """Explainer over precomputed feature rows with a fixed, seeded
    background subsample of the same cohort."""
    fm = featurize_cohort(stays, config=feature_config)
    rows = {key.isoformat(): i for i, key in enumerate(fm.keys)}
    rng = np.random.default_rng(seed)
    if fm.X.shape[0] > background_size:
        background = fm.X[rng.choice(fm.X.shape[0], background_size, replace=False)]
    else:
        background = fm.X

    def explain(key: PatientDayKey, k: int) -> dict | None:
        i = rows.get(key.isoformat())
        if i is None:
            return None
        expl = tree_shap(model, fm.X[i], background, feature_names=fm.manifest.names)
        drivers = top_drivers(expl, k)
        return {
            "patient_day": key.isoformat(),
            "base_value": expl.base_value,
            "prediction_margin": expl.prediction_margin,
            "drivers": [
                {"feature": name, "phi": phi, "value": value}
                for name, phi, value in drivers
            ],
        }

    return explain


class FeedbackBody(BaseModel):
    patient_day: str
    verdict: str
    note: str = ""
    author: str
    ts: str | None = None


class WhatIfBody(BaseModel):
    red_level: float
    red_delta: float
    yellow_level: float
    yellow_delta: float
    start: str | None = None
    end: str | None = None


def create_app(ctx: ServiceContext) -> FastAPI:
    app = FastAPI(title="deterioration alert service")

    @app.exception_handler(WardwatchError)
    async def _pipeline_error(request, exc: WardwatchError):
        from fastapi.responses import JSONResponse

        status = 422 if isinstance(exc, InputValidationError) else 409
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/runs/{run_date}/alerts")
    def run_alerts(
        run_date: date,
        tier: str | None = Query(default=None),
        department: str | None = Query(default=None),
    ):
        if not ctx.store.has_run(run_date):
            raise HTTPException(status_code=404, detail=f"no run for {run_date}")
        alerts = ctx.store.read_run(run_date)
        if tier is not None:
            try:
                wanted = Tier(tier)
            except ValueError as exc:
                raise InputValidationError(f"unknown tier {tier!r}") from exc
            alerts = [a for a in alerts if a.tier is wanted]
        if department is not None:
            alerts = [a for a in alerts if a.department == department]
        return {
            "run_date": run_date.isoformat(),
            "thresholds": ctx.thresholds.to_dict(),
            "alerts": [a.to_dict() for a in alerts],
        }

    @app.get("/patients/{patient_id}/risk-history")
    def risk_history(patient_id: str):
        history = ctx.store.patient_history(patient_id)
        if not history:
            raise HTTPException(
                status_code=404, detail=f"no alerts for patient {patient_id}"
            )
        return {
            "patient_id": patient_id,
            "history": [a.to_dict() for a in history],
        }

    @app.get("/alerts/{patient_day}/explanation")
    def explanation(patient_day: str, k: int = Query(default=DEFAULT_EXPLANATION_K, ge=1)):
        key = PatientDayKey.from_string(patient_day)
        if ctx.store.find_alert(key) is None:
            raise HTTPException(status_code=404, detail=f"no alert for {patient_day}")
        if ctx.explainer is None:
            raise HTTPException(status_code=404, detail="explanations not configured")
        result = ctx.explainer(key, k)
        if result is None:
            raise HTTPException(
                status_code=404, detail=f"no explanation for {patient_day}"
            )
        return result

    @app.post("/feedback")
    def feedback(body: FeedbackBody):
        try:
            verdict = FeedbackVerdict(body.verdict)
        except ValueError as exc:
            raise InputValidationError(f"unknown verdict {body.verdict!r}") from exc
        try:
            ts = datetime.fromisoformat(body.ts) if body.ts else datetime.now()
        except ValueError as exc:
            raise InputValidationError(f"bad timestamp {body.ts!r}") from exc
        entry = FeedbackEntry(
            patient_day=PatientDayKey.from_string(body.patient_day),
            verdict=verdict,
            note=body.note,
            author=body.author,
            ts=ts,
        )
        return ctx.ledger.record_feedback(entry)

    @app.post("/thresholds/whatif")
    def whatif(body: WhatIfBody):
        candidate = TierThresholds(
            red_level=body.red_level,
            red_delta=body.red_delta,
            yellow_level=body.yellow_level,
            yellow_delta=body.yellow_delta,
        )
        try:
            start = date.fromisoformat(body.start) if body.start else None
            end = date.fromisoformat(body.end) if body.end else None
        except ValueError as exc:
            raise InputValidationError(f"bad date filter: {exc}") from exc
        alerts = []
        labels: dict[str, int] = {}
        for run_date in ctx.store.run_dates():
            if start is not None and run_date < start:
                continue
            if end is not None and run_date > end:
                continue
            alerts.extend(ctx.store.read_run(run_date))
            for pid, label in ctx.store.read_labels(run_date).items():
                labels[f"{pid}:{run_date.isoformat()}"] = label
        summary = threshold_whatif(alerts, candidate, labels)
        return summary.to_dict()

    @app.get("/model/status")
    def model_status():
        if ctx.model is None:
            raise HTTPException(status_code=404, detail="no model loaded")
        m = ctx.model
        return {
            "kind": m.kind,
            "trained_on": m.trained_on.isoformat() if m.trained_on else None,
            "staleness": retrain_schedule_check(m.trained_on, ctx.today()),
            "manifest_hash": m.manifest_hash,
            "n_features": m.n_features,
            "hyperparams": m.hyperparams.to_dict(),
            "thresholds": ctx.thresholds.to_dict(),
        }

    return app


def serve_directory(
    data_dir: str | Path,
    thresholds: TierThresholds | None = None,
) -> FastAPI:
    """App wired to a pipeline data directory (alerts/, feedback.jsonl,
    model.json, kept.jsonl)."""
    from .model import load_model
    from .records import stay_from_dict
    import json

    data_dir = Path(data_dir)
    store = AlertStore(data_dir / "alerts")
    ledger = FeedbackLedger(data_dir / "feedback.jsonl", store)
    ctx = ServiceContext(
        store=store,
        ledger=ledger,
        thresholds=thresholds or TierThresholds(),
    )
    model_path = data_dir / "model.json"
    kept_path = data_dir / "kept.jsonl"
    if model_path.exists():
        ctx.model = load_model(model_path)
        if kept_path.exists():
            stays = [
                stay_from_dict(json.loads(line))
                for line in kept_path.read_text(encoding="utf-8").splitlines()
                if line
            ]
            ctx.explainer = build_explainer(stays, ctx.model)
    return create_app(ctx)
