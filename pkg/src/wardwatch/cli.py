"""Command-line entry point.

Exit codes: 0 on success, 2 for validation/configuration problems, 3 when an
input file is unusable as a whole.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import date
from pathlib import Path

from . import alerting, evaluate, ingest, model as model_mod, records
from .cohort import enumerate_patient_days, generate_cohort, label_day
from .config import AppConfig
from .errors import CorpusError, WardwatchError
from .features import featurize_cohort, load_matrix, save_matrix
from .model import (
    GRADIENT_BOOSTED,
    RANDOM_FOREST,
    chronological_split,
    grid_search,
    load_model,
    save_model,
)
from .service import build_explainer, serve_directory

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_CORPUS = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wardwatch",
        description="daily deterioration-risk scoring, explanation, and alerting",
    )
    parser.add_argument("--config", type=Path, help="JSON config file")
    parser.add_argument("--seed", type=int, help="override the pipeline seed")
    parser.add_argument("--data-dir", type=Path, help="pipeline data directory")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("generate", help="write a synthetic cohort record file")
    p.add_argument("--n-patients", type=int)
    p.add_argument("--start", type=date.fromisoformat)
    p.add_argument("--end", type=date.fromisoformat)
    p.add_argument("--rate", type=float, help="target daily event rate")
    p.add_argument("--signal", type=float, help="planted signal strength")
    p.add_argument("--violations", type=float, help="fraction of rule-violating stays")

    p = sub.add_parser("ingest", help="parse, validate, and filter a cohort file")
    p.add_argument("--input", type=Path, help="cohort record file")

    p = sub.add_parser("featurize", help="build the patient-day feature table")
    p.add_argument("--input", type=Path, help="kept-stays record file")
    p.add_argument("--modalities", nargs="+", choices=["tabular", "timeseries", "text"])

    p = sub.add_parser("train", help="grid-search and fit the final model")
    p.add_argument("--kind", choices=[GRADIENT_BOOSTED, RANDOM_FOREST])
    p.add_argument("--features", type=Path)

    p = sub.add_parser("evaluate", help="test-split metrics for the trained model")
    p.add_argument("--features", type=Path)
    p.add_argument("--model", type=Path)

    p = sub.add_parser("ablate", help="modality-ablation comparison table")
    p.add_argument("--features", type=Path)
    p.add_argument(
        "--kinds",
        nargs="+",
        choices=[GRADIENT_BOOSTED, RANDOM_FOREST],
        default=[GRADIENT_BOOSTED, RANDOM_FOREST],
    )

    p = sub.add_parser("score", help="run the daily scoring cycle for one date")
    p.add_argument("--date", type=date.fromisoformat, required=True)
    p.add_argument("--cohort", type=Path, help="cohort record file")
    p.add_argument("--model", type=Path)
    p.add_argument(
        "--record-labels",
        action="store_true",
        help="also store realized outcome labels (synthetic cohorts only)",
    )

    p = sub.add_parser("explain", help="top SHAP drivers for one scored patient-day")
    p.add_argument("--patient-day", required=True, help="e.g. p00042:2024-03-01")
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--cohort", type=Path)
    p.add_argument("--model", type=Path)

    p = sub.add_parser("whatif", help="re-tier stored alerts under candidate thresholds")
    p.add_argument("--red-level", type=float, required=True)
    p.add_argument("--red-delta", type=float, required=True)
    p.add_argument("--yellow-level", type=float, required=True)
    p.add_argument("--yellow-delta", type=float, required=True)
    p.add_argument("--start", type=date.fromisoformat)
    p.add_argument("--end", type=date.fromisoformat)

    p = sub.add_parser("serve", help="start the alert service")
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    return parser


def _load_config(args: argparse.Namespace) -> AppConfig:
    cfg = AppConfig.from_file(args.config) if args.config else AppConfig()
    return cfg.override(seed=args.seed, data_dir=args.data_dir)


def _load_stays(path: Path) -> list:
    stays, _ = ingest.parse_cohort_file(path)
    return stays


def cmd_generate(cfg: AppConfig, args) -> int:
    cohort_cfg = cfg.cohort_config()
    if args.n_patients is not None:
        cohort_cfg.n_patients = args.n_patients
    if args.start is not None or args.end is not None:
        cohort_cfg.date_range = (
            args.start or cohort_cfg.date_range[0],
            args.end or cohort_cfg.date_range[1],
        )
    if args.rate is not None:
        cohort_cfg.base_event_rate = args.rate
    if args.signal is not None:
        cohort_cfg.signal_strength = args.signal
    if args.violations is not None:
        cohort_cfg.violation_fraction = args.violations
    stays = generate_cohort(cohort_cfg)
    records.write_stays(stays, cfg.cohort_file)
    n_days = sum(len(enumerate_patient_days(s)) for s in stays if s.admission_ts)
    print(f"wrote {len(stays)} stays ({n_days} patient-days) to {cfg.cohort_file}")
    return EXIT_OK


def cmd_ingest(cfg: AppConfig, args) -> int:
    path = args.input or cfg.cohort_file
    stays, report = ingest.parse_cohort_file(path)
    kept, rejected = alerting.apply_cohort_filters(stays)
    keys = [key for stay in kept for key in enumerate_patient_days(stay)]
    audit = ingest.leakage_audit(kept, keys)
    report.leakage_violations = audit.leakage_violations

    records.write_stays(kept, cfg.kept_file)
    cfg.rejects_file.parent.mkdir(parents=True, exist_ok=True)
    cfg.rejects_file.write_text(
        json.dumps(
            [
                {"patient_id": stay.patient_id, "reason": reason.value}
                for stay, reason in rejected
            ],
            indent=2,
        )
        + "\n"
    )
    report.write(cfg.integrity_file)
    print(
        f"kept {len(kept)} stays, rejected {len(rejected)}, "
        f"malformed lines {report.malformed_lines}, "
        f"leakage violations {audit.leakage_violations}"
    )
    return EXIT_OK


def cmd_featurize(cfg: AppConfig, args) -> int:
    path = args.input or cfg.kept_file
    stays = _load_stays(path)
    fc = cfg.feature_config()
    if args.modalities:
        fc.modalities = tuple(args.modalities)
    fm = featurize_cohort(stays, config=fc)
    save_matrix(fm, cfg.features_file)
    print(
        f"wrote {fm.X.shape[0]} patient-days x {fm.X.shape[1]} features "
        f"to {cfg.features_file}"
    )
    return EXIT_OK


def cmd_train(cfg: AppConfig, args) -> int:
    fm = load_matrix(args.features or cfg.features_file)
    kind = args.kind or cfg.model_kind
    train_fm, val_fm, test_fm = chronological_split(fm)
    result = grid_search(train_fm, val_fm, kind, seed=cfg.seed)
    save_model(result.model, cfg.model_file)
    print(f"grid ({kind}):")
    for hp, auc in result.table:
        marker = " *" if hp == result.best else ""
        print(
            f"  n_estimators={hp.n_estimators:<4d} max_depth={hp.max_depth} "
            f"val AUROC {auc:.3f}{marker}"
        )
    test_auc = evaluate.auroc(result.model.predict_proba(test_fm.X), test_fm.y)
    print(f"test AUROC {test_auc:.3f}; model saved to {cfg.model_file}")
    return EXIT_OK


def cmd_evaluate(cfg: AppConfig, args) -> int:
    fm = load_matrix(args.features or cfg.features_file)
    ensemble = load_model(args.model or cfg.model_file)
    model_mod.require_matching_manifest(ensemble, fm.manifest)
    _, _, test_fm = chronological_split(fm)
    scores = ensemble.predict_proba(test_fm.X)
    auc = evaluate.auroc(scores, test_fm.y)
    sweep = evaluate.threshold_sweep(scores, test_fm.y, cfg.sweep_thresholds)
    calib = evaluate.calibration_curve(scores, test_fm.y)
    doc = {
        "test_auroc": auc,
        "sweep": [m.to_dict() for m in sweep],
        "calibration": [
            {"mean_score": b.mean_score, "event_rate": b.event_rate, "count": b.count}
            for b in calib
        ],
    }
    cfg.metrics_file.parent.mkdir(parents=True, exist_ok=True)
    cfg.metrics_file.write_text(json.dumps(doc, indent=2) + "\n")
    print(f"test AUROC {auc:.3f}")
    for m in sweep:
        print(
            f"  thr {m.threshold:.2f}: sens {m.sensitivity:.3f} "
            f"spec {m.specificity:.3f} prec {m.precision:.3f}"
        )
    print(f"metrics written to {cfg.metrics_file}")
    return EXIT_OK


def cmd_ablate(cfg: AppConfig, args) -> int:
    fm = load_matrix(args.features or cfg.features_file)
    cells = evaluate.ablation_table(fm, kinds=args.kinds, seed=cfg.seed)
    print(evaluate.render_ablation_table(cells))
    cfg.ablation_file.parent.mkdir(parents=True, exist_ok=True)
    cfg.ablation_file.write_text(evaluate.cells_to_json(cells) + "\n")
    print(f"table written to {cfg.ablation_file}")
    return EXIT_OK


def cmd_score(cfg: AppConfig, args) -> int:
    stays = _load_stays(args.cohort or cfg.cohort_file)
    ensemble = load_model(args.model or cfg.model_file)
    store = alerting.AlertStore(cfg.alerts_dir)
    alerts = alerting.daily_run(
        stays,
        ensemble,
        run_date=args.date,
        store=store,
        thresholds=cfg.thresholds,
        feature_config=cfg.feature_config(),
    )
    if args.record_labels:
        kept, _ = alerting.apply_cohort_filters(stays)
        labels = {}
        for stay in kept:
            for key in enumerate_patient_days(stay):
                if key.day == args.date:
                    labels[stay.patient_id] = label_day(stay, key).value
        store.write_labels(args.date, labels)
    counts = {tier.value: 0 for tier in alerting.Tier}
    for alert in alerts:
        counts[alert.tier.value] += 1
    print(
        f"scored {len(alerts)} patient-days for {args.date}: "
        + ", ".join(f"{k} {v}" for k, v in counts.items())
    )
    return EXIT_OK


def cmd_explain(cfg: AppConfig, args) -> int:
    from .cohort import PatientDayKey

    stays = _load_stays(args.cohort or cfg.cohort_file)
    kept, _ = alerting.apply_cohort_filters(stays)
    ensemble = load_model(args.model or cfg.model_file)
    explainer = build_explainer(kept, ensemble, cfg.feature_config(), seed=cfg.seed)
    key = PatientDayKey.from_string(args.patient_day)
    result = explainer(key, args.k)
    if result is None:
        raise WardwatchError(f"{args.patient_day} is not a scorable patient-day")
    print(f"{result['patient_day']}  margin {result['prediction_margin']:+.4f} "
          f"(baseline {result['base_value']:+.4f})")
    for d in result["drivers"]:
        print(f"  {d['feature']:<28} phi {d['phi']:+.5f}  value {d['value']:g}")
    return EXIT_OK


def cmd_whatif(cfg: AppConfig, args) -> int:
    store = alerting.AlertStore(cfg.alerts_dir)
    candidate = alerting.TierThresholds(
        red_level=args.red_level,
        red_delta=args.red_delta,
        yellow_level=args.yellow_level,
        yellow_delta=args.yellow_delta,
    )
    alerts = []
    labels: dict[str, int] = {}
    for run_date in store.run_dates():
        if args.start and run_date < args.start:
            continue
        if args.end and run_date > args.end:
            continue
        alerts.extend(store.read_run(run_date))
        for pid, label in store.read_labels(run_date).items():
            labels[f"{pid}:{run_date.isoformat()}"] = label
    summary = alerting.threshold_whatif(alerts, candidate, labels)
    print(json.dumps(summary.to_dict(), indent=2))
    return EXIT_OK


def cmd_serve(cfg: AppConfig, args) -> int:
    import uvicorn

    app = serve_directory(cfg.data_dir, thresholds=cfg.thresholds)
    uvicorn.run(app, host=args.host or cfg.host, port=args.port or cfg.port)
    return EXIT_OK


_COMMANDS = {
    "generate": cmd_generate,
    "ingest": cmd_ingest,
    "featurize": cmd_featurize,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "score": cmd_score,
    "explain": cmd_explain,
    "whatif": cmd_whatif,
    "serve": cmd_serve,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        return _COMMANDS[args.verb](cfg, args)
    except CorpusError as exc:
        print(f"corpus error: {exc}", file=sys.stderr)
        return EXIT_CORPUS
    except WardwatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
