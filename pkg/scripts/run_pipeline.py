"""End-to-end pipeline demo on a synthetic ward cohort.

Generates a cohort, applies the eligibility filters, featurizes, grid-searches
a model on the chronological split, reports test metrics, then replays three
consecutive daily scoring runs into an alert store and prints the tier mix.
The output directory is a complete data dir: `wardwatch serve` can expose it,
explanations included.

    python3 scripts/run_pipeline.py --n-patients 600 --out /tmp/wardwatch-demo
"""

import argparse
import sys
from collections import Counter
from datetime import date, timedelta
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from wardwatch.alerting import AlertStore, daily_run
from wardwatch.cohort import CohortConfig, apply_cohort_filters, generate_cohort
from wardwatch.evaluate import auroc, calibration_curve, threshold_sweep
from wardwatch.features import FeatureConfig, featurize_cohort
from wardwatch.model import chronological_split, grid_search, save_model
from wardwatch.records import write_stays


def parse_args():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-patients", type=int, default=600)
    parser.add_argument("--start", type=date.fromisoformat, default=date(2024, 1, 1))
    parser.add_argument("--end", type=date.fromisoformat, default=date(2024, 2, 29))
    parser.add_argument("--rate", type=float, default=0.05)
    parser.add_argument("--signal", type=float, default=1.0)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--kind", default="gradient_boosted")
    parser.add_argument("--out", type=Path, default=Path("data/demo"))
    return parser.parse_args()


def main():
    args = parse_args()
    cfg = CohortConfig(
        n_patients=args.n_patients,
        date_range=(args.start, args.end),
        base_event_rate=args.rate,
        seed=args.seed,
        signal_strength=args.signal,
    )
    stays = generate_cohort(cfg)
    kept, rejected = apply_cohort_filters(stays)
    print(f"cohort: {len(stays)} stays, kept {len(kept)}, rejected {len(rejected)}")
    reasons = Counter(reason.value for _, reason in rejected)
    for reason, count in sorted(reasons.items()):
        print(f"  rejected {count:4d}  {reason}")

    fm = featurize_cohort(kept, FeatureConfig())
    rate = fm.y.mean()
    print(f"features: {fm.X.shape[0]} patient-days x {fm.X.shape[1]}, event rate {rate:.4f}")

    train_fm, val_fm, test_fm = chronological_split(fm)
    result = grid_search(train_fm, val_fm, args.kind, seed=args.seed)
    print(f"grid ({args.kind}), refit on train+val:")
    for hp, val_auc in result.table:
        marker = " <-" if hp == result.best else ""
        print(
            f"  trees={hp.n_estimators:<4d} depth={hp.max_depth}  "
            f"val AUROC {val_auc:.4f}{marker}"
        )

    scores = result.model.predict_proba(test_fm.X)
    print(f"test AUROC {auroc(scores, test_fm.y):.4f} on {len(test_fm.y)} patient-days")
    for m in threshold_sweep(scores, test_fm.y, [0.03, 0.06, 0.12]):
        print(
            f"  thr {m.threshold:.2f}: sens {m.sensitivity:.3f} "
            f"spec {m.specificity:.3f} prec {m.precision:.3f} "
            f"({m.tp + m.fp} flagged)"
        )
    busy = [b for b in calibration_curve(scores, test_fm.y) if b.count >= 30]
    worst = max(abs(b.mean_score - b.event_rate) for b in busy)
    print(f"calibration: worst |mean score - event rate| {worst:.3f} over {len(busy)} bins")

    args.out.mkdir(parents=True, exist_ok=True)
    write_stays(stays, args.out / "cohort.jsonl")
    write_stays(kept, args.out / "kept.jsonl")
    save_model(result.model, args.out / "model.json")
    store = AlertStore(args.out / "alerts")
    mid = args.start + (args.end - args.start) // 2
    for offset in range(3):
        run_date = mid + timedelta(days=offset)
        alerts = daily_run(kept, result.model, run_date, store=store)
        tiers = Counter(a.tier.value for a in alerts)
        print(
            f"daily run {run_date}: {len(alerts)} scored, "
            f"Red {tiers.get('Red', 0)}, Yellow {tiers.get('Yellow', 0)}, "
            f"White {tiers.get('White', 0)}"
        )
    print(f"artifacts in {args.out}")


if __name__ == "__main__":
    main()
