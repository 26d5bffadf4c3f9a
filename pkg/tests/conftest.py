"""Shared fixtures: one small end-to-end cohort pipeline reused across tests.

Expensive objects (cohort, feature matrix, trained model, alert store) are
session-scoped; tests must not mutate them.
"""

from datetime import date

import pytest

from wardwatch.alerting import AlertStore, FeedbackLedger, daily_run
from wardwatch.cohort import CohortConfig, apply_cohort_filters, generate_cohort
from wardwatch.features import FeatureConfig, featurize_cohort
from wardwatch.model import GRADIENT_BOOSTED, HyperParams, train
from wardwatch.textembed import HashingEmbedder


SMALL_COHORT = CohortConfig(
    n_patients=130,
    date_range=(date(2024, 1, 1), date(2024, 2, 15)),
    base_event_rate=0.05,
    seed=42,
    signal_strength=1.0,
    violation_fraction=0.05,
)

RUN_DATES = (date(2024, 1, 20), date(2024, 1, 21), date(2024, 1, 22))


@pytest.fixture(scope="session")
def small_cohort():
    return generate_cohort(SMALL_COHORT)


@pytest.fixture(scope="session")
def small_kept(small_cohort):
    kept, _ = apply_cohort_filters(small_cohort)
    return kept


@pytest.fixture(scope="session")
def small_rejected(small_cohort):
    _, rejected = apply_cohort_filters(small_cohort)
    return rejected


@pytest.fixture(scope="session")
def small_fm(small_kept):
    return featurize_cohort(small_kept, FeatureConfig(), HashingEmbedder())


@pytest.fixture(scope="session")
def small_model(small_fm):
    return train(
        GRADIENT_BOOSTED,
        small_fm.X,
        small_fm.y,
        HyperParams(n_estimators=20, max_depth=3),
        seed=0,
        manifest=small_fm.manifest,
        trained_on=date(2024, 2, 10),
    )


@pytest.fixture(scope="session")
def alert_store(tmp_path_factory, small_kept, small_model):
    """Store populated by three consecutive daily runs."""
    store = AlertStore(tmp_path_factory.mktemp("alerts"))
    for d in RUN_DATES:
        daily_run(small_kept, small_model, d, store=store)
    return store


@pytest.fixture()
def ledger(tmp_path, alert_store):
    return FeedbackLedger(tmp_path / "feedback.jsonl", alert_store)
