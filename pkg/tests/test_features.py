"""Daily aggregation, imputation, tabular encoding, medication signals,
vector assembly, and matrix persistence."""

import math
from datetime import date, datetime, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wardwatch.cohort import (
    AlcoholUse,
    MedAction,
    MedicationOrder,
    PatientDayKey,
    Route,
    TabularStatics,
    enumerate_patient_days,
)
from wardwatch.errors import ConfigurationError, InputValidationError
from wardwatch.features import (
    MED_FLAG_NAMES,
    MODALITIES,
    TABULAR_NAMES,
    DailyStats,
    FeatureConfig,
    MedicationSignalConfig,
    OperationalContext,
    aggregate_day,
    assemble_vector,
    build_manifest,
    encode_tabular,
    featurize_cohort,
    impute,
    load_matrix,
    medication_signals,
    save_matrix,
)


def ts(day, hour, minute=0):
    return datetime(2024, 1, day, hour, minute)


# ---------------------------------------------------------------------------
# aggregate_day
# ---------------------------------------------------------------------------


def test_single_sample_all_stats_equal():
    stats = aggregate_day([(98.0, ts(1, 9))], prev_avg=None)
    assert stats.avg == stats.peak == stats.min == stats.last == 98.0
    assert stats.trend is None


def test_three_sample_arithmetic():
    stats = aggregate_day(
        [(80.0, ts(1, 8)), (120.0, ts(1, 14)), (95.0, ts(1, 22))], prev_avg=100.0
    )
    assert math.isclose(stats.avg, 295.0 / 3.0)
    assert stats.peak == 120.0
    assert stats.min == 80.0
    assert stats.last == 95.0
    assert math.isclose(stats.trend, 295.0 / 3.0 - 100.0)


def test_empty_samples_all_missing():
    stats = aggregate_day([], prev_avg=100.0)
    assert (stats.avg, stats.peak, stats.min, stats.last, stats.trend) == (None,) * 5


def test_last_is_by_timestamp_not_position():
    stats = aggregate_day([(95.0, ts(1, 22)), (80.0, ts(1, 8))], prev_avg=None)
    assert stats.last == 95.0


@settings(max_examples=80, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(min_value=-1e3, max_value=1e3, allow_nan=False),
            st.integers(min_value=0, max_value=23),
        ),
        min_size=1,
        max_size=12,
    )
)
def test_stats_ordering_invariant(pairs):
    samples = [(v, ts(1, h)) for v, h in pairs]
    stats = aggregate_day(samples, prev_avg=None)
    assert stats.min <= stats.avg <= stats.peak
    assert stats.min <= stats.last <= stats.peak


# ---------------------------------------------------------------------------
# impute
# ---------------------------------------------------------------------------


def test_impute_carries_last_observation_forward():
    m = np.array([[4.1], [np.nan]])
    assert impute(m)[1, 0] == 4.1


def test_impute_never_observed_becomes_zero():
    m = np.array([[np.nan], [np.nan], [np.nan]])
    assert np.all(impute(m) == 0.0)


def test_impute_leaves_observed_unchanged():
    m = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(impute(m), m)


def test_impute_is_causal():
    base = np.array([[1.0, np.nan], [np.nan, 2.0], [np.nan, np.nan]])
    changed = base.copy()
    changed[2, 0] = 9.0
    assert np.array_equal(impute(base)[:2], impute(changed)[:2])


# ---------------------------------------------------------------------------
# encode_tabular
# ---------------------------------------------------------------------------


def _ops():
    return OperationalContext(day_of_week=2, ward_census=17, hospital_admissions=4)


def _statics(**kw):
    defaults = dict(
        age=61.0,
        alcohol_user=AlcoholUse.NONE,
        dnr_order=False,
        future_surgery_date=None,
        admitting_ward="ward-a",
    )
    defaults.update(kw)
    return TabularStatics(**defaults)


def test_alcohol_ordering_monotone():
    codes = [
        encode_tabular(_statics(alcohol_user=a), _ops(), 0)["alcohol_user"]
        for a in (AlcoholUse.NONE, AlcoholUse.FORMER, AlcoholUse.CURRENT)
    ]
    assert codes == [0.0, 1.0, 2.0]


def test_dnr_boolean_encoding():
    assert encode_tabular(_statics(dnr_order=True), _ops(), 0)["dnr_order"] == 1.0


def test_surgery_tomorrow_encodes_one():
    # surgery scheduled 3 days after admission, scored on hospital day 2
    row = encode_tabular(_statics(future_surgery_date=3), _ops(), 2)
    assert row["days_to_surgery"] == 1.0


def test_surgery_in_past_is_negative():
    row = encode_tabular(_statics(future_surgery_date=1), _ops(), 4)
    assert row["days_to_surgery"] == -3.0


def test_no_surgery_is_missing_for_imputation():
    row = encode_tabular(_statics(), _ops(), 0)
    assert math.isnan(row["days_to_surgery"])


def test_operational_context_passthrough():
    row = encode_tabular(_statics(), _ops(), 0)
    assert row["ward_census"] == 17.0
    assert row["hospital_admissions"] == 4.0
    assert row["day_of_week"] == 2.0


def test_unknown_alcohol_level_names_field():
    with pytest.raises(InputValidationError, match="alcohol_user"):
        encode_tabular(_statics(alcohol_user="binge"), _ops(), 0)


# ---------------------------------------------------------------------------
# medication signals
# ---------------------------------------------------------------------------


CFG = MedicationSignalConfig.default()
GREEN = next(iter(CFG.green_names))
YELLOW = next(iter(CFG.yellow_names))


def order(name, route, action, day, hour=10):
    return MedicationOrder(name=name, dose="1u", route=route, action=action, ts=ts(day, hour))


def test_green_iv_to_oral_same_day_is_deescalation():
    orders = [
        order(GREEN, Route.INTRAVENOUS, MedAction.STARTED, 1),
        order(GREEN, Route.INTRAVENOUS, MedAction.DISCONTINUED, 2, 9),
        order(GREEN, Route.ORAL, MedAction.STARTED, 2, 11),
    ]
    flags = medication_signals(orders, CFG, date(2024, 1, 2))
    assert flags["green_deescalated"] == 1.0


def test_yellow_history_with_green_active_flags():
    orders = [
        order(YELLOW, Route.INTRAVENOUS, MedAction.STARTED, 1),
        order(YELLOW, Route.INTRAVENOUS, MedAction.DISCONTINUED, 2),
        order(GREEN, Route.INTRAVENOUS, MedAction.STARTED, 3),
    ]
    flags = medication_signals(orders, CFG, date(2024, 1, 3))
    assert flags["yellow_then_green"] == 1.0
    assert flags["green_active"] == 1.0
    assert flags["yellow_active"] == 0.0


def test_no_configured_medications_all_zero():
    orders = [order("acetaminophen", Route.ORAL, MedAction.STARTED, 1)]
    flags = medication_signals(orders, CFG, date(2024, 1, 1))
    assert all(flags[n] == 0.0 for n in MED_FLAG_NAMES)


def test_yellow_active_any_route():
    orders = [order(YELLOW, Route.ORAL, MedAction.STARTED, 1)]
    flags = medication_signals(orders, CFG, date(2024, 1, 2))
    assert flags["yellow_active"] == 1.0


def test_signal_config_sets_must_be_disjoint():
    with pytest.raises(ConfigurationError):
        MedicationSignalConfig(
            green_names=frozenset({"drugx"}), yellow_names=frozenset({"drugx"})
        )


def test_med_matching_case_insensitive():
    orders = [order(GREEN.upper(), Route.INTRAVENOUS, MedAction.STARTED, 1)]
    flags = medication_signals(orders, CFG, date(2024, 1, 1))
    assert flags["green_active"] == 1.0


# ---------------------------------------------------------------------------
# manifest and assembly
# ---------------------------------------------------------------------------


def test_default_manifest_dimension():
    manifest = build_manifest(FeatureConfig())
    # 7 tabular + 9 measurements x 5 stats + 4 med flags + 312 embedding dims
    assert len(manifest) == 7 + 45 + 4 + 312 == 368
    assert set(manifest.modalities) == set(MODALITIES)


def test_text_disabled_manifest_shrinks():
    manifest = build_manifest(FeatureConfig(modalities=("tabular", "timeseries")))
    assert len(manifest) == 52
    assert "text" not in manifest.modalities


def test_matrix_dimension_constant_and_finite(small_fm):
    assert small_fm.X.shape[1] == 368
    assert np.all(np.isfinite(small_fm.X))
    assert small_fm.X.shape[0] == len(small_fm.keys) == len(small_fm.y)


def test_trend_matches_brute_force(small_kept, small_fm):
    """trend = avg(day t) - avg(day t-1) over observed heart-rate days."""
    col_avg = small_fm.manifest.names.index("heart_rate_avg")
    col_trend = small_fm.manifest.names.index("heart_rate_trend")
    rows = {key: i for i, key in enumerate(small_fm.keys)}
    checked = 0
    for stay in small_kept[:50]:
        keys = enumerate_patient_days(stay)
        by_day = {}
        for k in keys:
            vals = [v.value for v in stay.vitals
                    if v.name == "heart_rate" and v.ts.date() == k.day and v.ts <= k.cut]
            if vals:
                by_day[k.day] = sum(vals) / len(vals)
        for k in keys:
            prev = k.day - timedelta(days=1)
            if k.day in by_day and prev in by_day and k in rows:
                expected = by_day[k.day] - by_day[prev]
                assert small_fm.X[rows[k], col_trend] == pytest.approx(expected)
                assert small_fm.X[rows[k], col_avg] == pytest.approx(by_day[k.day])
                checked += 1
    assert checked > 10


def test_imputation_is_stay_local(small_kept):
    """Dropping other patients entirely must not change a stay's rows."""
    target = small_kept[3]
    full = featurize_cohort(small_kept[:8])
    # census/admissions depend on the surrounding cohort, so compare only
    # patient-local columns (everything except the operational pair)
    ops_cols = [full.manifest.names.index(n) for n in ("ward_census", "hospital_admissions")]
    keep = [i for i in range(len(full.manifest)) if i not in ops_cols]
    alone = featurize_cohort([target])
    rows_full = [i for i, k in enumerate(full.keys) if k.patient_id == target.patient_id]
    assert np.array_equal(full.X[np.ix_(rows_full, keep)], alone.X[:, keep])


def test_assemble_vector_requires_all_parts():
    manifest = build_manifest(FeatureConfig())
    key = PatientDayKey("p1", date(2024, 1, 1))
    with pytest.raises(ConfigurationError):
        assemble_vector({}, {}, {}, np.zeros(10), manifest, key)


def test_save_load_round_trip(tmp_path, small_fm):
    path = tmp_path / "features.tsv"
    save_matrix(small_fm, path)
    loaded = load_matrix(path)
    assert np.array_equal(loaded.X, small_fm.X)
    assert np.array_equal(loaded.y, small_fm.y)
    assert loaded.keys == small_fm.keys
    assert loaded.manifest.names == small_fm.manifest.names


def test_load_detects_header_manifest_mismatch(tmp_path, small_fm):
    path = tmp_path / "features.tsv"
    save_matrix(small_fm, path)
    text = path.read_text().splitlines()
    text[0] = text[0].replace("heart_rate_avg", "heart_rate_avgX", 1)
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(ConfigurationError):
        load_matrix(path)


def test_modality_view_partitions_features(small_fm):
    total = sum(
        len(small_fm.modality_view((m,)).manifest) for m in MODALITIES
    )
    assert total == len(small_fm.manifest)
