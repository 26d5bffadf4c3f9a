"""AUROC (both routes), threshold sweeps, calibration bins, and the
modality-ablation table."""

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wardwatch.errors import InputValidationError, UndefinedMetricError
from wardwatch.evaluate import (
    DEFAULT_ABLATION_SETS,
    ablation_table,
    auroc,
    auroc_pairwise,
    calibration_curve,
    cells_to_json,
    export_plot_data,
    render_ablation_table,
    roc_points,
    threshold_sweep,
)
from wardwatch.model import GRADIENT_BOOSTED, HyperParams


# ---------------------------------------------------------------------------
# AUROC
# ---------------------------------------------------------------------------


def test_auroc_hand_examples():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.9, 0.8, 0.2, 0.1], [0, 0, 1, 1]) == 0.0
    assert auroc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5
    # one discordant pair out of four
    assert auroc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75, abs=1e-15)


def test_auroc_single_class_undefined():
    with pytest.raises(UndefinedMetricError):
        auroc([0.1, 0.2], [1, 1])
    with pytest.raises(UndefinedMetricError):
        auroc_pairwise([0.1, 0.2], [0, 0])


def test_auroc_length_mismatch():
    with pytest.raises(InputValidationError):
        auroc([0.1, 0.2, 0.3], [0, 1])


def test_auroc_routes_agree_on_random_sets():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(10, 200))
        # coarse scores force heavy ties to exercise the tie handling
        scores = rng.integers(0, 6, size=n) / 5.0
        labels = rng.integers(0, 2, size=n).astype(float)
        if labels.min() == labels.max():
            labels[0] = 1.0 - labels[0]
        assert abs(auroc(scores, labels) - auroc_pairwise(scores, labels)) < 1e-12


def test_auroc_complement_identity():
    rng = np.random.default_rng(8)
    scores = rng.random(300)
    labels = (rng.random(300) < 0.3).astype(float)
    assert auroc(scores, labels) + auroc(-scores, labels) == pytest.approx(
        1.0, abs=1e-12
    )


@settings(max_examples=100, deadline=None)
@given(
    data=st.lists(
        st.tuples(st.integers(0, 8), st.booleans()), min_size=2, max_size=60
    )
)
def test_auroc_routes_agree_property(data):
    scores = np.array([s for s, _ in data], dtype=float)
    labels = np.array([1.0 if b else 0.0 for _, b in data])
    if labels.min() == labels.max():
        return
    assert abs(auroc(scores, labels) - auroc_pairwise(scores, labels)) < 1e-12


def test_roc_points_anchored_and_monotone():
    rng = np.random.default_rng(9)
    scores = rng.random(120)
    labels = (rng.random(120) < 0.4).astype(float)
    fpr, tpr = roc_points(scores, labels)
    assert fpr[0] == 0.0 and tpr[0] == 0.0
    assert fpr[-1] == 1.0 and tpr[-1] == 1.0
    assert np.all(np.diff(fpr) >= 0)
    assert np.all(np.diff(tpr) >= 0)


# ---------------------------------------------------------------------------
# threshold sweep
# ---------------------------------------------------------------------------


def test_sweep_hand_example():
    scores = [0.2, 0.4, 0.6, 0.8]
    labels = [0, 1, 0, 1]
    (m,) = threshold_sweep(scores, labels, [0.5])
    assert (m.tp, m.fp, m.tn, m.fn) == (1, 1, 1, 1)
    assert m.sensitivity == 0.5
    assert m.specificity == 0.5
    assert m.precision == 0.5
    assert not m.no_predicted_positives


def test_sweep_strictly_greater_than_threshold():
    # a score equal to the threshold is not flagged
    (m,) = threshold_sweep([0.5, 0.5001], [1, 1], [0.5])
    assert m.tp == 1 and m.fn == 1


def test_sweep_extreme_thresholds():
    scores = [0.1, 0.6, 0.9]
    labels = [0, 1, 1]
    lo, hi = threshold_sweep(scores, labels, [0.0, 1.0])
    assert lo.sensitivity == 1.0 and lo.specificity == 0.0
    assert hi.tp == 0 and hi.fp == 0
    assert hi.no_predicted_positives
    assert hi.precision == 0.0
    assert hi.sensitivity == 0.0 and hi.specificity == 1.0


def test_sweep_rejects_unsorted_thresholds():
    with pytest.raises(InputValidationError):
        threshold_sweep([0.5], [1], [0.8, 0.2])


def test_sweep_confusion_total_and_monotonicity():
    rng = np.random.default_rng(10)
    scores = rng.random(400)
    labels = (rng.random(400) < 0.2).astype(float)
    thresholds = np.linspace(0, 1, 21)
    rows = threshold_sweep(scores, labels, thresholds)
    for m in rows:
        assert m.tp + m.fp + m.tn + m.fn == 400
    sens = [m.sensitivity for m in rows]
    spec = [m.specificity for m in rows]
    assert all(b <= a for a, b in zip(sens, sens[1:]))
    assert all(b >= a for a, b in zip(spec, spec[1:]))


@settings(max_examples=60, deadline=None)
@given(
    scores=st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=40),
    labels_seed=st.integers(0, 2**16),
    thresholds=st.lists(st.floats(0, 1, allow_nan=False), min_size=1, max_size=8),
)
def test_sweep_monotone_property(scores, labels_seed, thresholds):
    rng = np.random.default_rng(labels_seed)
    labels = rng.integers(0, 2, size=len(scores)).astype(float)
    rows = threshold_sweep(scores, labels, sorted(thresholds))
    sens = [m.sensitivity for m in rows]
    spec = [m.specificity for m in rows]
    assert all(b <= a for a, b in zip(sens, sens[1:]))
    assert all(b >= a for a, b in zip(spec, spec[1:]))


# ---------------------------------------------------------------------------
# calibration
# ---------------------------------------------------------------------------


def test_calibration_hand_bins():
    bins = calibration_curve([0.05, 0.15, 0.95], [0, 1, 1], n_bins=10)
    assert len(bins) == 10
    assert bins[0].count == 1 and bins[0].mean_score == 0.05 and bins[0].event_rate == 0.0
    assert bins[1].count == 1 and bins[1].event_rate == 1.0
    assert bins[9].count == 1 and bins[9].mean_score == 0.95
    for b in (2, 3, 4, 5, 6, 7, 8):
        assert bins[b].count == 0
        assert bins[b].mean_score is None and bins[b].event_rate is None


def test_calibration_score_one_lands_in_last_bin():
    bins = calibration_curve([1.0], [1], n_bins=5)
    assert bins[4].count == 1


def test_calibration_all_negative_labels_ok():
    bins = calibration_curve([0.2, 0.25], [0, 0], n_bins=4)
    assert bins[1].event_rate == 0.0


def test_calibration_rejects_single_bin():
    with pytest.raises(InputValidationError):
        calibration_curve([0.5], [1], n_bins=1)


def test_calibration_bernoulli_scores_track_rates():
    rng = np.random.default_rng(12)
    scores = rng.random(4000)
    labels = (rng.random(4000) < scores).astype(float)
    for b in calibration_curve(scores, labels, n_bins=10):
        if b.count >= 300:
            assert abs(b.mean_score - b.event_rate) < 0.08


def test_export_plot_data_shape():
    rng = np.random.default_rng(13)
    scores = rng.random(100)
    labels = (rng.random(100) < 0.3).astype(float)
    data = export_plot_data(scores, labels, [0.1, 0.5, 0.9], n_bins=5)
    assert set(data) == {"roc", "sweep", "calibration"}
    assert len(data["roc"]["fpr"]) == len(data["roc"]["tpr"])
    assert len(data["sweep"]["threshold"]) == 3
    assert len(data["calibration"]["count"]) == 5
    json.dumps(data)  # everything must be plain-JSON serializable


# ---------------------------------------------------------------------------
# ablation table
# ---------------------------------------------------------------------------


def test_ablation_feature_counts_partition(small_fm):
    cells = ablation_table(
        small_fm, [GRADIENT_BOOSTED], grid=[HyperParams(5, 2)], seed=0
    )
    assert [c.modalities for c in cells] == list(DEFAULT_ABLATION_SETS)
    by_mods = {c.modalities: c for c in cells}
    singles = [by_mods[("tabular",)], by_mods[("timeseries",)], by_mods[("text",)]]
    full = by_mods[DEFAULT_ABLATION_SETS[-1]]
    assert sum(c.n_features for c in singles) == full.n_features
    assert full.n_features == len(small_fm.manifest)
    for c in cells:
        assert 0.0 <= c.test_auroc <= 1.0
        assert c.kind == GRADIENT_BOOSTED
        assert c.best == HyperParams(5, 2)


def test_ablation_rejects_empty_modality_set(small_fm):
    with pytest.raises(InputValidationError):
        ablation_table(small_fm, [GRADIENT_BOOSTED], modality_sets=[()])


def test_ablation_render_and_json(small_fm):
    cells = ablation_table(
        small_fm,
        [GRADIENT_BOOSTED],
        modality_sets=[("tabular",)],
        grid=[HyperParams(5, 2)],
    )
    text = render_ablation_table(cells)
    assert "tabular" in text and "test AUROC" in text
    parsed = json.loads(cells_to_json(cells))
    assert parsed[0]["modalities"] == ["tabular"]
    assert parsed[0]["best"]["n_estimators"] == 5
