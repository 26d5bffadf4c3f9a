"""Exact SHAP attributions for tree ensembles.

Feature contributions are Shapley values of the ensemble margin under
interventional (background-conditioned) expectations: coalition members take
the explained row's values, everyone else takes a background row's, averaged
over the background set.  Per leaf the coalition game reduces to "these
features must be in, those must be out", which has a closed-form Shapley
value; summing over leaves and trees gives the exact attribution without
enumerating coalitions.  A brute-force enumerator over all 2^k coalitions
verifies it on small ensembles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, InputValidationError
from .model import GRADIENT_BOOSTED, Tree, TreeEnsemble

BRUTE_FORCE_MAX_FEATURES = 15


@dataclass
class ShapExplanation:
    phi: np.ndarray
    base_value: float
    prediction_margin: float
    feature_names: tuple[str, ...] | None = None
    feature_values: np.ndarray | None = None


@dataclass(frozen=True)
class _LeafBox:
    value: float
    features: np.ndarray  # constrained feature indices, ascending
    lower: np.ndarray     # inclusive
    upper: np.ndarray     # exclusive


def _leaf_boxes(tree: Tree) -> list[_LeafBox]:
    boxes: list[_LeafBox] = []

    def walk(node: int, bounds: dict[int, tuple[float, float]]) -> None:
        f = int(tree.feature[node])
        if f < 0:
            feats = np.array(sorted(bounds), dtype=int)
            boxes.append(
                _LeafBox(
                    value=float(tree.value[node]),
                    features=feats,
                    lower=np.array([bounds[j][0] for j in feats]),
                    upper=np.array([bounds[j][1] for j in feats]),
                )
            )
            return
        thr = float(tree.threshold[node])
        lo, hi = bounds.get(f, (-math.inf, math.inf))
        if thr > lo:
            bounds_left = dict(bounds)
            bounds_left[f] = (lo, min(hi, thr))
            walk(int(tree.left[node]), bounds_left)
        if thr < hi:
            bounds_right = dict(bounds)
            bounds_right[f] = (max(lo, thr), hi)
            walk(int(tree.right[node]), bounds_right)

    walk(0, {})
    return boxes


def _margin_scale(ensemble: TreeEnsemble) -> float:
    if ensemble.kind == GRADIENT_BOOSTED:
        return ensemble.learning_rate
    return 1.0 / len(ensemble.trees)


def tree_shap_batch(
    ensemble: TreeEnsemble, X: np.ndarray, background: np.ndarray
) -> tuple[np.ndarray, float]:
    """Exact interventional SHAP for many rows at once.

    Returns (phi matrix of shape (rows, features), base value).  For every
    row, base + phi.sum() equals the ensemble margin exactly.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise ConfigurationError("SHAP needs a non-empty background dataset")
    if X.shape[1] != ensemble.n_features or background.shape[1] != ensemble.n_features:
        raise InputValidationError(
            f"expected {ensemble.n_features} features, got "
            f"{X.shape[1]} (rows) and {background.shape[1]} (background)"
        )

    n, p = X.shape
    m = background.shape[0]
    phi = np.zeros((n, p))
    base = float(ensemble.margin(background).mean())
    if not ensemble.trees:
        return phi, base

    scale = _margin_scale(ensemble)
    boxes = [box for tree in ensemble.trees for box in _leaf_boxes(tree)]
    max_k = max((len(box.features) for box in boxes), default=0)
    # sized for u + v up to 2k: np.where evaluates the discarded branch too
    fact = np.array([math.factorial(i) for i in range(2 * max_k + 2)], dtype=float)

    for box in boxes:
        k = len(box.features)
        if k == 0:
            continue  # unconstrained leaf contributes only to the base
        leaf_val = scale * box.value
        bsat = (background[:, box.features] >= box.lower) & (
            background[:, box.features] < box.upper
        )
        u = (k - bsat.sum(axis=1)).astype(int)
        not_bsat = ~bsat

        xsat = (X[:, box.features] >= box.lower) & (X[:, box.features] < box.upper)
        codes = xsat @ (1 << np.arange(k))
        for code in np.unique(codes):
            rows = np.flatnonzero(codes == code)
            sat = (code >> np.arange(k)) & 1 == 1
            v = int(k - sat.sum())
            # a background is feasible iff it satisfies every constraint x fails
            feasible = bsat[:, ~sat].all(axis=1) if v else np.ones(m, dtype=bool)
            w_in = np.where(
                (u > 0) & feasible, fact[u - 1] * fact[v] / fact[u + v], 0.0
            )
            add = not_bsat.T @ w_in / m  # per constrained feature, "must-in" weight
            phi[rows[:, None], box.features] += leaf_val * add
            if v:
                w_out = np.where(feasible, fact[u] * fact[v - 1] / fact[u + v], 0.0)
                drop = float(w_out.sum()) / m
                phi[rows[:, None], box.features[~sat]] -= leaf_val * drop
    return phi, base


def tree_shap(
    ensemble: TreeEnsemble,
    x: np.ndarray,
    background: np.ndarray,
    feature_names: tuple[str, ...] | None = None,
) -> ShapExplanation:
    x = np.asarray(x, dtype=float).reshape(-1)
    phi, base = tree_shap_batch(ensemble, x[None, :], background)
    margin = float(ensemble.margin(x[None, :])[0])
    return ShapExplanation(
        phi=phi[0],
        base_value=base,
        prediction_margin=margin,
        feature_names=feature_names,
        feature_values=x,
    )


def brute_force_shapley(
    ensemble: TreeEnsemble, x: np.ndarray, background: np.ndarray
) -> tuple[np.ndarray, float]:
    """Shapley values by exhaustive coalition enumeration over used features.

    The value of a coalition is the mean margin over background rows with the
    coalition's columns replaced by x.  Exponential in used features, hence
    the hard bound."""
    x = np.asarray(x, dtype=float).reshape(-1)
    background = np.atleast_2d(np.asarray(background, dtype=float))
    if background.shape[0] == 0:
        raise ConfigurationError("SHAP needs a non-empty background dataset")
    used = sorted(ensemble.used_features())
    k = len(used)
    if k > BRUTE_FORCE_MAX_FEATURES:
        raise InputValidationError(
            f"brute-force Shapley is limited to {BRUTE_FORCE_MAX_FEATURES} "
            f"used features, ensemble uses {k}"
        )

    m = background.shape[0]
    n_masks = 1 << k
    Z = np.tile(background, (n_masks, 1, 1))
    masks = np.arange(n_masks)
    for i, f in enumerate(used):
        hit = (masks >> i) & 1 == 1
        Z[hit, :, f] = x[f]
    vals = ensemble.margin(Z.reshape(n_masks * m, -1)).reshape(n_masks, m).mean(axis=1)

    fact = [math.factorial(i) for i in range(k + 1)]
    phi = np.zeros(x.shape[0])
    for i, f in enumerate(used):
        bit = 1 << i
        without = masks[(masks & bit) == 0]
        sizes = np.array([int(s).bit_count() for s in without])
        weights = np.array(
            [fact[s] * fact[k - s - 1] / fact[k] for s in sizes]
        )
        phi[f] = float(np.sum(weights * (vals[without | bit] - vals[without])))
    return phi, float(vals[0])


def top_drivers(
    explanation: ShapExplanation, k: int
) -> list[tuple[str, float, float]]:
    """The k largest |phi| features with their raw values; ties keep manifest order."""
    if k < 1:
        raise InputValidationError("k must be at least 1")
    if explanation.feature_names is None or explanation.feature_values is None:
        raise ConfigurationError("explanation carries no feature names/values")
    order = np.argsort(-np.abs(explanation.phi), kind="stable")[:k]
    return [
        (
            explanation.feature_names[i],
            float(explanation.phi[i]),
            float(explanation.feature_values[i]),
        )
        for i in order
    ]
