"""Tree-ensemble training: chronological splitting, gradient boosting and
random forests under a shared exact split search, and grid search.

Both trainers canonicalize row order before fitting, so a model is a pure
function of the (multi)set of training rows and the seed, not of input order.
Split search is vectorized over features via presorted index lists that are
partitioned down the tree, never re-sorted.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, InputValidationError, SplitError, TrainingError
from .features import FeatureManifest, FeatureMatrix

GRADIENT_BOOSTED = "gradient_boosted"
RANDOM_FOREST = "random_forest"

N_ESTIMATORS_GRID = (20, 50, 100)
MAX_DEPTH_GRID = (3, 4)

_LAMBDA = 1e-9
_MODEL_FILE_VERSION = 1


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)

    def __post_init__(self) -> None:
        if len(self.fractions) != 3 or any(f <= 0 for f in self.fractions):
            raise ConfigurationError("split needs three positive fractions")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ConfigurationError(
                f"split fractions must sum to 1, got {self.fractions}"
            )


@dataclass(frozen=True)
class HyperParams:
    n_estimators: int
    max_depth: int
    learning_rate: float = 0.1
    row_subsample: float | None = None
    feature_subsample: float | None = None

    def __post_init__(self) -> None:
        if self.n_estimators < 0 or self.max_depth < 1:
            raise ConfigurationError(f"invalid hyperparameters: {self}")

    def to_dict(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "max_depth": self.max_depth,
            "learning_rate": self.learning_rate,
            "row_subsample": self.row_subsample,
            "feature_subsample": self.feature_subsample,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "HyperParams":
        return cls(**doc)


def default_grid(kind: str) -> list[HyperParams]:
    """The searched grid: estimator counts by maximum depths, ordered so the
    first strict maximum implements the smaller-n then smaller-depth tie-break."""
    row = 1.0 if kind == RANDOM_FOREST else None
    return [
        HyperParams(n_estimators=n, max_depth=d, row_subsample=row)
        for n in N_ESTIMATORS_GRID
        for d in MAX_DEPTH_GRID
    ]


@dataclass
class Tree:
    feature: np.ndarray  # int32; -1 marks a leaf
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    def margins(self, X: np.ndarray) -> np.ndarray:
        out = np.zeros(X.shape[0])
        stack = [(0, np.arange(X.shape[0]))]
        while stack:
            node, rows = stack.pop()
            f = self.feature[node]
            if f < 0:
                out[rows] = self.value[node]
                continue
            goes_left = X[rows, f] < self.threshold[node]
            stack.append((int(self.left[node]), rows[goes_left]))
            stack.append((int(self.right[node]), rows[~goes_left]))
        return out

    def depth(self) -> int:
        def rec(node: int) -> int:
            if self.feature[node] < 0:
                return 0
            return 1 + max(rec(int(self.left[node])), rec(int(self.right[node])))

        return rec(0)

    def used_features(self) -> set[int]:
        return {int(f) for f in self.feature if f >= 0}

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Tree":
        return cls(
            feature=np.asarray(doc["feature"], dtype=np.int32),
            threshold=np.asarray(doc["threshold"], dtype=float),
            left=np.asarray(doc["left"], dtype=np.int32),
            right=np.asarray(doc["right"], dtype=np.int32),
            value=np.asarray(doc["value"], dtype=float),
        )


@dataclass
class TreeEnsemble:
    kind: str
    trees: list[Tree]
    base_score: float
    learning_rate: float
    hyperparams: HyperParams
    n_features: int
    manifest_hash: str | None = None
    trained_on: date | None = None
    train_log: list[float] = field(default_factory=list)

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = self._check(X)
        if self.kind == GRADIENT_BOOSTED:
            total = np.full(X.shape[0], self.base_score)
            for tree in self.trees:
                total += self.learning_rate * tree.margins(X)
            return total
        if not self.trees:
            return np.full(X.shape[0], self.base_score)
        return np.mean([tree.margins(X) for tree in self.trees], axis=0)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        m = self.margin(X)
        if self.kind == GRADIENT_BOOSTED:
            return 1.0 / (1.0 + np.exp(-m))
        return m

    def used_features(self) -> set[int]:
        used: set[int] = set()
        for tree in self.trees:
            used |= tree.used_features()
        return used

    def _check(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.n_features:
            raise InputValidationError(
                f"expected {self.n_features} features, got {X.shape[1]}"
            )
        return X


def manifest_hash(manifest: FeatureManifest) -> str:
    payload = json.dumps(manifest.to_dict(), sort_keys=True).encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def require_matching_manifest(ensemble: TreeEnsemble, manifest: FeatureManifest) -> None:
    """Refuse to score features that differ from what the model trained on."""
    if ensemble.manifest_hash is None:
        return
    got = manifest_hash(manifest)
    if got != ensemble.manifest_hash:
        raise ConfigurationError(
            "feature manifest does not match the model's training manifest "
            f"({got[:12]} != {ensemble.manifest_hash[:12]})"
        )


# ---------------------------------------------------------------------------
# Chronological split
# ---------------------------------------------------------------------------


def split_boundaries(
    dates: Sequence[date], fractions: tuple[float, float, float]
) -> tuple[date, date]:
    """Date edges (last train date, last validation date) snapping the target
    fractions to whole dates; earlier edge wins ties."""
    uniq, counts = np.unique(np.asarray(dates), return_counts=True)
    if len(uniq) < 3:
        raise SplitError(
            f"need at least 3 distinct dates for a three-way split, got {len(uniq)}"
        )
    n = counts.sum()
    cum = np.cumsum(counts)

    # i: index of last train date, j: index of last validation date
    train_dev = np.abs(cum / n - fractions[0])
    i = int(np.argmin(train_dev[: len(uniq) - 2]))
    val_sizes = cum[i + 1 : len(uniq) - 1] - cum[i]
    val_dev = np.abs(val_sizes / n - fractions[1])
    j = i + 1 + int(np.argmin(val_dev))
    return uniq[i], uniq[j]


def chronological_split(
    fm: FeatureMatrix, spec: SplitSpec | None = None
) -> tuple[FeatureMatrix, FeatureMatrix, FeatureMatrix]:
    """Sort rows by (date, patient) and cut at whole-date edges nearest the
    target fractions, so no date straddles two partitions."""
    if spec is None:
        spec = SplitSpec()
    if not fm.keys:
        raise SplitError("cannot split an empty dataset")
    order = sorted(range(len(fm.keys)), key=lambda i: (fm.keys[i].day, fm.keys[i].patient_id))
    days = [fm.keys[i].day for i in order]
    d_train, d_val = split_boundaries(days, spec.fractions)

    parts: tuple[list[int], list[int], list[int]] = ([], [], [])
    for i in order:
        day = fm.keys[i].day
        parts[0 if day <= d_train else 1 if day <= d_val else 2].append(i)
    return tuple(
        FeatureMatrix(
            X=fm.X[idx],
            y=fm.y[idx],
            keys=[fm.keys[i] for i in idx],
            manifest=fm.manifest,
        )
        for idx in parts
    )


# ---------------------------------------------------------------------------
# Shared exact split search
# ---------------------------------------------------------------------------


def _canonical_order(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    keys = np.vstack([y[None, :], X.T[::-1]])
    return np.lexsort(keys)


def _dense_ranks(X: np.ndarray, presorted: np.ndarray) -> np.ndarray:
    """Per-feature dense rank of each row's value, as an int32 (p, n) matrix.

    Rank equality encodes float64 value equality, so split-candidate validity
    checks on gathered ranks match comparisons on the original values exactly
    while moving half the bytes.
    """
    p, n = presorted.shape
    R = np.empty((p, n), dtype=np.int32)
    steps = np.empty(n, dtype=np.int64)
    for f in range(p):
        order = presorted[f]
        vals = X[order, f]
        steps[0] = 0
        np.cumsum(vals[1:] > vals[:-1], out=steps[1:])
        R[f, order] = steps.astype(np.int32)
    return R


class _TreeBuilder:
    """Grows one tree level-wise by greedy exact splits on gradient/hessian sums.

    All nodes of a level share one (n_features, n_active) index buffer whose
    row f lists rows sorted by feature f; each node owns a column span of it.
    Children are written into a second buffer by a stable partition, so nothing
    is ever re-sorted and gathers are batched per level.  Split scoring runs in
    float32 for bandwidth; leaf values and thresholds use the float64 inputs.
    """

    def __init__(
        self,
        X: np.ndarray,
        ranks: np.ndarray,
        g: np.ndarray,
        h: np.ndarray,
        max_depth: int,
        feature_k: int | None = None,
        rng: np.random.Generator | None = None,
    ):
        self.X = X
        self.R = ranks
        self.g = g
        self.h = h
        self.g32 = g.astype(np.float32)
        self.h32 = h.astype(np.float32)
        self.max_depth = max_depth
        self.feature_k = feature_k
        self.rng = rng
        self.n, self.p = X.shape
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.train_values = np.zeros(self.n)
        self._member = np.zeros(self.n, dtype=bool)

    def build(self, sidx: np.ndarray) -> Tree:
        A = np.ascontiguousarray(sidx, dtype=np.int32)
        spans = [(self._new_node(), 0, A.shape[1])]
        for _ in range(self.max_depth):
            if not spans:
                break
            A, spans = self._split_level(A, spans)
        for node, s, e in spans:
            self._make_leaf(node, A[0, s:e])
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=float),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=float),
        )

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(0.0)
        return len(self.feature) - 1

    def _make_leaf(self, node: int, rows: np.ndarray) -> None:
        G = float(self.g[rows].sum())
        H = float(self.h[rows].sum())
        val = -G / (H + _LAMBDA)
        self.value[node] = val
        self.train_values[rows] = val

    def _split_level(
        self, A: np.ndarray, spans: list[tuple[int, int, int]]
    ) -> tuple[np.ndarray, list[tuple[int, int, int]]]:
        frows = np.arange(self.p, dtype=np.intp)[:, None]
        rs = self.R[frows, A]
        gs = self.g32[A]
        hs = self.h32[A]

        B = np.empty_like(A)
        out_spans: list[tuple[int, int, int]] = []
        write = 0
        for node, s, e in spans:
            m = e - s
            if m < 2:
                self._make_leaf(node, A[0, s:e])
                continue
            split = self._best_split(rs[:, s:e], gs[:, s:e], hs[:, s:e])
            if split is None:
                self._make_leaf(node, A[0, s:e])
                continue
            f, local_i = split
            row_lo = A[f, s + local_i]
            row_hi = A[f, s + local_i + 1]
            thr = 0.5 * (self.X[row_lo, f] + self.X[row_hi, f])

            left_rows = A[f, s : s + local_i + 1]
            self._member[left_rows] = True
            seg = A[:, s:e]
            mask2d = self._member[seg]
            self._member[left_rows] = False
            n_left = local_i + 1
            B[:, write : write + n_left] = seg[mask2d].reshape(self.p, n_left)
            B[:, write + n_left : write + m] = seg[~mask2d].reshape(self.p, m - n_left)

            self.feature[node] = f
            self.threshold[node] = float(thr)
            left_id = self._new_node()
            right_id = self._new_node()
            self.left[node] = left_id
            self.right[node] = right_id
            out_spans.append((left_id, write, write + n_left))
            out_spans.append((right_id, write + n_left, write + m))
            write += m
        return B[:, :write], out_spans

    def _best_split(
        self, rs: np.ndarray, gs: np.ndarray, hs: np.ndarray
    ) -> tuple[int, int] | None:
        if self.feature_k is not None and self.feature_k < self.p:
            cand = np.sort(self.rng.choice(self.p, size=self.feature_k, replace=False))
            rs, gs, hs = rs[cand], gs[cand], hs[cand]
        else:
            cand = None

        GL = np.cumsum(gs, axis=1)
        HL = np.cumsum(hs, axis=1)
        G = GL[:, -1:].copy()
        H = HL[:, -1:].copy()
        GL = GL[:, :-1]
        HL = HL[:, :-1]
        GR = G - GL
        HR = H - HL
        HR += _LAMBDA
        np.square(GR, out=GR)
        GR /= HR
        HL += _LAMBDA
        np.square(GL, out=GL)
        GL /= HL
        gain = GL
        gain += GR
        gain -= G * G / (H + _LAMBDA)
        gain[rs[:, :-1] >= rs[:, 1:]] = -np.inf

        flat = int(np.argmax(gain))
        best = gain.flat[flat]
        if not np.isfinite(best) or best <= 1e-12:
            return None
        local_f, local_i = divmod(flat, gain.shape[1])
        f = int(cand[local_f]) if cand is not None else local_f
        return f, local_i


def _presort(X: np.ndarray) -> np.ndarray:
    # int32 halves the memory traffic of the per-level gathers
    return np.argsort(X.T, axis=1, kind="stable").astype(np.int32)


def _check_training_inputs(X: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise InputValidationError(f"bad training shapes {X.shape} vs {y.shape}")
    if not np.all(np.isfinite(X)):
        raise InputValidationError("training features must be finite after imputation")
    classes = np.unique(y)
    if not np.array_equal(classes, [0.0, 1.0]):
        raise TrainingError(
            f"training requires both classes, got labels {classes.tolist()}"
        )
    return X, y


def _logistic_loss(margin: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def logistic_gradient_hessian(
    margin: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    p = 1.0 / (1.0 + np.exp(-margin))
    return p - y, p * (1.0 - p)


def train_gbt(
    X: np.ndarray,
    y: np.ndarray,
    hp: HyperParams,
    seed: int = 0,
    manifest: FeatureManifest | None = None,
    trained_on: date | None = None,
) -> TreeEnsemble:
    """Stagewise logistic-loss boosting from a prevalence base score."""
    X, y = _check_training_inputs(X, y)
    order = _canonical_order(X, y)
    X, y = X[order], y[order]

    prevalence = float(y.mean())
    base = math.log(prevalence / (1.0 - prevalence))
    presorted = _presort(X)
    ranks = _dense_ranks(X, presorted)

    margin = np.full(X.shape[0], base)
    trees: list[Tree] = []
    log = [_logistic_loss(margin, y)]
    for _ in range(hp.n_estimators):
        g, h = logistic_gradient_hessian(margin, y)
        builder = _TreeBuilder(X, ranks, g, h, hp.max_depth)
        trees.append(builder.build(presorted))
        margin = margin + hp.learning_rate * builder.train_values
        log.append(_logistic_loss(margin, y))

    return TreeEnsemble(
        kind=GRADIENT_BOOSTED,
        trees=trees,
        base_score=base,
        learning_rate=hp.learning_rate,
        hyperparams=hp,
        n_features=X.shape[1],
        manifest_hash=manifest_hash(manifest) if manifest is not None else None,
        trained_on=trained_on,
        train_log=log,
    )


def train_rf(
    X: np.ndarray,
    y: np.ndarray,
    hp: HyperParams,
    seed: int = 0,
    manifest: FeatureManifest | None = None,
    trained_on: date | None = None,
) -> TreeEnsemble:
    """Random forest of probability trees; bootstrap resampling is carried as
    per-row weights so the presort is shared across trees."""
    X, y = _check_training_inputs(X, y)
    order = _canonical_order(X, y)
    X, y = X[order], y[order]
    n, p = X.shape
    presorted = _presort(X)
    ranks = _dense_ranks(X, presorted)

    feature_k = None
    if hp.feature_subsample is not None:
        feature_k = max(1, int(round(hp.feature_subsample * p)))

    seeds = np.random.SeedSequence(seed).spawn(max(hp.n_estimators, 1))
    trees: list[Tree] = []
    for t in range(hp.n_estimators):
        rng = np.random.default_rng(seeds[t])
        if hp.row_subsample is None:
            weights = np.ones(n)
            sidx = presorted
        else:
            draws = max(1, int(round(hp.row_subsample * n)))
            weights = np.bincount(rng.integers(0, n, size=draws), minlength=n).astype(float)
            member = weights > 0
            m = int(member.sum())
            sidx = presorted[member[presorted]].reshape(p, m)
        # leaf value -G/H with g = -w*y, h = w is the weighted class rate
        builder = _TreeBuilder(
            X, ranks, -weights * y, weights, hp.max_depth, feature_k=feature_k, rng=rng
        )
        trees.append(builder.build(sidx))

    return TreeEnsemble(
        kind=RANDOM_FOREST,
        trees=trees,
        base_score=0.0,
        learning_rate=1.0,
        hyperparams=hp,
        n_features=p,
        manifest_hash=manifest_hash(manifest) if manifest is not None else None,
        trained_on=trained_on,
        train_log=[],
    )


def train(
    kind: str,
    X: np.ndarray,
    y: np.ndarray,
    hp: HyperParams,
    seed: int = 0,
    manifest: FeatureManifest | None = None,
    trained_on: date | None = None,
) -> TreeEnsemble:
    if kind == GRADIENT_BOOSTED:
        return train_gbt(X, y, hp, seed=seed, manifest=manifest, trained_on=trained_on)
    if kind == RANDOM_FOREST:
        return train_rf(X, y, hp, seed=seed, manifest=manifest, trained_on=trained_on)
    raise ConfigurationError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------


@dataclass
class GridSearchResult:
    best: HyperParams
    table: list[tuple[HyperParams, float]]
    model: TreeEnsemble


def grid_search(
    train_fm: FeatureMatrix,
    val_fm: FeatureMatrix,
    kind: str,
    grid: Sequence[HyperParams] | None = None,
    seed: int = 0,
) -> GridSearchResult:
    """Train one model per cell, pick the best validation AUROC (ties broken
    by smaller n_estimators, then smaller max_depth), then refit that cell on
    train plus validation."""
    from .evaluate import auroc

    if grid is None:
        grid = default_grid(kind)
    if not grid:
        raise ConfigurationError("empty hyperparameter grid")

    table: list[tuple[HyperParams, float]] = []
    best_hp: HyperParams | None = None
    best_auc = -np.inf
    for hp in grid:
        try:
            cell_model = train(kind, train_fm.X, train_fm.y, hp, seed=seed)
        except TrainingError as exc:
            raise TrainingError(f"grid cell {hp} failed: {exc}") from exc
        auc = auroc(cell_model.predict_proba(val_fm.X), val_fm.y)
        table.append((hp, auc))
        tied = auc == best_auc and best_hp is not None and (
            (hp.n_estimators, hp.max_depth)
            < (best_hp.n_estimators, best_hp.max_depth)
        )
        if auc > best_auc or tied:
            best_auc = auc
            best_hp = hp

    X_full = np.vstack([train_fm.X, val_fm.X])
    y_full = np.concatenate([train_fm.y, val_fm.y])
    final = train(
        kind,
        X_full,
        y_full,
        best_hp,
        seed=seed,
        manifest=train_fm.manifest,
        trained_on=max(k.day for k in val_fm.keys) if val_fm.keys else None,
    )
    return GridSearchResult(best=best_hp, table=table, model=final)


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def save_model(ensemble: TreeEnsemble, path: str | Path) -> None:
    doc = {
        "version": _MODEL_FILE_VERSION,
        "kind": ensemble.kind,
        "base_score": ensemble.base_score,
        "learning_rate": ensemble.learning_rate,
        "n_features": ensemble.n_features,
        "manifest_hash": ensemble.manifest_hash,
        "trained_on": ensemble.trained_on.isoformat() if ensemble.trained_on else None,
        "hyperparams": ensemble.hyperparams.to_dict(),
        "train_log": ensemble.train_log,
        "trees": [tree.to_dict() for tree in ensemble.trees],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, sort_keys=True) + "\n")


def load_model(path: str | Path) -> TreeEnsemble:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigurationError(f"cannot read model file {path}: {exc}") from exc
    if doc.get("version") != _MODEL_FILE_VERSION:
        raise ConfigurationError(
            f"unsupported model file version {doc.get('version')!r}"
        )
    return TreeEnsemble(
        kind=doc["kind"],
        trees=[Tree.from_dict(t) for t in doc["trees"]],
        base_score=doc["base_score"],
        learning_rate=doc["learning_rate"],
        hyperparams=HyperParams.from_dict(doc["hyperparams"]),
        n_features=doc["n_features"],
        manifest_hash=doc.get("manifest_hash"),
        trained_on=(
            date.fromisoformat(doc["trained_on"]) if doc.get("trained_on") else None
        ),
        train_log=list(doc.get("train_log", [])),
    )
