"""Built-in downstream models and validation losses.

Deliberately small: full-batch gradient descent on (one-vs-rest) logistic or
linear regression over z-scored features. Searches rank candidate features by
these losses; richer model families can be plugged in behind the same loss
interface without touching search code.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from featforge.query import CandidateQuery, execute_many
from featforge.table import Table

WORST_LOSS = 1e18  # finite sentinel recorded for failed evaluations


class TaskKind(enum.Enum):
    BINARY = "binary"
    MULTICLASS = "multiclass"
    REGRESSION = "regression"

    @property
    def metric_name(self) -> str:
        return {"binary": "auc", "multiclass": "macro_f1", "regression": "rmse"}[self.value]

    @property
    def is_classification(self) -> bool:
        return self is not TaskKind.REGRESSION


@dataclass(frozen=True)
class ModelSpec:
    kind: str = "logistic"  # logistic | linear | ovr_logistic
    learning_rate: float = 0.1
    epochs: int = 300
    l2: float = 1e-4

    def __post_init__(self):
        if self.kind not in ("logistic", "linear", "ovr_logistic"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.learning_rate <= 0 or self.epochs < 1 or self.l2 < 0:
            raise ValueError("invalid model spec")


@dataclass(frozen=True)
class LossValue:
    value: float  # lower is better: 1-AUC, 1-macroF1, or RMSE
    metric_raw: float
    failed: bool = False


@dataclass
class Model:
    spec: ModelSpec
    mean: np.ndarray
    scale: np.ndarray  # 0 marks a constant column, zeroed after standardizing
    weights: np.ndarray  # (n_features,) or (n_classes, n_features)
    bias: np.ndarray
    classes: np.ndarray | None = None

    def _transform(self, X: np.ndarray) -> np.ndarray:
        safe = np.where(self.scale > 0, self.scale, 1.0)
        Z = (X - self.mean) / safe
        Z[:, self.scale == 0] = 0.0
        return Z

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        """Probability (logistic), prediction (linear), or per-class score matrix."""
        Z = self._transform(np.asarray(X, dtype=np.float64))
        if self.spec.kind == "ovr_logistic":
            return _sigmoid(Z @ self.weights.T + self.bias)
        raw = Z @ self.weights + self.bias[0]
        return _sigmoid(raw) if self.spec.kind == "logistic" else raw

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        scores = self.decision_scores(X)
        if self.spec.kind == "ovr_logistic":
            return self.classes[np.argmax(scores, axis=1)]
        if self.spec.kind == "logistic":
            return self.classes[(scores >= 0.5).astype(np.int64)]
        return scores


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-np.clip(z, -500, 500)))


def _standardize_fit(X: np.ndarray):
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    safe = np.where(scale > 0, scale, 1.0)
    Z = (X - mean) / safe
    Z[:, scale == 0] = 0.0
    return Z, mean, scale


def _gd(Z: np.ndarray, y: np.ndarray, spec: ModelSpec, logistic: bool):
    # convex objective, zero init: the result is deterministic by construction
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    for _ in range(spec.epochs):
        raw = Z @ w + b
        pred = _sigmoid(raw) if logistic else raw
        err = pred - y
        w -= spec.learning_rate * (Z.T @ err / n + spec.l2 * w)
        b -= spec.learning_rate * float(err.mean())
    return w, b


def fit(X, y, spec: ModelSpec, seed: int = 0) -> Model:
    """Standardize then run full-batch gradient descent. `seed` is accepted for
    interface stability; the zero-initialized solvers are seed-independent."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D and aligned with y")
    if len(X) < 2:
        raise ValueError("need at least 2 training rows")
    if not np.isfinite(X).all():
        raise ValueError("training features must be finite")
    Z, mean, scale = _standardize_fit(X)

    if spec.kind == "linear":
        w, b = _gd(Z, y.astype(np.float64), spec, logistic=False)
        return Model(spec, mean, scale, w, np.array([b]))

    classes = np.unique(y)
    if len(classes) < 2:
        raise ValueError("classification needs at least 2 classes in train")
    if spec.kind == "logistic":
        if len(classes) != 2:
            raise ValueError("logistic model needs binary labels; use ovr_logistic")
        y01 = (y == classes[1]).astype(np.float64)
        w, b = _gd(Z, y01, spec, logistic=True)
        return Model(spec, mean, scale, w, np.array([b]), classes)
    rows_w, rows_b = [], []
    for cls in classes:
        w, b = _gd(Z, (y == cls).astype(np.float64), spec, logistic=True)
        rows_w.append(w)
        rows_b.append(b)
    return Model(spec, mean, scale, np.array(rows_w), np.array(rows_b), classes)


def average_ranks(x: np.ndarray) -> np.ndarray:
    """1-based ranks with average tie handling."""
    x = np.asarray(x)
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(len(x), dtype=np.float64)
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc(scores, labels) -> float:
    """Mann-Whitney AUC; ties contribute 1/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == np.max(labels)
    n_pos = int(pos.sum())
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs both classes present")
    ranks = average_ranks(scores)
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def macro_f1(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    classes = np.unique(np.concatenate([y_true, y_pred]))
    scores = []
    for cls in classes:
        tp = int(((y_true == cls) & (y_pred == cls)).sum())
        fp = int(((y_true != cls) & (y_pred == cls)).sum())
        fn = int(((y_true == cls) & (y_pred != cls)).sum())
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def rmse(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    return float(np.sqrt(np.mean((y_true - y_pred) ** 2)))


def loss(model: Model, X, y, task: TaskKind) -> LossValue:
    """Validation loss: 1-AUC, 1-macroF1, or RMSE."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if len(y) == 0:
        raise ValueError("validation set must be non-empty")
    if task is TaskKind.BINARY:
        if len(np.unique(y)) < 2:
            return LossValue(0.5, 0.5)
        raw = auc(model.decision_scores(X), y)
        return LossValue(1.0 - raw, raw)
    if task is TaskKind.MULTICLASS:
        raw = macro_f1(y, model.predict_labels(X))
        return LossValue(1.0 - raw, raw)
    raw = rmse(y, model.decision_scores(X))
    return LossValue(raw, raw)


def query_objective(
    query: CandidateQuery,
    relevant: Table,
    train: Table,
    valid: Table,
    base_train: np.ndarray,
    base_valid: np.ndarray,
    y_train: np.ndarray,
    y_valid: np.ndarray,
    spec: ModelSpec,
    task: TaskKind,
    fill: float = 0.0,
    seed: int = 0,
) -> LossValue:
    """Validation loss of the model trained with the query's feature appended.

    Failures (degenerate fits, single-class splits) come back as a finite
    worst-loss sentinel so search loops keep running.
    """
    try:
        fc_train, fc_valid = execute_many(query, relevant, [train, valid], fill)
        X_train = np.column_stack([base_train, fc_train.values])
        X_valid = np.column_stack([base_valid, fc_valid.values])
        model = fit(X_train, y_train, spec, seed)
        return loss(model, X_valid, y_valid, task)
    except (ValueError, KeyError, FloatingPointError):
        return LossValue(WORST_LOSS, 0.0, failed=True)
