"""Low-cost stand-ins for model validation loss: plug-in mutual information,
absolute Spearman correlation, and a quick linear-model score.

Higher is better for every proxy. Degenerate candidate features (constant, or
entirely fill-imputed) get the worst score instead of an error so that search
loops never halt mid-run.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from featforge import models
from featforge.engine import FeatureColumn
from featforge.models import ModelSpec, TaskKind, average_ranks
from featforge.table import nearest_rank_quantile


class ProxyKind(enum.Enum):
    MI = "mi"
    SPEARMAN = "spearman"
    LR = "lr"


@dataclass(frozen=True)
class ProxyScore:
    value: float
    degenerate: bool = False


def _feature_values(feature) -> tuple[np.ndarray, float]:
    if isinstance(feature, FeatureColumn):
        return np.asarray(feature.values, dtype=np.float64), feature.missing_fraction
    return np.asarray(feature, dtype=np.float64), 0.0


def _is_degenerate(values: np.ndarray, missing_fraction: float) -> bool:
    return missing_fraction >= 1.0 or len(values) == 0 or values.min() == values.max()


def equal_frequency_codes(values: np.ndarray, bins: int) -> np.ndarray:
    """Discretize into at most `bins` equal-frequency bins; tied values share a bin."""
    ordered = np.sort(values)
    edges = sorted({nearest_rank_quantile(ordered, k / bins) for k in range(1, bins)})
    return np.searchsorted(np.asarray(edges), values, side="right")


def _mi_from_codes(x_codes: np.ndarray, y_codes: np.ndarray) -> float:
    n = len(x_codes)
    _, xi = np.unique(x_codes, return_inverse=True)
    _, yi = np.unique(y_codes, return_inverse=True)
    n_x = xi.max() + 1
    n_y = yi.max() + 1
    joint = np.zeros((n_x, n_y))
    np.add.at(joint, (xi, yi), 1.0)
    joint /= n
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float((joint[nz] * np.log(joint[nz] / (px @ py)[nz])).sum())


def mutual_information(feature, labels, bins: int = 10, discrete_labels: bool = True) -> ProxyScore:
    """Plug-in MI (nats) between the equal-frequency-binned feature and the labels.

    Classification labels join the histogram as-is; regression labels are binned
    the same way as the feature.
    """
    values, missing = _feature_values(feature)
    labels = np.asarray(labels)
    if len(values) != len(labels):
        raise ValueError(f"length mismatch: feature {len(values)}, labels {len(labels)}")
    if bins < 2:
        raise ValueError("bins must be >= 2")
    if _is_degenerate(values, missing):
        return ProxyScore(0.0, degenerate=True)
    x_codes = equal_frequency_codes(values, bins)
    if discrete_labels:
        _, y_codes = np.unique(labels, return_inverse=True)
    else:
        y_codes = equal_frequency_codes(labels.astype(np.float64), bins)
    return ProxyScore(max(_mi_from_codes(x_codes, y_codes), 0.0))


def spearman(feature, labels) -> ProxyScore:
    """Absolute Spearman rank correlation; the closed form when there are no ties,
    Pearson over average ranks otherwise."""
    values, missing = _feature_values(feature)
    labels = np.asarray(labels, dtype=np.float64)
    if len(values) != len(labels):
        raise ValueError(f"length mismatch: feature {len(values)}, labels {len(labels)}")
    if len(values) < 2:
        raise ValueError("need at least 2 rows")
    if _is_degenerate(values, missing) or labels.min() == labels.max():
        return ProxyScore(0.0, degenerate=True)
    n = len(values)
    no_ties = len(np.unique(values)) == n and len(np.unique(labels)) == n
    rx = average_ranks(values)
    ry = average_ranks(labels)
    if no_ties:
        d = rx - ry
        rho = 1.0 - 6.0 * float(d @ d) / (n * (n * n - 1))
    else:
        cx = rx - rx.mean()
        cy = ry - ry.mean()
        rho = float(cx @ cy) / float(np.sqrt((cx @ cx) * (cy @ cy)))
    return ProxyScore(abs(rho))


def lr_proxy(
    feature,
    labels,
    task: TaskKind = TaskKind.BINARY,
    split_seed: int = 0,
    spec: ModelSpec | None = None,
) -> ProxyScore:
    """Held-out score of a one-feature linear model: AUC for classification,
    negated RMSE for regression, on a deterministic 70/30 split."""
    values, missing = _feature_values(feature)
    labels = np.asarray(labels)
    if len(values) != len(labels):
        raise ValueError(f"length mismatch: feature {len(values)}, labels {len(labels)}")
    if len(values) < 10:
        raise ValueError("need at least 10 rows")
    if _is_degenerate(values, missing):
        if task.is_classification:
            return ProxyScore(0.5, degenerate=True)
        return ProxyScore(-float(np.std(labels.astype(np.float64))), degenerate=True)

    perm = np.random.default_rng(split_seed).permutation(len(values))
    cut = int(np.floor(0.7 * len(values)))
    tr, ho = perm[:cut], perm[cut:]
    X_tr, X_ho = values[tr, None], values[ho, None]
    if spec is None:
        kind = {TaskKind.BINARY: "logistic", TaskKind.MULTICLASS: "ovr_logistic",
                TaskKind.REGRESSION: "linear"}[task]
        spec = ModelSpec(kind=kind)
    try:
        if task is TaskKind.BINARY:
            if len(np.unique(labels[ho])) < 2:
                return ProxyScore(0.5, degenerate=True)
            model = models.fit(X_tr, labels[tr], spec)
            return ProxyScore(models.auc(model.decision_scores(X_ho), labels[ho]))
        if task is TaskKind.MULTICLASS:
            model = models.fit(X_tr, labels[tr], spec)
            return ProxyScore(models.macro_f1(labels[ho], model.predict_labels(X_ho)))
        model = models.fit(X_tr, labels[tr].astype(np.float64), spec)
        return ProxyScore(-models.rmse(labels[ho], model.decision_scores(X_ho)))
    except ValueError:
        worst = 0.5 if task.is_classification else -float(np.std(labels.astype(np.float64)))
        return ProxyScore(worst, degenerate=True)


def proxy_score(
    kind: ProxyKind,
    feature,
    labels,
    task: TaskKind = TaskKind.BINARY,
    bins: int = 10,
    seed: int = 0,
) -> ProxyScore:
    if kind is ProxyKind.MI:
        return mutual_information(feature, labels, bins, discrete_labels=task.is_classification)
    if kind is ProxyKind.SPEARMAN:
        return spearman(feature, labels)
    return lr_proxy(feature, labels, task, seed)
