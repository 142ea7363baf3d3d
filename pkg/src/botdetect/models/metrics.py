"""Evaluation metrics: classification scores, cluster quality, CV driver."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.spatial.distance import cdist
from scipy.stats import t as t_dist

from ..errors import InputError
from ..features import FeatureMatrix
from .preprocess import fit_preprocessor, matrix_to_array


@dataclass
class MetricsReport:
    mode: str                      # "binary:<positive class>" or "macro"
    accuracy: float
    precision: float
    recall: float
    f1: float
    classes: tuple[str, ...]
    per_class: dict[str, dict[str, float]]
    confusion: dict[str, dict[str, int]]   # confusion[true][pred]

    def to_json(self) -> dict:
        return {"mode": self.mode, "accuracy": self.accuracy,
                "precision": self.precision, "recall": self.recall, "f1": self.f1,
                "classes": list(self.classes), "per_class": self.per_class,
                "confusion": self.confusion}


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    """Precision/recall/F1 with the zero-denominator-means-zero convention."""
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def classification_metrics(y_true: Sequence[str], y_pred: Sequence[str],
                           positive_class: Optional[str] = None) -> MetricsReport:
    """Accuracy, precision, recall, F1 plus the full confusion table.

    With positive_class set, precision/recall/F1 describe that class alone;
    otherwise they are macro averages (unweighted mean of the per-class
    one-vs-rest values).
    """
    if len(y_true) != len(y_pred):
        raise InputError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if len(y_true) == 0:
        raise InputError("empty evaluation set")
    classes = tuple(sorted(set(y_true) | set(y_pred)))
    confusion = {c: {c2: 0 for c2 in classes} for c in classes}
    for yt, yp in zip(y_true, y_pred):
        confusion[yt][yp] += 1
    accuracy = sum(confusion[c][c] for c in classes) / len(y_true)
    per_class = {}
    for c in classes:
        tp = confusion[c][c]
        fp = sum(confusion[o][c] for o in classes if o != c)
        fn = sum(confusion[c][o] for o in classes if o != c)
        p, r, f = _prf(tp, fp, fn)
        per_class[c] = {"precision": p, "recall": r, "f1": f,
                        "support": sum(confusion[c].values())}
    if positive_class is not None:
        if positive_class not in classes:
            raise InputError(f"positive class {positive_class!r} absent from labels")
        stats = per_class[positive_class]
        return MetricsReport(mode=f"binary:{positive_class}", accuracy=accuracy,
                             precision=stats["precision"], recall=stats["recall"],
                             f1=stats["f1"], classes=classes, per_class=per_class,
                             confusion=confusion)
    return MetricsReport(mode="macro", accuracy=accuracy,
                         precision=float(np.mean([per_class[c]["precision"] for c in classes])),
                         recall=float(np.mean([per_class[c]["recall"] for c in classes])),
                         f1=float(np.mean([per_class[c]["f1"] for c in classes])),
                         classes=classes, per_class=per_class, confusion=confusion)


@dataclass
class ClusterRow:
    cluster_id: int
    size: int
    purity: float
    entropy: float
    majority: str

    def to_json(self) -> dict:
        return {"cluster": self.cluster_id, "size": self.size, "purity": self.purity,
                "entropy": self.entropy, "majority": self.majority}


@dataclass
class ClusterReport:
    rows: list[ClusterRow]
    weighted_purity: float
    weighted_entropy: float
    n_rows: int
    n_label_classes: int

    def to_json(self) -> dict:
        return {"clusters": [r.to_json() for r in self.rows],
                "weighted_purity": self.weighted_purity,
                "weighted_entropy": self.weighted_entropy,
                "n_rows": self.n_rows, "n_label_classes": self.n_label_classes}


def cluster_quality(assignments: Sequence[int], labels: Sequence[str]) -> ClusterReport:
    """Per-cluster purity and normalized entropy against reference labels.

    Purity is the majority-class share; entropy is normalized by ln of the
    number of distinct reference classes so a uniform class mix scores 1.
    Overall values weight each cluster by its share of all rows.
    """
    if len(assignments) != len(labels):
        raise InputError(f"length mismatch: {len(assignments)} assignments "
                         f"vs {len(labels)} labels")
    if len(labels) == 0:
        raise InputError("empty clustering")
    label_classes = sorted(set(labels))
    denom = math.log(len(label_classes)) if len(label_classes) > 1 else None
    per_cluster: dict[int, Counter] = {}
    for a, y in zip(assignments, labels):
        per_cluster.setdefault(int(a), Counter())[y] += 1
    rows = []
    total = len(labels)
    w_purity = w_entropy = 0.0
    for cid in sorted(per_cluster):
        counts = per_cluster[cid]
        size = sum(counts.values())
        top = max(counts.values())
        purity = top / size
        if denom is None:
            entropy = 0.0
        else:
            entropy = -sum((c / size) * math.log(c / size)
                           for c in counts.values() if c > 0) / denom + 0.0
        majority = next(c for c in label_classes if counts.get(c, 0) == top)
        rows.append(ClusterRow(cluster_id=cid, size=size, purity=purity,
                               entropy=entropy, majority=majority))
        w_purity += size / total * purity
        w_entropy += size / total * entropy
    return ClusterReport(rows=rows, weighted_purity=w_purity, weighted_entropy=w_entropy,
                         n_rows=total, n_label_classes=len(label_classes))


def silhouette_score(X: np.ndarray, assignments: Sequence[int]) -> float:
    """Mean silhouette (b−a)/max(a,b); singleton clusters score 0."""
    X = np.asarray(X, dtype=float)
    assign = np.asarray(assignments)
    cluster_ids = np.unique(assign)
    if len(cluster_ids) < 2:
        raise InputError("silhouette needs at least 2 clusters")
    dist = cdist(X, X)
    scores = np.zeros(len(X))
    members = {cid: np.flatnonzero(assign == cid) for cid in cluster_ids}
    for i in range(len(X)):
        own = members[assign[i]]
        if len(own) == 1:
            continue
        a = dist[i, own].sum() / (len(own) - 1)
        b = min(dist[i, members[cid]].mean() for cid in cluster_ids if cid != assign[i])
        m = max(a, b)
        scores[i] = (b - a) / m if m > 0 else 0.0
    return float(scores.mean())


def elbow_select(curve: Sequence[tuple[int, float]]) -> int:
    """k at the sharpest bend: maximize value(k−1) − 2·value(k) + value(k+1).

    Ties resolve to the smallest k. The curve must have at least 3 points
    with strictly ascending k.
    """
    if len(curve) < 3:
        raise InputError("elbow selection needs at least 3 (k, value) points")
    ks = [k for k, _ in curve]
    if any(b <= a for a, b in zip(ks, ks[1:])):
        raise InputError("k values must be strictly ascending")
    values = [v for _, v in curve]
    best_k, best_bend = None, -math.inf
    for i in range(1, len(curve) - 1):
        bend = values[i - 1] - 2 * values[i] + values[i + 1]
        if bend > best_bend:
            best_k, best_bend = ks[i], bend
    return best_k


def t_confidence_interval(scores: Sequence[float],
                          level: float = 0.95) -> tuple[float, float, float]:
    """(mean, lo, hi) Student-t interval over per-fold scores."""
    scores = np.asarray(scores, dtype=float)
    mean = float(scores.mean())
    k = len(scores)
    if k < 2:
        return mean, mean, mean
    s = float(scores.std(ddof=1))
    half = float(t_dist.ppf(0.5 + level / 2, k - 1)) * s / math.sqrt(k)
    return mean, mean - half, mean + half


def format_mean_ci(mean: float, lo: float, hi: float, digits: int = 2) -> str:
    return f"{mean:.{digits}f} ({lo:.{digits}f}, {hi:.{digits}f})"


CV_METRICS = ("accuracy", "precision", "recall", "f1")


@dataclass
class CVReport:
    n_folds: int
    mode: str
    fold_scores: dict[str, list[float]]
    mean: dict[str, float] = field(default_factory=dict)
    ci: dict[str, tuple[float, float]] = field(default_factory=dict)
    confusion: dict[str, dict[str, int]] = field(default_factory=dict)

    def summary_lines(self) -> list[str]:
        return [f"{name}: {format_mean_ci(self.mean[name], *self.ci[name])}"
                for name in CV_METRICS]

    def to_json(self) -> dict:
        return {"n_folds": self.n_folds, "mode": self.mode,
                "metrics": {name: {"mean": self.mean[name],
                                   "ci95": list(self.ci[name]),
                                   "folds": self.fold_scores[name],
                                   "display": format_mean_ci(self.mean[name],
                                                             *self.ci[name])}
                            for name in CV_METRICS},
                "confusion": self.confusion}


def cross_validate(X: Union[FeatureMatrix, np.ndarray], labels: Sequence[str],
                   splits: Sequence[tuple[np.ndarray, np.ndarray]],
                   fit_fn: Callable[[np.ndarray, np.ndarray], object],
                   scale_kind: str = "minmax", imputation: str = "mean",
                   embed: bool = False,
                   positive_class: Optional[str] = None) -> CVReport:
    """Fit and score `fit_fn` across folds, preprocessing fitted per fold.

    The preprocessor sees only each fold's training rows, so no test-row
    statistics leak into scaling, imputation, or the embedding.
    """
    A = matrix_to_array(X)
    y = np.array(list(labels), dtype=object)
    fold_scores: dict[str, list[float]] = {name: [] for name in CV_METRICS}
    classes = tuple(sorted(set(labels)))
    confusion = {c: {c2: 0 for c2 in classes} for c in classes}
    for fold_no, (train, test) in enumerate(splits):
        y_train = y[train]
        if len(set(y_train)) < 2:
            raise InputError(f"fold {fold_no}: training split has a single class")
        pre = fit_preprocessor(A[train], kind=scale_kind, imputation=imputation,
                               embed=embed)
        model = fit_fn(pre.transform(A[train]), y_train)
        pred = model.predict(pre.transform(A[test]))
        report = classification_metrics(y[test], pred, positive_class=positive_class)
        for name in CV_METRICS:
            fold_scores[name].append(getattr(report, name))
        for c_true in report.classes:
            for c_pred, n in report.confusion[c_true].items():
                confusion[c_true][c_pred] = confusion[c_true].get(c_pred, 0) + n
    report = CVReport(n_folds=len(splits),
                      mode=f"binary:{positive_class}" if positive_class else "macro",
                      fold_scores=fold_scores, confusion=confusion)
    for name in CV_METRICS:
        mean, lo, hi = t_confidence_interval(fold_scores[name])
        report.mean[name] = mean
        report.ci[name] = (lo, hi)
    return report
