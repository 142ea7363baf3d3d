"""Shapley feature attribution for fitted classifiers.

Attribution targets the predicted class probability. The workhorse is
permutation-sampling Monte Carlo (model-agnostic, any dimension); the
exhaustive subset enumeration is exact and serves as its oracle at small
dimension. Both share the same value function: v(S) = mean over background
rows of the model output with the explained row's features on S and the
background row's features elsewhere.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from itertools import combinations
from math import comb
from typing import Optional, Sequence

import numpy as np

from .errors import InputError
from .seeds import derived_rng

EXHAUSTIVE_LIMIT = 12
_PREDICT_CHUNK = 65536


@dataclass(frozen=True)
class Attribution:
    instance_id: str
    target_class: str
    base_value: float                       # E[f] over background
    contributions: np.ndarray               # one per feature
    standard_errors: Optional[np.ndarray]   # None for exhaustive
    method: str                             # "monte_carlo" | "exhaustive"

    @property
    def total(self) -> float:
        return self.base_value + float(self.contributions.sum())


def _class_index(model, target_class: str) -> int:
    try:
        return model.classes.index(target_class)
    except ValueError:
        raise InputError(f"model has no class {target_class!r} "
                         f"(classes: {model.classes})") from None


def _proba_chunked(model, rows: np.ndarray, class_index: int) -> np.ndarray:
    out = np.empty(len(rows))
    for start in range(0, len(rows), _PREDICT_CHUNK):
        chunk = rows[start:start + _PREDICT_CHUNK]
        out[start:start + _PREDICT_CHUNK] = model.predict_proba(chunk)[:, class_index]
    return out


def shapley_monte_carlo(model, background: np.ndarray, x: np.ndarray,
                        target_class: str, n_permutations: int = 200,
                        seed: int = 0, instance_id: str = "") -> Attribution:
    """Permutation-sampling Shapley estimate with per-feature standard errors.

    Each sampled permutation draws one background row, then walks the
    permutation inserting x's features one at a time; the model-output
    delta at each insertion step is the marginal contribution of the
    inserted feature. All intermediate rows are known in advance, so the
    model is called once on the whole batch.
    """
    if n_permutations < 1:
        raise InputError("n_permutations must be >= 1")
    background = np.asarray(background, dtype=float)
    if background.ndim != 2 or len(background) == 0:
        raise InputError("background must be a non-empty 2-D array")
    x = np.asarray(x, dtype=float).ravel()
    n_perm, d = n_permutations, background.shape[1]
    if x.shape[0] != d:
        raise InputError(f"x has {x.shape[0]} features, background has {d}")
    c = _class_index(model, target_class)
    rng = derived_rng(seed)
    perms = np.array([rng.permutation(d) for _ in range(n_perm)])
    rows = np.empty((n_perm, d + 1, d))
    rows[:, 0, :] = background[rng.integers(len(background), size=n_perm)]
    arange = np.arange(n_perm)
    for step in range(d):
        rows[:, step + 1, :] = rows[:, step, :]
        rows[arange, step + 1, perms[:, step]] = x[perms[:, step]]
    proba = _proba_chunked(model, rows.reshape(-1, d), c).reshape(n_perm, d + 1)
    deltas = np.diff(proba, axis=1)                    # (n_perm, d) in walk order
    marginal = np.zeros((n_perm, d))
    marginal[arange[:, None], perms] = deltas          # reorder to feature order
    contributions = marginal.mean(0)
    se = marginal.std(0, ddof=1) / np.sqrt(n_perm) if n_perm > 1 else np.zeros(d)
    base = float(_proba_chunked(model, background, c).mean())
    return Attribution(instance_id=instance_id, target_class=target_class,
                       base_value=base, contributions=contributions,
                       standard_errors=se, method="monte_carlo")


def shapley_exhaustive(model, background: np.ndarray, x: np.ndarray,
                       target_class: str, instance_id: str = "") -> Attribution:
    """Exact Shapley values by full subset enumeration (≤ 12 features)."""
    background = np.asarray(background, dtype=float)
    if background.ndim != 2 or len(background) == 0:
        raise InputError("background must be a non-empty 2-D array")
    x = np.asarray(x, dtype=float).ravel()
    d = background.shape[1]
    if d > EXHAUSTIVE_LIMIT:
        raise InputError(f"{d} features exceeds the exhaustive limit of "
                         f"{EXHAUSTIVE_LIMIT}; use the Monte Carlo estimator")
    c = _class_index(model, target_class)
    n_bg = len(background)
    n_subsets = 1 << d
    rows = np.tile(background, (n_subsets, 1))
    for mask in range(n_subsets):
        block = rows[mask * n_bg:(mask + 1) * n_bg]
        for j in range(d):
            if mask >> j & 1:
                block[:, j] = x[j]
    proba = _proba_chunked(model, rows, c)
    values = proba.reshape(n_subsets, n_bg).mean(1)    # v(S) per subset bit mask
    contributions = np.zeros(d)
    for j in range(d):
        others = [f for f in range(d) if f != j]
        total = 0.0
        for size in range(d):
            weight = 1.0 / (d * comb(d - 1, size))
            for subset in combinations(others, size):
                mask = 0
                for f in subset:
                    mask |= 1 << f
                total += weight * (values[mask | (1 << j)] - values[mask])
        contributions[j] = total
    return Attribution(instance_id=instance_id, target_class=target_class,
                       base_value=float(values[0]), contributions=contributions,
                       standard_errors=None, method="exhaustive")


def _negated(att: Attribution, other_class: str) -> Attribution:
    """Binary complement: P(other) = 1 - P(target), so values negate."""
    return replace(att, target_class=other_class, base_value=1.0 - att.base_value,
                   contributions=-att.contributions)


def mean_abs_attribution(model, X: np.ndarray, instance_ids: Sequence[str],
                         n_permutations: int = 200, seed: int = 0,
                         background: Optional[np.ndarray] = None,
                         ) -> tuple[list[Attribution], np.ndarray]:
    """All per-instance attributions plus mean |value| per (feature, class).

    Instances are attributed once per model class against a shared
    background (defaults to X itself). For binary models the second class
    is the exact complement of the first and is derived, not re-estimated.
    Returns the flat attribution list ordered by (class, instance) and an
    array of shape (n_features, n_classes) of mean absolute values.
    """
    X = np.asarray(X, dtype=float)
    bg = X if background is None else np.asarray(background, dtype=float)
    classes = model.classes
    computed = classes[:1] if len(classes) == 2 else classes
    by_class: dict[str, list[Attribution]] = {cls: [] for cls in classes}
    for cls in computed:
        for i in range(len(X)):
            att = shapley_monte_carlo(model, bg, X[i], cls,
                                      n_permutations=n_permutations,
                                      seed=seed, instance_id=str(instance_ids[i]))
            by_class[cls].append(att)
    if len(classes) == 2:
        by_class[classes[1]] = [_negated(att, classes[1]) for att in by_class[classes[0]]]
    attributions = [att for cls in classes for att in by_class[cls]]
    table = np.zeros((X.shape[1], len(classes)))
    for ci, cls in enumerate(classes):
        table[:, ci] = np.mean([np.abs(att.contributions) for att in by_class[cls]], axis=0)
    return attributions, table


def sample_background(X: np.ndarray, size: int, seed: int) -> np.ndarray:
    """Seeded background subsample (without replacement when possible)."""
    X = np.asarray(X, dtype=float)
    if len(X) <= size:
        return X.copy()
    idx = derived_rng(seed, 97).choice(len(X), size=size, replace=False)
    return X[np.sort(idx)]


def write_attributions_csv(attributions: Sequence[Attribution],
                           feature_names: Sequence[str], path: str,
                           comment: Optional[str] = None) -> None:
    """Plot-ready long format: instance, feature, class, value, std error."""
    with open(path, "w", newline="") as f:
        if comment:
            f.write(f"# {comment}\n")
        writer = csv.writer(f)
        writer.writerow(("instance", "feature", "class", "value", "stderr"))
        for att in attributions:
            ses = att.standard_errors
            for j, name in enumerate(feature_names):
                writer.writerow((att.instance_id, name, att.target_class,
                                 "%.17g" % att.contributions[j],
                                 "" if ses is None else "%.17g" % ses[j]))
