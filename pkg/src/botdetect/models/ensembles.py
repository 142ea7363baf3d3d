"""Tree-ensemble classifiers: random forest, gradient boosting, AdaBoost.

Individual trees are fitted with scikit-learn, then exported to flat
arrays (see trees.py); ensemble logic and every prediction run on those
arrays. A saved model file is therefore plain versioned JSON that fully
determines future predictions.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.ensemble import GradientBoostingClassifier, RandomForestClassifier
from sklearn.tree import DecisionTreeClassifier

from ..errors import InputError
from ..seeds import derived_int
from .trees import TreeArrays, export_tree, tree_predict_value

MODEL_FORMAT = 1
CLASSIFIER_KINDS = ("random_forest", "gradient_boosting", "adaboost")


def _check_classes(y: Sequence[str]) -> tuple[str, ...]:
    classes = tuple(sorted(set(y)))
    if len(classes) < 2:
        raise InputError(f"need at least 2 classes to fit, got {classes}")
    return classes


def _encode(y: Sequence[str], classes: tuple[str, ...]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    return np.array([index[v] for v in y], dtype=np.int64)


class _ClassifierBase:
    """Shared prediction plumbing; subclasses provide predict_proba."""

    classes: tuple[str, ...]

    def predict(self, X: np.ndarray) -> np.ndarray:
        proba = self.predict_proba(X)
        return np.array(self.classes, dtype=object)[proba.argmax(1)]


@dataclass
class RandomForestModel(_ClassifierBase):
    classes: tuple[str, ...]
    seed: int
    n_estimators: int
    max_features: int
    trees: list[TreeArrays] = field(repr=False, default_factory=list)

    kind = "random_forest"

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        total = np.zeros((len(X), len(self.classes)))
        for tree in self.trees:
            total += tree_predict_value(tree, X)
        return total / len(self.trees)

    def hyperparameters(self) -> dict:
        return {"n_estimators": self.n_estimators, "max_features": self.max_features}

    def parameters(self) -> dict:
        return {"trees": [t.to_json() for t in self.trees]}

    @classmethod
    def _from_parts(cls, classes, seed, hyper, params):
        return cls(classes=classes, seed=seed, n_estimators=hyper["n_estimators"],
                   max_features=hyper["max_features"],
                   trees=[TreeArrays.from_json(t) for t in params["trees"]])


def fit_random_forest(X: np.ndarray, y: Sequence[str], n_trees: int = 400,
                      seed: int = 0) -> RandomForestModel:
    """Bagged Gini CART trees; ceil(sqrt(d)) candidate features per split."""
    X = np.asarray(X, dtype=float)
    classes = _check_classes(y)
    max_features = max(1, math.ceil(math.sqrt(X.shape[1])))
    forest = RandomForestClassifier(n_estimators=n_trees, max_features=max_features,
                                    n_jobs=1, random_state=derived_int(seed))
    forest.fit(X, _encode(y, classes))
    return RandomForestModel(classes=classes, seed=seed, n_estimators=n_trees,
                             max_features=max_features,
                             trees=[export_tree(e, normalize=True)
                                    for e in forest.estimators_])


@dataclass
class GradientBoostingModel(_ClassifierBase):
    classes: tuple[str, ...]
    seed: int
    rounds: int
    depth: int
    rate: float
    init_raw: np.ndarray = field(repr=False, default=None)   # (1,) binary, (K,) multiclass
    trees: list[list[TreeArrays]] = field(repr=False, default_factory=list)
    # trees[m] holds one regression tree (binary) or K trees (multiclass)

    kind = "gradient_boosting"

    def raw_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        raw = np.tile(self.init_raw, (len(X), 1))
        for stage in self.trees:
            for j, tree in enumerate(stage):
                raw[:, j] += self.rate * tree_predict_value(tree, X)[:, 0]
        return raw

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raw = self.raw_scores(X)
        if len(self.classes) == 2:
            p1 = 1.0 / (1.0 + np.exp(-raw[:, 0]))
            return np.column_stack([1.0 - p1, p1])
        shifted = raw - raw.max(1, keepdims=True)
        e = np.exp(shifted)
        return e / e.sum(1, keepdims=True)

    def hyperparameters(self) -> dict:
        return {"rounds": self.rounds, "depth": self.depth, "rate": self.rate}

    def parameters(self) -> dict:
        return {"init_raw": self.init_raw.tolist(),
                "trees": [[t.to_json() for t in stage] for stage in self.trees]}

    @classmethod
    def _from_parts(cls, classes, seed, hyper, params):
        return cls(classes=classes, seed=seed, rounds=hyper["rounds"],
                   depth=hyper["depth"], rate=hyper["rate"],
                   init_raw=np.array(params["init_raw"], dtype=float),
                   trees=[[TreeArrays.from_json(t) for t in stage]
                          for stage in params["trees"]])


def fit_gradient_boosting(X: np.ndarray, y: Sequence[str], rounds: int = 100,
                          depth: int = 3, rate: float = 0.1,
                          seed: int = 0) -> GradientBoostingModel:
    """Stagewise regression trees on logistic (binary) or softmax loss.

    rate=0 shortcuts to the constant prior model: no trees, raw scores are
    the class-prior log-odds (binary) or centered log priors (multiclass).
    """
    X = np.asarray(X, dtype=float)
    classes = _check_classes(y)
    y_enc = _encode(y, classes)
    n_raw = 1 if len(classes) == 2 else len(classes)
    priors = np.bincount(y_enc, minlength=len(classes)) / len(y_enc)
    if rate == 0.0 or rounds == 0:
        if len(classes) == 2:
            init = np.array([math.log(priors[1] / priors[0])])
        else:
            logp = np.log(priors)
            init = logp - logp.mean()
        return GradientBoostingModel(classes=classes, seed=seed, rounds=rounds,
                                     depth=depth, rate=rate, init_raw=init, trees=[])
    clf = GradientBoostingClassifier(n_estimators=rounds, max_depth=depth,
                                     learning_rate=rate, random_state=derived_int(seed))
    clf.fit(X, y_enc)
    stages = [[export_tree(clf.estimators_[m, j], normalize=False)
               for j in range(clf.estimators_.shape[1])]
              for m in range(clf.estimators_.shape[0])]
    model = GradientBoostingModel(classes=classes, seed=seed, rounds=rounds,
                                  depth=depth, rate=rate,
                                  init_raw=np.zeros(n_raw), trees=stages)
    # recover the constant initial raw score: decision_function minus the
    # tree contributions must be the same constant for every row
    probe = X[: min(len(X), 8)]
    dec = clf.decision_function(probe)
    if dec.ndim == 1:
        dec = dec[:, None]
    residual = dec - model.raw_scores(probe)
    if np.ptp(residual, axis=0).max() > 1e-8:
        raise AssertionError("non-constant boosting init; tree export is inconsistent")
    model.init_raw = residual[0].copy()
    return model


@dataclass
class AdaBoostModel(_ClassifierBase):
    classes: tuple[str, ...]
    seed: int
    rounds: int
    stumps: list[TreeArrays] = field(repr=False, default_factory=list)
    alphas: list[float] = field(default_factory=list)
    fallback_prior: Optional[np.ndarray] = field(repr=False, default=None)

    kind = "adaboost"

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if not self.stumps:
            # every weak learner was rejected during fitting: fall back to
            # the training class priors
            return np.tile(self.fallback_prior, (len(X), 1))
        votes = np.zeros((len(X), len(self.classes)))
        for stump, alpha in zip(self.stumps, self.alphas):
            pred = tree_predict_value(stump, X).argmax(1)
            votes[np.arange(len(X)), pred] += alpha
        return votes / votes.sum(1, keepdims=True)

    def hyperparameters(self) -> dict:
        return {"rounds": self.rounds}

    def parameters(self) -> dict:
        return {"stumps": [s.to_json() for s in self.stumps],
                "alphas": list(self.alphas),
                "fallback_prior": None if self.fallback_prior is None
                else self.fallback_prior.tolist()}

    @classmethod
    def _from_parts(cls, classes, seed, hyper, params):
        fallback = params.get("fallback_prior")
        return cls(classes=classes, seed=seed, rounds=hyper["rounds"],
                   stumps=[TreeArrays.from_json(s) for s in params["stumps"]],
                   alphas=list(params["alphas"]),
                   fallback_prior=None if fallback is None else np.array(fallback))


def fit_adaboost(X: np.ndarray, y: Sequence[str], rounds: int = 50,
                 seed: int = 0) -> AdaBoostModel:
    """Multiclass SAMME boosting of depth-1 stumps.

    A stump with weighted error 0 gets weight 1 and ends boosting; one with
    error at or beyond the random-guess bound 1 - 1/K is discarded and ends
    boosting.
    """
    X = np.asarray(X, dtype=float)
    classes = _check_classes(y)
    y_enc = _encode(y, classes)
    n, k_classes = len(y_enc), len(classes)
    w = np.full(n, 1.0 / n)
    model = AdaBoostModel(classes=classes, seed=seed, rounds=rounds,
                          fallback_prior=np.bincount(y_enc, minlength=k_classes) / n)
    for m in range(rounds):
        sk_stump = DecisionTreeClassifier(max_depth=1, random_state=derived_int(seed, m))
        sk_stump.fit(X, y_enc, sample_weight=w)
        stump = export_tree(sk_stump, normalize=True)
        pred = tree_predict_value(stump, X).argmax(1)
        wrong = pred != y_enc
        err = float(w[wrong].sum() / w.sum())
        if err >= 1.0 - 1.0 / k_classes:
            break
        if err == 0.0:
            model.stumps.append(stump)
            model.alphas.append(1.0)
            break
        alpha = math.log((1.0 - err) / err) + math.log(k_classes - 1.0)
        model.stumps.append(stump)
        model.alphas.append(alpha)
        w = w * np.exp(alpha * wrong)
        w = w / w.sum()
    return model


_MODEL_CLASSES = {"random_forest": RandomForestModel,
                  "gradient_boosting": GradientBoostingModel,
                  "adaboost": AdaBoostModel}


def classifier_to_json(model) -> dict:
    return {"format": MODEL_FORMAT, "kind": model.kind,
            "classes": list(model.classes), "seed": model.seed,
            "hyperparameters": model.hyperparameters(),
            "parameters": model.parameters()}


def classifier_from_json(doc: dict):
    if doc.get("format") != MODEL_FORMAT:
        raise InputError(f"unsupported model format {doc.get('format')!r}")
    kind = doc.get("kind")
    if kind not in _MODEL_CLASSES:
        raise InputError(f"unknown classifier kind {kind!r}")
    return _MODEL_CLASSES[kind]._from_parts(tuple(doc["classes"]), doc["seed"],
                                            doc["hyperparameters"], doc["parameters"])


def save_classifier(model, path: str, provenance: Optional[dict] = None) -> None:
    doc = classifier_to_json(model)
    if provenance:
        doc["provenance"] = provenance
    with open(path, "w") as f:
        json.dump(doc, f, separators=(",", ":"), sort_keys=True)
        f.write("\n")


def load_classifier(path: str):
    try:
        with open(path) as f:
            doc = json.load(f)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON ({exc})") from None
    return classifier_from_json(doc)
