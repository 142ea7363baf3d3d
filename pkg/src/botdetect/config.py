"""Run configuration: one JSON file, flat flag overrides, stable hash.

A run is described by a single JSON document. Command-line flags may
override individual fields; overrides are applied before validation so
the effective configuration (and its hash, which stamps every output)
always reflects what actually ran. Relative paths are resolved against
the directory containing the config file.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .errors import InputError
from .models.cluster import COVARIANCE_TYPES
from .models.preprocess import IMPUTATIONS, SCALE_KINDS

CLUSTER_ALGORITHMS = ("kmeans", "gmm")
CLASSIFIER_KINDS = ("random_forest", "gradient_boosting", "adaboost")
DATASET_KINDS = ("binary", "multiclass")

_DEFAULTS: dict[str, Any] = {
    "blocks": "blocks.ndjson",
    "txs": "txs.ndjson",
    "logs": "logs.ndjson",
    "labels": "labels.csv",
    "mev_labels": None,
    "out_dir": "out",
    "block_range": None,           # required: [lo, hi]
    "test_block_count": 2,
    "seed": 1,
    "preprocessing": {
        "scale": "minmax",
        "imputation": "mean",
        "embed": False,
    },
    "cluster": {
        "algorithms": ["kmeans", "gmm"],
        "k_values": [5, 15, 30],
        "imputations": ["mean"],
        "embeds": [False],
        "k_scan": [2, 3, 4, 5, 6, 7, 8],
        "covariance": "diagonal",
    },
    "classify": {
        "datasets": ["binary"],
        "models": ["random_forest", "gradient_boosting", "adaboost"],
        "folds": 20,
        "stratified": True,
        "multiclass_folds": 5,
        "per_class": 5,
        "n_trees": 400,
        "gb_rounds": 100,
        "gb_depth": 3,
        "gb_rate": 0.1,
        "ada_rounds": 50,
    },
    "explain": {
        "n_permutations": 64,
        "background_size": 100,
        "top_n": 10,
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated, effective settings for one run."""
    blocks: str
    txs: str
    logs: str
    labels: str
    mev_labels: Optional[str]
    out_dir: str
    block_range: tuple[int, int]
    test_block_count: int
    seed: int
    preprocessing: dict[str, Any]
    cluster: dict[str, Any]
    classify: dict[str, Any]
    explain: dict[str, Any]
    sha256: str = field(default="", compare=False)

    @property
    def test_blocks(self) -> tuple[int, int]:
        """The trailing block window reserved for labeled evaluation."""
        lo, hi = self.block_range
        return hi - self.test_block_count + 1, hi

    def out_path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)


def _merge(defaults: dict, given: dict, where: str) -> dict:
    out = copy.deepcopy(defaults)
    for key, value in given.items():
        if key not in defaults:
            raise InputError(f"unknown config key {where}{key!r}")
        if isinstance(defaults[key], dict) and defaults[key]:
            if not isinstance(value, dict):
                raise InputError(f"config key {where}{key!r} must be an object")
            out[key] = _merge(defaults[key], value, f"{where}{key}.")
        else:
            out[key] = value
    return out


def _apply_overrides(doc: dict, overrides: dict[str, Any]) -> None:
    """Set dotted-path overrides (e.g. 'classify.folds') in place."""
    for path, value in overrides.items():
        if value is None:
            continue
        node = doc
        parts = path.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value


def _require_choice(value: str, allowed: Sequence[str], what: str) -> None:
    if value not in allowed:
        raise InputError(f"{what} must be one of {', '.join(allowed)}; got {value!r}")


def _validate(doc: dict) -> None:
    br = doc["block_range"]
    if (not isinstance(br, (list, tuple)) or len(br) != 2
            or not all(isinstance(b, int) for b in br)):
        raise InputError("block_range must be [lo, hi] with integer bounds")
    lo, hi = br
    if lo > hi:
        raise InputError(f"block_range lo {lo} > hi {hi}")
    tbc = doc["test_block_count"]
    if not isinstance(tbc, int) or tbc < 1:
        raise InputError("test_block_count must be a positive integer")
    if tbc > hi - lo:
        raise InputError(f"test_block_count {tbc} leaves no clustering blocks "
                         f"in range [{lo}, {hi}]")
    if not isinstance(doc["seed"], int):
        raise InputError("seed must be an integer")
    pre = doc["preprocessing"]
    _require_choice(pre["scale"], SCALE_KINDS, "preprocessing.scale")
    _require_choice(pre["imputation"], IMPUTATIONS, "preprocessing.imputation")
    cl = doc["cluster"]
    for a in cl["algorithms"]:
        _require_choice(a, CLUSTER_ALGORITHMS, "cluster.algorithms entry")
    _require_choice(cl["covariance"], COVARIANCE_TYPES, "cluster.covariance")
    for name in ("k_values", "k_scan"):
        ks = cl[name]
        if not ks or not all(isinstance(k, int) and k >= 1 for k in ks):
            raise InputError(f"cluster.{name} must be a non-empty list of positive ints")
    for i in cl["imputations"]:
        _require_choice(i, IMPUTATIONS, "cluster.imputations entry")
    cf = doc["classify"]
    for d in cf["datasets"]:
        _require_choice(d, DATASET_KINDS, "classify.datasets entry")
    for m in cf["models"]:
        _require_choice(m, CLASSIFIER_KINDS, "classify.models entry")
    for name in ("folds", "multiclass_folds"):
        if not isinstance(cf[name], int) or cf[name] < 2:
            raise InputError(f"classify.{name} must be an integer >= 2")
    ex = doc["explain"]
    for name in ("n_permutations", "background_size", "top_n"):
        if not isinstance(ex[name], int) or ex[name] < 1:
            raise InputError(f"explain.{name} must be a positive integer")


def effective_document(cfg: RunConfig) -> dict[str, Any]:
    """The canonical JSON form of an effective configuration."""
    return {
        "blocks": cfg.blocks, "txs": cfg.txs, "logs": cfg.logs,
        "labels": cfg.labels, "mev_labels": cfg.mev_labels,
        "out_dir": cfg.out_dir, "block_range": list(cfg.block_range),
        "test_block_count": cfg.test_block_count, "seed": cfg.seed,
        "preprocessing": cfg.preprocessing, "cluster": cfg.cluster,
        "classify": cfg.classify, "explain": cfg.explain,
    }


def _finalize(doc: dict, base_dir: str) -> RunConfig:
    _validate(doc)
    # Hash the effective document before resolving paths, so the same config
    # content identifies the same run regardless of where the tree sits.
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()
    sha = hashlib.sha256(canon).hexdigest()

    def resolve(p: Optional[str]) -> Optional[str]:
        if p is None:
            return None
        return p if os.path.isabs(p) else os.path.normpath(os.path.join(base_dir, p))

    doc = copy.deepcopy(doc)
    for key in ("blocks", "txs", "logs", "labels", "mev_labels", "out_dir"):
        doc[key] = resolve(doc[key])
    return RunConfig(
        blocks=doc["blocks"], txs=doc["txs"], logs=doc["logs"],
        labels=doc["labels"], mev_labels=doc["mev_labels"],
        out_dir=doc["out_dir"], block_range=tuple(doc["block_range"]),
        test_block_count=doc["test_block_count"], seed=doc["seed"],
        preprocessing=doc["preprocessing"], cluster=doc["cluster"],
        classify=doc["classify"], explain=doc["explain"], sha256=sha,
    )


def load_config(path: str, overrides: Optional[dict[str, Any]] = None) -> RunConfig:
    """Read a JSON config file, apply flag overrides, validate, and hash."""
    try:
        with open(path, encoding="utf-8") as fh:
            given = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read config {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(given, dict):
        raise InputError(f"{path}: config root must be a JSON object")
    doc = _merge(_DEFAULTS, given, "")
    _apply_overrides(doc, overrides or {})
    return _finalize(doc, os.path.dirname(os.path.abspath(path)))


def config_from_dict(given: dict[str, Any], base_dir: str = ".") -> RunConfig:
    """Build a config directly from a dict (used by the fixture generator)."""
    doc = _merge(_DEFAULTS, given, "")
    return _finalize(doc, base_dir)
