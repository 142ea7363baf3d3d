"""Flat-array decision trees: export from fitted sklearn trees, predict here.

Fitting individual CART trees is delegated to scikit-learn, but every
fitted tree is immediately exported to plain numpy arrays. All predictions
in this package walk these arrays, so saved models are self-contained JSON
with no pickled estimators inside.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LEAF = -1


@dataclass
class TreeArrays:
    children_left: np.ndarray = field(repr=False)
    children_right: np.ndarray = field(repr=False)
    feature: np.ndarray = field(repr=False)
    threshold: np.ndarray = field(repr=False)
    value: np.ndarray = field(repr=False)     # (n_nodes, n_outputs)

    @property
    def n_nodes(self) -> int:
        return len(self.children_left)

    def to_json(self) -> dict:
        return {"children_left": self.children_left.tolist(),
                "children_right": self.children_right.tolist(),
                "feature": self.feature.tolist(),
                "threshold": self.threshold.tolist(),
                "value": self.value.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "TreeArrays":
        return cls(children_left=np.array(d["children_left"], dtype=np.int64),
                   children_right=np.array(d["children_right"], dtype=np.int64),
                   feature=np.array(d["feature"], dtype=np.int64),
                   threshold=np.array(d["threshold"], dtype=float),
                   value=np.array(d["value"], dtype=float))


def export_tree(sk_tree, normalize: bool) -> TreeArrays:
    """Copy an sklearn tree_ structure into plain arrays.

    normalize=True turns per-node class counts into distributions (for
    classification trees); regression trees keep raw values.
    """
    t = sk_tree.tree_
    value = t.value[:, 0, :].astype(float).copy()
    if normalize:
        sums = value.sum(axis=1, keepdims=True)
        sums[sums == 0] = 1.0
        value = value / sums
    return TreeArrays(children_left=t.children_left.astype(np.int64).copy(),
                      children_right=t.children_right.astype(np.int64).copy(),
                      feature=t.feature.astype(np.int64).copy(),
                      threshold=t.threshold.astype(float).copy(),
                      value=value)


def tree_apply(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    """Leaf node index for every row (x <= threshold goes left)."""
    X = np.asarray(X, dtype=float)
    node = np.zeros(len(X), dtype=np.int64)
    active = tree.children_left[node] != LEAF
    while active.any():
        idx = np.flatnonzero(active)
        cur = node[idx]
        go_left = X[idx, tree.feature[cur]] <= tree.threshold[cur]
        node[idx] = np.where(go_left, tree.children_left[cur], tree.children_right[cur])
        active = tree.children_left[node] != LEAF
    return node


def tree_predict_value(tree: TreeArrays, X: np.ndarray) -> np.ndarray:
    """Leaf value vector per row: (n_rows, n_outputs)."""
    return tree.value[tree_apply(tree, X)]
