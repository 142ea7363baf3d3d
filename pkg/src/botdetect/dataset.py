"""Label ingestion and dataset assembly for the three analysis tasks.

Three dataset kinds are assembled from one feature matrix:
  binary      - labeled senders active in the designated test blocks
  clustering  - every other sender in range, unlabeled
  multiclass  - class-balanced sample of MEV bot categories plus non-MEV
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .chain import ChainData, normalize_address
from .errors import InputError
from .features import FeatureMatrix, build_feature_matrix, feature_registry

log = logging.getLogger("botdetect.dataset")

BINARY_CLASSES = ("Bot", "Human")
MEV_CLASSES = ("Arbitrage", "Sandwich", "Liquidation")
NONMEV_CLASS = "NonMEV"


@dataclass(frozen=True, slots=True)
class LabeledAccount:
    address: str
    binary_label: Optional[str] = None       # Bot | Human
    fine_label: Optional[str] = None         # free text, e.g. "MEV", "Trading"
    multiclass_label: Optional[str] = None   # Arbitrage | Sandwich | Liquidation | NonMEV

    def __post_init__(self):
        if self.binary_label is None and self.multiclass_label is None:
            raise ValueError(f"{self.address}: no label at all")


@dataclass(frozen=True)
class LabeledDataset:
    kind: str                                 # binary | clustering | multiclass
    matrix: FeatureMatrix
    labels: Optional[tuple[str, ...]]         # None for clustering

    def __post_init__(self):
        if self.kind == "clustering":
            assert self.labels is None
        else:
            assert self.labels is not None and len(self.labels) == len(self.matrix.addresses)

    @property
    def n_rows(self) -> int:
        return len(self.matrix.addresses)


def load_labels(path: str) -> list[LabeledAccount]:
    """Read "address,binary_label[,fine_label]" rows.

    Addresses normalize to lowercase 40-hex; duplicates and unknown binary
    labels are rejected with the offending line number.
    """
    accounts: list[LabeledAccount] = []
    seen: set[str] = set()
    with open(path, newline="") as f:
        for i, rec in enumerate(csv.reader(f), start=1):
            if not rec or rec[0].startswith("#"):
                continue
            if i == 1 and rec[0].strip().lower() == "address":
                continue
            if len(rec) < 2:
                raise InputError(f"{path}:{i}: expected address,binary_label[,fine_label]")
            try:
                address = normalize_address(rec[0].strip())
            except InputError as exc:
                raise InputError(f"{path}:{i}: {exc}") from None
            label = rec[1].strip()
            if label not in BINARY_CLASSES:
                raise InputError(f"{path}:{i}: unknown label {label!r} "
                                 f"(expected one of {BINARY_CLASSES})")
            if address in seen:
                raise InputError(f"{path}:{i}: duplicate address {address}")
            seen.add(address)
            fine = rec[2].strip() if len(rec) > 2 and rec[2].strip() else None
            accounts.append(LabeledAccount(address=address, binary_label=label,
                                           fine_label=fine))
    return accounts


def load_mev_labels(path: str) -> list[LabeledAccount]:
    """Read "address,mev_class" rows; class ∈ {Arbitrage, Sandwich, Liquidation}."""
    accounts: list[LabeledAccount] = []
    seen: set[str] = set()
    with open(path, newline="") as f:
        for i, rec in enumerate(csv.reader(f), start=1):
            if not rec or rec[0].startswith("#"):
                continue
            if i == 1 and rec[0].strip().lower() == "address":
                continue
            if len(rec) < 2:
                raise InputError(f"{path}:{i}: expected address,mev_class")
            try:
                address = normalize_address(rec[0].strip())
            except InputError as exc:
                raise InputError(f"{path}:{i}: {exc}") from None
            cls = rec[1].strip()
            if cls not in MEV_CLASSES:
                raise InputError(f"{path}:{i}: unknown MEV class {cls!r} "
                                 f"(expected one of {MEV_CLASSES})")
            if address in seen:
                raise InputError(f"{path}:{i}: duplicate address {address}")
            seen.add(address)
            accounts.append(LabeledAccount(address=address, multiclass_label=cls))
    return accounts


def _sorted_addresses(addresses) -> list[str]:
    return sorted(addresses)


def assemble_binary(data: ChainData, labels: Sequence[LabeledAccount],
                    test_blocks: tuple[int, int]) -> LabeledDataset:
    """Labeled senders of the test blocks, featurized over the full range."""
    by_address = {a.address: a for a in labels}
    senders = _sorted_addresses(data.senders_in_blocks(test_blocks))
    unlabeled = [s for s in senders if s not in by_address
                 or by_address[s].binary_label is None]
    if unlabeled:
        raise InputError("unlabeled test-block senders: " + ", ".join(unlabeled))
    matrix = build_feature_matrix(data, senders)
    return LabeledDataset(kind="binary", matrix=matrix,
                          labels=tuple(by_address[s].binary_label for s in senders))


def assemble_clustering(data: ChainData, test_blocks: tuple[int, int]) -> LabeledDataset:
    """All senders in range except test-block senders; no labels attached."""
    excluded = data.senders_in_blocks(test_blocks)
    rest = _sorted_addresses(data.all_senders() - excluded)
    if not rest:
        log.warning("clustering dataset is empty: every sender hits the test blocks")
        matrix = FeatureMatrix(addresses=(),
                               names=tuple(s.name for s in feature_registry()),
                               values=())
        return LabeledDataset(kind="clustering", matrix=matrix, labels=None)
    return LabeledDataset(kind="clustering",
                          matrix=build_feature_matrix(data, rest), labels=None)


def select_multiclass_rows(mev_labels: Sequence[LabeledAccount],
                           nonmev_pool: Sequence[str], per_class: int,
                           seed: int) -> tuple[list[str], list[str]]:
    """Pick per_class addresses for each MEV class plus per_class non-MEV ones.

    Sampling is without replacement from a seeded generator over sorted pools,
    so the same (inputs, seed) always picks the same rows. Returns parallel
    (addresses, labels) lists.
    """
    if per_class < 1:
        raise InputError("per_class must be >= 1")
    by_class: dict[str, list[str]] = {c: [] for c in MEV_CLASSES}
    for a in mev_labels:
        by_class[a.multiclass_label].append(a.address)
    rows: list[str] = []
    labels: list[str] = []
    rng = np.random.default_rng(seed)

    def pick(pool: list[str], cls: str) -> None:
        if len(pool) < per_class:
            raise InputError(f"class {cls}: {len(pool)} labeled addresses < {per_class}")
        chosen = pool if len(pool) == per_class else \
            [pool[i] for i in sorted(rng.choice(len(pool), size=per_class, replace=False))]
        rows.extend(chosen)
        labels.extend([cls] * per_class)

    for cls in MEV_CLASSES:
        pick(_sorted_addresses(set(by_class[cls])), cls)
    pick(_sorted_addresses(set(nonmev_pool)), NONMEV_CLASS)
    return rows, labels


def assemble_multiclass(data: ChainData, mev_labels: Sequence[LabeledAccount],
                        nonmev_pool: Sequence[str], per_class: int,
                        seed: int) -> LabeledDataset:
    """per_class rows for each MEV class plus per_class sampled non-MEV rows."""
    rows, labels = select_multiclass_rows(mev_labels, nonmev_pool, per_class, seed)
    return LabeledDataset(kind="multiclass",
                          matrix=build_feature_matrix(data, rows),
                          labels=tuple(labels))


def k_folds(n_rows: int, labels: Optional[Sequence[str]], k: int, seed: int,
            stratified: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
    """k disjoint (train, test) index splits covering all rows.

    Stratified mode (default) spreads each class across folds so per-class
    counts differ by at most one; it requires every class to have at least
    k members. Plain mode shuffles row indices and ignores labels.
    """
    if k < 2:
        raise InputError("k must be >= 2")
    if n_rows < k:
        raise InputError(f"cannot split {n_rows} rows into {k} folds")
    rng = np.random.default_rng(seed)
    test_folds: list[list[int]] = [[] for _ in range(k)]
    if stratified and labels is not None:
        # one fold cursor shared across classes, so overall fold sizes stay
        # within one of each other as well as the per-class counts
        cursor = 0
        for cls in sorted(set(labels)):
            idx = [i for i, y in enumerate(labels) if y == cls]
            if len(idx) < k:
                raise InputError(f"class {cls!r} has {len(idx)} rows < {k} folds")
            idx = list(np.array(idx)[rng.permutation(len(idx))])
            for i in idx:
                test_folds[cursor % k].append(i)
                cursor += 1
    else:
        order = rng.permutation(n_rows)
        for j, i in enumerate(order):
            test_folds[j % k].append(int(i))
    splits = []
    for fold in test_folds:
        test = np.array(sorted(fold), dtype=int)
        mask = np.ones(n_rows, dtype=bool)
        mask[test] = False
        splits.append((np.flatnonzero(mask), test))
    return splits


def stratified_k_folds(dataset: LabeledDataset, k: int, seed: int,
                       stratified: bool = True) -> list[tuple[np.ndarray, np.ndarray]]:
    return k_folds(dataset.n_rows, dataset.labels, k, seed, stratified=stratified)


def cohens_kappa(labels_a: Sequence, labels_b: Sequence) -> float:
    """Chance-corrected agreement between two annotators.

    kappa = (p_o - p_e) / (1 - p_e). When chance agreement p_e is exactly 1
    (both annotators constant), the statistic is defined here as 1.0 for
    perfect agreement and 0.0 otherwise.
    """
    if len(labels_a) != len(labels_b):
        raise InputError(f"annotator vectors differ in length: "
                         f"{len(labels_a)} vs {len(labels_b)}")
    if len(labels_a) == 0:
        raise InputError("empty annotation vectors")
    n = len(labels_a)
    p_o = sum(a == b for a, b in zip(labels_a, labels_b)) / n
    count_a = Counter(labels_a)
    count_b = Counter(labels_b)
    p_e = sum(count_a[c] * count_b.get(c, 0) for c in count_a) / (n * n)
    if p_e == 1.0:
        return 1.0 if p_o == 1.0 else 0.0
    return (p_o - p_e) / (1 - p_e)
