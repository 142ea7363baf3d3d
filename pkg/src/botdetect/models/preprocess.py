"""Column scaling, missing-value imputation, and the 2-D embedding.

Imputation order follows the two documented strategies: the column mean is
filled in before scaling (so the imputed cell lands where the mean lands),
while the constant -1 is filled in after scaling, placing rows with missing
data visibly outside the scaled range.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from ..features import FeatureMatrix

log = logging.getLogger("botdetect.models")

SCALE_KINDS = ("minmax", "standardize")
IMPUTATIONS = ("mean", "constant")


def matrix_to_array(X: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
    """Feature matrix as float64 with NaN standing in for MISSING cells."""
    if isinstance(X, np.ndarray):
        return np.asarray(X, dtype=float)
    return np.array([[np.nan if v is None else float(v) for v in row]
                     for row in X.values], dtype=float).reshape(len(X.values), len(X.names))


@dataclass
class Preprocessor:
    kind: str
    imputation: str
    embed: bool
    impute_mean_: np.ndarray = field(repr=False, default=None)
    shift_: np.ndarray = field(repr=False, default=None)     # min or mean per column
    scale_: np.ndarray = field(repr=False, default=None)     # range or std (0 → constant column)
    embed_center_: Optional[np.ndarray] = field(repr=False, default=None)
    embed_components_: Optional[np.ndarray] = field(repr=False, default=None)  # 2 × d

    @property
    def n_output_columns(self) -> int:
        return 2 if self.embed else len(self.shift_)

    def _scale(self, A: np.ndarray) -> np.ndarray:
        """Impute and scale; constant columns map to 0."""
        if A.ndim != 2 or A.shape[1] != len(self.shift_):
            raise ValueError(f"expected {len(self.shift_)} columns, got {A.shape}")
        missing = np.isnan(A)
        if self.imputation == "mean":
            A = np.where(missing, self.impute_mean_, A)
        out = np.zeros_like(A)
        nonconst = self.scale_ != 0
        out[:, nonconst] = (A[:, nonconst] - self.shift_[nonconst]) / self.scale_[nonconst]
        if self.imputation == "constant":
            out[missing] = -1.0
        return out

    def transform(self, X: Union[FeatureMatrix, np.ndarray]) -> np.ndarray:
        out = self._scale(matrix_to_array(X))
        if self.embed:
            out = (out - self.embed_center_) @ self.embed_components_.T
        return out


def fit_preprocessor(X: Union[FeatureMatrix, np.ndarray], kind: str = "minmax",
                     imputation: str = "mean", embed: bool = False) -> Preprocessor:
    """Fit column statistics (and optionally the 2-D embedding) on X.

    All statistics come from X only; transform() never refits. A column
    that is missing everywhere gets imputation mean 0 with a warning.
    """
    if kind not in SCALE_KINDS:
        raise ValueError(f"kind must be one of {SCALE_KINDS}")
    if imputation not in IMPUTATIONS:
        raise ValueError(f"imputation must be one of {IMPUTATIONS}")
    A = matrix_to_array(X)
    if A.size == 0:
        raise ValueError("cannot fit preprocessor on an empty matrix")
    n_all_missing = int(np.all(np.isnan(A), axis=0).sum())
    if n_all_missing and imputation == "mean":
        log.warning("%d all-missing column(s): imputing 0", n_all_missing)
    observed = ~np.isnan(A)
    counts = observed.sum(axis=0)
    sums = np.where(observed, A, 0.0).sum(axis=0)
    col_mean = np.divide(sums, counts, out=np.zeros(A.shape[1]), where=counts > 0)
    p = Preprocessor(kind=kind, imputation=imputation, embed=embed, impute_mean_=col_mean)
    filled = np.where(np.isnan(A), col_mean, A) if imputation == "mean" else A
    all_nan = np.all(np.isnan(filled), axis=0)
    filled = np.where(all_nan, 0.0, filled)  # constant-missing columns scale to 0 anyway
    with np.errstate(invalid="ignore"):
        if kind == "minmax":
            lo = np.nan_to_num(np.nanmin(filled, axis=0), nan=0.0)
            hi = np.nan_to_num(np.nanmax(filled, axis=0), nan=0.0)
            p.shift_, p.scale_ = lo, hi - lo
        else:
            p.shift_ = np.nan_to_num(np.nanmean(filled, axis=0), nan=0.0)
            p.scale_ = np.nan_to_num(np.nanstd(filled, axis=0), nan=0.0)
    if embed:
        scaled = p._scale(A)
        p.embed_center_ = scaled.mean(axis=0)
        centered = scaled - p.embed_center_
        _, _, vt = np.linalg.svd(centered, full_matrices=False)
        comps = vt[:2] if vt.shape[0] >= 2 else \
            np.vstack([vt, np.zeros((2 - vt.shape[0], vt.shape[1]))])
        # fix each component's sign so its largest-magnitude loading is positive
        for i in range(2):
            j = int(np.argmax(np.abs(comps[i])))
            if comps[i, j] < 0:
                comps[i] = -comps[i]
        p.embed_components_ = comps
    return p
