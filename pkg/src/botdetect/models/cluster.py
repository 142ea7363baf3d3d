"""k-means and Gaussian mixture clustering.

Both fitters record their per-iteration objective trace (inertia for
k-means, log-likelihood for EM) so the monotonicity guarantees can be
checked on any fitted model. All randomness flows through generators
derived from (seed, restart ordinal).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.spatial.distance import cdist
from scipy.special import logsumexp

from ..seeds import derived_rng

KMEANS_TOL = 1e-4          # max centroid shift to declare convergence
KMEANS_MAX_ITER = 300
KMEANS_RESTARTS = 10
GMM_TOL = 1e-6             # log-likelihood gain to declare convergence
GMM_MAX_ITER = 200
COVARIANCE_TYPES = ("diagonal", "full")


def _pairwise_sq(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, rows of X against rows of C.

    cdist computes coordinate differences directly, so a point sitting on a
    centroid has distance exactly 0 (the expanded dot-product formula does
    not guarantee that).
    """
    return cdist(X, C, "sqeuclidean")


def _kmeans_pp_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared-distance sampling."""
    n = len(X)
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = _pairwise_sq(X, centers[:1]).ravel()
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j:] = X[rng.integers(n, size=k - j)]
            break
        centers[j] = X[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, _pairwise_sq(X, centers[j:j + 1]).ravel())
    return centers


@dataclass
class KMeansModel:
    k: int
    seed: int
    inertia: float
    n_iter: int
    centroids: np.ndarray = field(repr=False, default=None)
    inertia_trace: list[float] = field(repr=False, default_factory=list)

    def to_json(self) -> dict:
        return {"kind": "kmeans", "k": self.k, "seed": self.seed,
                "inertia": self.inertia, "n_iter": self.n_iter,
                "inertia_trace": list(self.inertia_trace),
                "centroids": self.centroids.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "KMeansModel":
        return cls(k=d["k"], seed=d["seed"], inertia=d["inertia"], n_iter=d["n_iter"],
                   centroids=np.array(d["centroids"]),
                   inertia_trace=list(d["inertia_trace"]))


def _lloyd(X: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, float, int, list[float]]:
    k = len(centers)
    trace: list[float] = []
    for it in range(1, KMEANS_MAX_ITER + 1):
        d2 = _pairwise_sq(X, centers)
        assign = d2.argmin(1)
        point_cost = d2[np.arange(len(X)), assign]
        # an empty cluster is re-seeded at the currently worst-served point
        for j in range(k):
            if not (assign == j).any():
                far = int(point_cost.argmax())
                centers[j] = X[far]
                assign[far] = j
                d2[:, j] = _pairwise_sq(X, centers[j:j + 1]).ravel()
                point_cost = d2[np.arange(len(X)), assign]
        trace.append(float(point_cost.sum()))
        new_centers = np.vstack([X[assign == j].mean(0) for j in range(k)])
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        if shift < KMEANS_TOL:
            break
    inertia = float(_pairwise_sq(X, centers).min(1).sum())
    trace.append(inertia)
    return centers, inertia, it, trace


def kmeans_fit(X: np.ndarray, k: int, seed: int,
               restarts: int = KMEANS_RESTARTS) -> KMeansModel:
    """Best of `restarts` k-means++/Lloyd runs by final inertia."""
    X = np.asarray(X, dtype=float)
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > len(X):
        raise ValueError(f"k={k} exceeds {len(X)} rows")
    best = None
    for r in range(restarts):
        centers = _kmeans_pp_init(X, k, derived_rng(seed, r))
        centers, inertia, n_iter, trace = _lloyd(X, centers.copy())
        if best is None or inertia < best.inertia:
            best = KMeansModel(k=k, seed=seed, inertia=inertia, n_iter=n_iter,
                               centroids=centers, inertia_trace=trace)
    return best


def kmeans_predict(model: KMeansModel, X: np.ndarray) -> np.ndarray:
    """Nearest-centroid assignment."""
    return _pairwise_sq(np.asarray(X, dtype=float), model.centroids).argmin(1)


@dataclass
class GMMModel:
    k: int
    seed: int
    covariance_type: str
    reg: float
    log_likelihood: float
    n_iter: int
    weights: np.ndarray = field(repr=False, default=None)
    means: np.ndarray = field(repr=False, default=None)
    covariances: np.ndarray = field(repr=False, default=None)  # (k,d) diag or (k,d,d) full
    ll_trace: list[float] = field(repr=False, default_factory=list)

    def to_json(self) -> dict:
        return {"kind": "gmm", "k": self.k, "seed": self.seed,
                "covariance_type": self.covariance_type, "reg": self.reg,
                "log_likelihood": self.log_likelihood, "n_iter": self.n_iter,
                "ll_trace": list(self.ll_trace), "weights": self.weights.tolist(),
                "means": self.means.tolist(), "covariances": self.covariances.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "GMMModel":
        return cls(k=d["k"], seed=d["seed"], covariance_type=d["covariance_type"],
                   reg=d["reg"], log_likelihood=d["log_likelihood"], n_iter=d["n_iter"],
                   weights=np.array(d["weights"]), means=np.array(d["means"]),
                   covariances=np.array(d["covariances"]), ll_trace=list(d["ll_trace"]))


def _log_gaussians(X: np.ndarray, means: np.ndarray, covs: np.ndarray,
                   covariance_type: str) -> np.ndarray:
    """log N(x | mu_j, Sigma_j) for every (row, component) pair."""
    n, d = X.shape
    k = len(means)
    out = np.empty((n, k))
    if covariance_type == "diagonal":
        for j in range(k):
            var = covs[j]
            maha = ((X - means[j]) ** 2 / var).sum(1)
            out[:, j] = -0.5 * (d * np.log(2 * np.pi) + np.log(var).sum() + maha)
    else:
        for j in range(k):
            chol = np.linalg.cholesky(covs[j])
            z = solve_triangular(chol, (X - means[j]).T, lower=True).T
            logdet = 2.0 * np.log(np.diag(chol)).sum()
            out[:, j] = -0.5 * (d * np.log(2 * np.pi) + logdet + (z * z).sum(1))
    return out


def _estimate_covs(X, resp, nk, means, covariance_type, reg):
    k, d = means.shape
    if covariance_type == "diagonal":
        covs = np.empty((k, d))
        for j in range(k):
            covs[j] = (resp[:, j] @ (X - means[j]) ** 2) / nk[j] + reg
        return covs
    covs = np.empty((k, d, d))
    for j in range(k):
        diff = X - means[j]
        covs[j] = (resp[:, j][:, None] * diff).T @ diff / nk[j] + reg * np.eye(d)
    return covs


def gmm_fit(X: np.ndarray, k: int, covariance_type: str = "diagonal",
            reg: float = 1e-6, seed: int = 0) -> GMMModel:
    """EM from a k-means++ initialization.

    A component whose responsibility mass collapses to zero is re-seeded at
    the point the current mixture explains worst, with covariance reset to
    the global per-dimension spread (that recovery step is the one place
    the log-likelihood trace is allowed to dip).
    """
    X = np.asarray(X, dtype=float)
    if covariance_type not in COVARIANCE_TYPES:
        raise ValueError(f"covariance_type must be one of {COVARIANCE_TYPES}")
    if reg <= 0:
        raise ValueError("reg must be positive")
    if k < 1 or k > len(X):
        raise ValueError(f"k={k} must be in 1..{len(X)}")
    n, d = X.shape
    means = _kmeans_pp_init(X, k, derived_rng(seed, 0))
    global_var = X.var(0) + reg
    if covariance_type == "diagonal":
        covs = np.tile(global_var, (k, 1))
    else:
        covs = np.tile(np.diag(global_var), (k, 1, 1))
    weights = np.full(k, 1.0 / k)
    ll_trace: list[float] = []
    prev_ll = -np.inf
    for it in range(1, GMM_MAX_ITER + 1):
        with np.errstate(divide="ignore"):
            log_prob = _log_gaussians(X, means, covs, covariance_type) + np.log(weights)
        log_norm = logsumexp(log_prob, axis=1)
        ll = float(log_norm.sum())
        ll_trace.append(ll)
        if it > 1 and ll - prev_ll < GMM_TOL:
            break
        prev_ll = ll
        resp = np.exp(log_prob - log_norm[:, None])
        nk = resp.sum(0)
        empty = np.flatnonzero(nk < 10 * np.finfo(float).eps)
        nk_safe = np.maximum(nk, 10 * np.finfo(float).eps)
        weights = nk / n
        means = (resp.T @ X) / nk_safe[:, None]
        covs = _estimate_covs(X, resp, nk_safe, means, covariance_type, reg)
        if len(empty):
            worst = np.argsort(log_norm)[:len(empty)]
            for j, w in zip(empty, worst):
                means[j] = X[w]
                covs[j] = global_var if covariance_type == "diagonal" else np.diag(global_var)
                weights[j] = 1.0 / n
            weights = weights / weights.sum()
    else:
        # max iterations reached: record the likelihood of the final parameters
        with np.errstate(divide="ignore"):
            log_prob = _log_gaussians(X, means, covs, covariance_type) + np.log(weights)
        ll_trace.append(float(logsumexp(log_prob, axis=1).sum()))
        it = GMM_MAX_ITER
    return GMMModel(k=k, seed=seed, covariance_type=covariance_type, reg=reg,
                    log_likelihood=ll_trace[-1], n_iter=it, weights=weights,
                    means=means, covariances=covs, ll_trace=ll_trace)


def _weighted_log_prob(model: GMMModel, X: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return _log_gaussians(np.asarray(X, dtype=float), model.means,
                              model.covariances, model.covariance_type) \
            + np.log(model.weights)


def gmm_predict(model: GMMModel, X: np.ndarray) -> np.ndarray:
    """Most responsible component per row."""
    return _weighted_log_prob(model, X).argmax(1)


def gmm_log_likelihood(model: GMMModel, X: np.ndarray) -> float:
    return float(logsumexp(_weighted_log_prob(model, X), axis=1).sum())


def n_free_parameters(model: GMMModel) -> int:
    k, d = model.means.shape
    cov_params = k * d if model.covariance_type == "diagonal" else k * d * (d + 1) // 2
    return k * d + cov_params + (k - 1)


def gmm_bic(model: GMMModel, X: np.ndarray) -> float:
    """BIC = p·ln(n) − 2·ln(L̂); lower is better."""
    return n_free_parameters(model) * np.log(len(X)) - 2.0 * gmm_log_likelihood(model, X)
