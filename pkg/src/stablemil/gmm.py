"""Diagonal-covariance Gaussian mixtures fitted by EM with k-means++ seeding.

Responsibilities are computed in log space with log-sum-exp stabilization,
variances are floored to avoid collapse on duplicated points, and the fit is
deterministic for a fixed (data, seed, restarts).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, TooFewPoints

LOG_2PI = float(np.log(2.0 * np.pi))
VAR_FLOOR_REL = 1e-6
VAR_FLOOR_ABS = 1e-10


@dataclass
class GMMModel:
    """Mixture weights, means, and per-dimension variances (K components)."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    loglik_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def n_components(self) -> int:
        return len(self.weights)

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def to_json(self) -> str:
        from .dataio import canonical_json

        return canonical_json(
            {
                "weights": [float(v) for v in self.weights],
                "means": [[float(v) for v in row] for row in self.means],
                "variances": [[float(v) for v in row] for row in self.variances],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "GMMModel":
        rec = json.loads(text)
        return cls(
            weights=np.asarray(rec["weights"], dtype=np.float64),
            means=np.asarray(rec["means"], dtype=np.float64),
            variances=np.asarray(rec["variances"], dtype=np.float64),
        )


def _log_component_densities(model: GMMModel, X: np.ndarray) -> np.ndarray:
    """log N(x_t | mu_k, diag var_k) as a (T, K) array."""
    dev2 = (X[:, None, :] - model.means[None, :, :]) ** 2 / model.variances[None, :, :]
    log_det = np.sum(np.log(model.variances), axis=1)
    return -0.5 * (dev2.sum(axis=2) + log_det[None, :] + model.dim * LOG_2PI)


def _log_resp(model: GMMModel, X: np.ndarray):
    """Log responsibilities plus per-point log-likelihoods, (T, K) and (T,)."""
    joint = _log_component_densities(model, X) + np.log(model.weights)[None, :]
    mx = joint.max(axis=1, keepdims=True)
    lse = mx[:, 0] + np.log(np.exp(joint - mx).sum(axis=1))
    return joint - lse[:, None], lse


def gmm_posteriors(model: GMMModel, x) -> np.ndarray:
    """Component posteriors for one point: nonnegative, summing to 1."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != model.dim:
        raise DimMismatch(f"expected vector of dim {model.dim}")
    log_r, _ = _log_resp(model, x[None, :])
    return np.exp(log_r[0])


def gmm_posteriors_batch(model: GMMModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.shape[1] != model.dim:
        raise DimMismatch(f"expected points of dim {model.dim}")
    log_r, _ = _log_resp(model, X)
    return np.exp(log_r)


def mean_loglik(model: GMMModel, X: np.ndarray) -> float:
    """Average per-point log-likelihood of X under the mixture."""
    _, lse = _log_resp(model, np.asarray(X, dtype=np.float64))
    return float(lse.mean())


def _kmeanspp_centers(X: np.ndarray, K: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [X[int(rng.integers(n))]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, K):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            r = rng.uniform() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, n - 1)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - centers[-1]) ** 2).sum(axis=1))
    return np.stack(centers)


def _em(X: np.ndarray, K: int, rng: np.random.Generator, max_iter: int, rel_tol: float,
        var_floor: np.ndarray) -> GMMModel:
    n, d = X.shape
    means = _kmeanspp_centers(X, K, rng).copy()
    variances = np.tile(np.maximum(X.var(axis=0), var_floor), (K, 1))
    weights = np.full(K, 1.0 / K)
    model = GMMModel(weights, means, variances)

    history = []
    prev = -np.inf
    for _ in range(max_iter):
        log_r, lse = _log_resp(model, X)
        ll = float(lse.mean())
        history.append(ll)
        resp = np.exp(log_r)
        nk = resp.sum(axis=0)
        # M step; empty components keep their parameters
        occupied = nk > 1e-12
        weights = nk / n
        weights = np.maximum(weights, 1e-12)
        weights = weights / weights.sum()
        new_means = model.means.copy()
        new_vars = model.variances.copy()
        for k in range(K):
            if not occupied[k]:
                continue
            w = resp[:, k][:, None]
            mu = (w * X).sum(axis=0) / nk[k]
            var = (w * (X - mu) ** 2).sum(axis=0) / nk[k]
            new_means[k] = mu
            new_vars[k] = np.maximum(var, var_floor)
        model = GMMModel(weights, new_means, new_vars)
        if np.isfinite(prev) and abs(ll - prev) <= rel_tol * max(abs(ll), 1.0):
            break
        prev = ll
    # score the final parameters so the recorded history matches the model
    _, lse = _log_resp(model, X)
    history.append(float(lse.mean()))
    model.loglik_history = np.asarray(history)
    return model


def gmm_fit(
    instances,
    K: int,
    seed: int = 0,
    max_iter: int = 200,
    rel_tol: float = 1e-7,
    restarts: int = 1,
) -> GMMModel:
    """Fit a K-component diagonal GMM by EM.

    Seeding is k-means++ from a generator derived from (seed, restart); with
    restarts > 1 the fit with the best final log-likelihood wins (ties to the
    earliest restart). The per-iteration mean log-likelihood is recorded on
    the model and is non-decreasing up to a 1e-9 slack.
    """
    X = np.asarray(instances, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("instances must be a (n, d) array")
    if K < 1:
        raise ValueError("K must be >= 1")
    if len(X) < K:
        raise TooFewPoints(f"{len(X)} points for {K} components")
    if not np.all(np.isfinite(X)):
        raise ValueError("instances must be finite")

    var_floor = np.maximum(VAR_FLOOR_REL * X.var(axis=0), VAR_FLOOR_ABS)
    best = None
    for r in range(max(1, restarts)):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(r,)))
        model = _em(X, K, rng, max_iter, rel_tol, var_floor)
        ll = model.loglik_history[-1]
        if best is None or ll > best.loglik_history[-1] + 1e-15:
            best = model
    return best
