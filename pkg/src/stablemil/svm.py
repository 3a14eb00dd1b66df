"""Soft-margin kernel SVM trained by sequential minimal optimization.

The trainer solves the standard dual

    max_a  sum(a) - 1/2 a' Q a,   Q_ij = y_i y_j K(x_i, x_j)
    s.t.   0 <= a_i <= C,  sum(a_i y_i) = 0

by repeatedly picking the maximal-KKT-violating pair (the LIBSVM working-set
rule) and solving the two-variable subproblem exactly, so the dual objective
never decreases. Training is deterministic for a fixed input order.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimMismatch, SingleClass
from .kernels import KernelSpec, kernel_matrix, median_heuristic_gamma, squared_distances

DEFAULT_C = 1.0
DEFAULT_TOL = 1e-3
GRID_CS = (0.1, 1.0, 10.0, 100.0)
GRID_GAMMA_EXPONENTS = (-2, -1, 0, 1, 2)


@dataclass
class SVMModel:
    """Trained model: support vectors with their signed dual weights."""

    support_vectors: np.ndarray
    alphas_times_labels: np.ndarray
    bias: float
    kernel: KernelSpec
    C: float
    converged: bool = True
    n_iter: int = 0
    objective_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    def to_json(self) -> str:
        from .dataio import canonical_json

        return canonical_json(
            {
                "support_vectors": [[float(v) for v in row] for row in self.support_vectors],
                "alphas_times_labels": [float(v) for v in self.alphas_times_labels],
                "bias": float(self.bias),
                "kernel": {"kind": self.kernel.kind, "gamma": float(self.kernel.gamma)},
                "C": float(self.C),
                "converged": bool(self.converged),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SVMModel":
        rec = json.loads(text)
        return cls(
            support_vectors=np.asarray(rec["support_vectors"], dtype=np.float64),
            alphas_times_labels=np.asarray(rec["alphas_times_labels"], dtype=np.float64),
            bias=float(rec["bias"]),
            kernel=KernelSpec(rec["kernel"]["kind"], rec["kernel"]["gamma"]),
            C=float(rec["C"]),
            converged=bool(rec["converged"]),
        )


def _smo_core(K: np.ndarray, y: np.ndarray, C: float, tol: float, max_iter: int):
    """SMO on a precomputed kernel matrix.

    Returns (alpha, bias, converged, n_iter, objective_history).
    """
    m = len(y)
    Q = (y[:, None] * y[None, :]) * K
    alpha = np.zeros(m)
    G = -np.ones(m)  # gradient of (1/2 a'Qa - sum a)
    minus_yG = y.copy()  # -y_t G_t, maintained incrementally
    diagK = np.diag(K).copy()

    history = [0.0]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
        low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
        up_vals = np.where(up, minus_yG, -np.inf)
        low_vals = np.where(low, minus_yG, np.inf)
        i = int(np.argmax(up_vals))
        j = int(np.argmin(low_vals))
        gap = up_vals[i] - low_vals[j]
        if gap <= tol:
            converged = True
            break

        # step t >= 0 along the feasible direction d = e_i*y_i - e_j*y_j
        quad = diagK[i] + diagK[j] - 2.0 * K[i, j]
        t_hi_i = (C - alpha[i]) if y[i] > 0 else alpha[i]
        t_hi_j = alpha[j] if y[j] > 0 else (C - alpha[j])
        t_max = min(t_hi_i, t_hi_j)
        t = t_max if quad <= 1e-12 else min(gap / quad, t_max)

        alpha[i] += t * y[i]
        alpha[j] -= t * y[j]
        # snap roundoff onto the box so the index sets stay exact
        for idx in (i, j):
            if alpha[idx] < 1e-12:
                alpha[idx] = 0.0
            elif alpha[idx] > C - 1e-12:
                alpha[idx] = C
        dG = t * (y[i] * Q[:, i] - y[j] * Q[:, j])
        G += dG
        minus_yG -= y * dG
        history.append(float((alpha.sum() - alpha @ G) / 2.0))

    up = ((y > 0) & (alpha < C)) | ((y < 0) & (alpha > 0))
    low = ((y > 0) & (alpha > 0)) | ((y < 0) & (alpha < C))
    hi = np.max(np.where(up, minus_yG, -np.inf))
    lo = np.min(np.where(low, minus_yG, np.inf))
    bias = float((hi + lo) / 2.0)
    return alpha, bias, converged, it, np.asarray(history)


def smo_train(
    points,
    labels,
    kernel: KernelSpec,
    C: float = DEFAULT_C,
    tol: float = DEFAULT_TOL,
    max_iter: int | None = None,
) -> SVMModel:
    """Train a binary SVM; labels are +-1.

    Stops when the maximal KKT violation (working-set gap) is within tol.
    If max_iter (default max(10*m, 500)) is hit first, the best iterate is
    returned flagged converged=False.
    """
    X = np.asarray(points, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("points must be (m, d) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ValueError("points must be finite")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be +-1")
    if len(np.unique(y)) < 2:
        raise SingleClass("training needs at least one example of each class")
    if not C > 0:
        raise ValueError("C must be positive")

    m = len(X)
    if max_iter is None:
        max_iter = max(10 * m, 500)
    K = kernel_matrix(kernel, X)
    alpha, bias, converged, it, history = _smo_core(K, y, C, tol, max_iter)

    sv = alpha > 0
    return SVMModel(
        support_vectors=X[sv].copy(),
        alphas_times_labels=(alpha * y)[sv],
        bias=bias,
        kernel=kernel,
        C=C,
        converged=converged,
        n_iter=it,
        objective_history=history,
    )


def svm_decision(model: SVMModel, x) -> float:
    """Signed decision value; the predicted label is 1 iff it is >= 0."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("svm_decision takes a single vector; use svm_decision_batch")
    if model.support_vectors.shape[1] != x.shape[0]:
        raise DimMismatch(f"model dim {model.support_vectors.shape[1]}, input dim {x.shape[0]}")
    return float(svm_decision_batch(model, x[None, :])[0])


def svm_decision_batch(model: SVMModel, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if model.support_vectors.shape[1] != X.shape[1]:
        raise DimMismatch(f"model dim {model.support_vectors.shape[1]}, input dim {X.shape[1]}")
    if len(model.support_vectors) == 0:
        return np.full(len(X), model.bias)
    K = kernel_matrix(model.kernel, X, model.support_vectors)
    return K @ model.alphas_times_labels + model.bias


def dual_objective(model: SVMModel) -> float:
    """Final dual objective value reached by training."""
    if len(model.objective_history) == 0:
        raise ValueError("model carries no training history")
    return float(model.objective_history[-1])


@dataclass(frozen=True)
class SVMGrid:
    """Cross-validation grid: C values and gamma = median-heuristic * 2^k."""

    Cs: tuple = GRID_CS
    gamma_exponents: tuple = GRID_GAMMA_EXPONENTS
    folds: int = 5
    tol: float = DEFAULT_TOL


def _stratified_folds(y: np.ndarray, folds: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Seeded class-balanced folds (round-robin after a per-class shuffle)."""
    assignments = np.zeros(len(y), dtype=int)
    for cls in np.unique(y):
        idx = np.flatnonzero(y == cls)
        idx = idx[rng.permutation(len(idx))]
        assignments[idx] = np.arange(len(idx)) % folds
    return [np.flatnonzero(assignments == f) for f in range(folds)]


def grid_search_rbf(
    X: np.ndarray,
    y: np.ndarray,
    seed: int,
    grid: SVMGrid = SVMGrid(),
    max_iter: int | None = None,
):
    """Seeded k-fold grid search for an RBF SVM.

    Returns (model trained on all data with the best combo, chosen C, chosen
    gamma, cv accuracy of the winner). Ties go to the earliest combo in
    (C, gamma) declared order.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    rng = np.random.default_rng(seed)
    folds = _stratified_folds(y, grid.folds, rng)
    base_gamma = median_heuristic_gamma(X)
    gammas = [base_gamma * 2.0**k for k in grid.gamma_exponents]
    d2 = squared_distances(X, X)
    all_idx = np.arange(len(y))

    best = None
    for C in grid.Cs:
        for gamma in gammas:
            K = np.exp(-gamma * d2)
            accs = []
            for val_idx in folds:
                tr_idx = np.setdiff1d(all_idx, val_idx)
                if len(val_idx) == 0 or len(np.unique(y[tr_idx])) < 2:
                    continue
                sub_iter = max_iter if max_iter is not None else max(10 * len(tr_idx), 500)
                alpha, bias, _, _, _ = _smo_core(
                    K[np.ix_(tr_idx, tr_idx)], y[tr_idx], C, grid.tol, sub_iter
                )
                dec = K[np.ix_(val_idx, tr_idx)] @ (alpha * y[tr_idx]) + bias
                accs.append(float(np.mean((dec >= 0) == (y[val_idx] > 0))))
            score = float(np.mean(accs)) if accs else 0.0
            if best is None or score > best[0] + 1e-12:
                best = (score, C, gamma)

    score, C, gamma = best
    spec = KernelSpec("rbf", gamma)
    model = smo_train(X, y, spec, C=C, tol=grid.tol, max_iter=max_iter)
    return model, C, gamma, score
