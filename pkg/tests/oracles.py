"""Independent oracles the tests check the library against.

Everything here is deliberately naive (enumeration, finite differences,
plain loops) and shares no code with the implementation paths it verifies.
"""
from __future__ import annotations

import itertools

import numpy as np


def brute_force_dual_optimum(K: np.ndarray, y: np.ndarray, C: float) -> float:
    """Globally optimal SVM dual objective by KKT-pattern enumeration.

    Every variable is either at 0, at C, or free; for each of the 3^n
    patterns the free variables (plus the equality multiplier) solve a
    linear system, and the best feasible candidate wins. Exact for the
    concave dual because its maximizer is a KKT point of some pattern.
    """
    n = len(y)
    Q = (y[:, None] * y[None, :]) * K
    best = -np.inf
    eps = 1e-8 * max(1.0, C)
    for pattern in itertools.product((0, 1, 2), repeat=n):
        alpha = np.zeros(n)
        free = [i for i, p in enumerate(pattern) if p == 2]
        for i, p in enumerate(pattern):
            if p == 1:
                alpha[i] = C
        if free:
            f = np.array(free)
            b_idx = np.array([i for i in range(n) if pattern[i] != 2], dtype=int)
            A = np.zeros((len(f) + 1, len(f) + 1))
            A[: len(f), : len(f)] = Q[np.ix_(f, f)]
            A[: len(f), -1] = y[f]
            A[-1, : len(f)] = y[f]
            rhs = np.ones(len(f) + 1)
            rhs[: len(f)] -= Q[np.ix_(f, b_idx)] @ alpha[b_idx] if len(b_idx) else 0.0
            rhs[-1] = -(y[b_idx] @ alpha[b_idx]) if len(b_idx) else 0.0
            sol, residual, *_ = np.linalg.lstsq(A, rhs, rcond=None)
            if np.linalg.norm(A @ sol - rhs) > 1e-7 * max(1.0, np.linalg.norm(rhs)):
                continue  # inconsistent stationarity system
            alpha[f] = sol[: len(f)]
        if np.any(alpha < -eps) or np.any(alpha > C + eps):
            continue
        if abs(y @ alpha) > eps:
            continue
        obj = alpha.sum() - 0.5 * alpha @ Q @ alpha
        best = max(best, obj)
    return float(best)


def finite_diff_gradients(gmm, X: np.ndarray):
    """Central finite differences of the average log-likelihood.

    Returns (dL/dmeans, dL/dvariances), each (K, d), matching the layout of
    fisher.loglik_gradients.
    """
    from stablemil.gmm import GMMModel, mean_loglik

    K, d = gmm.means.shape
    gmean = np.zeros((K, d))
    gvar = np.zeros((K, d))
    for k in range(K):
        for j in range(d):
            h = 1e-4 * max(1.0, abs(gmm.means[k, j]))
            mp = gmm.means.copy()
            mm = gmm.means.copy()
            mp[k, j] += h
            mm[k, j] -= h
            lp = mean_loglik(GMMModel(gmm.weights, mp, gmm.variances), X)
            lm = mean_loglik(GMMModel(gmm.weights, mm, gmm.variances), X)
            gmean[k, j] = (lp - lm) / (2 * h)

            hv = 1e-4 * gmm.variances[k, j]
            vp = gmm.variances.copy()
            vm = gmm.variances.copy()
            vp[k, j] += hv
            vm[k, j] -= hv
            lp = mean_loglik(GMMModel(gmm.weights, gmm.means, vp), X)
            lm = mean_loglik(GMMModel(gmm.weights, gmm.means, vm), X)
            gvar[k, j] = (lp - lm) / (2 * hv)
    return gmean, gvar


def brute_knn_lambdas(pool_feats: np.ndarray, refs: np.ndarray, k: int) -> np.ndarray:
    """Local-scaling bandwidths by full sort, plain loops."""
    lambdas = []
    for x in pool_feats:
        dists = sorted(
            float(np.sum((r - x) ** 2)) for r in refs if float(np.sum((r - x) ** 2)) > 0
        )
        if len(dists) >= k and dists[k - 1] > 0:
            lambdas.append(1.0 / dists[k - 1])
        else:
            lambdas.append(None)
    valid = [v for v in lambdas if v is not None]
    fill = float(np.median(valid)) if valid else 1.0
    return np.array([fill if v is None else v for v in lambdas])


def brute_average_precision(scores, is_causal) -> float:
    """Step-integrated AP with plain loops over distinct thresholds."""
    scores = list(map(float, scores))
    flags = list(map(bool, is_causal))
    n_pos = sum(flags)
    thresholds = sorted(set(scores), reverse=True)
    ap = 0.0
    prev_r = 0.0
    for thr in thresholds:
        tp = sum(1 for s, f in zip(scores, flags) if s >= thr and f)
        pp = sum(1 for s in scores if s >= thr)
        p = tp / pp
        r = tp / n_pos
        ap += (r - prev_r) * p
        prev_r = r
    return ap


def mpmath_posteriors(weights, means, variances, x) -> np.ndarray:
    """High-precision GMM posteriors via mpmath."""
    import mpmath as mp

    mp.mp.dps = 60
    K, d = np.shape(means)
    joints = []
    for k in range(K):
        log_pdf = mp.mpf(0)
        for j in range(d):
            v = mp.mpf(float(variances[k][j]))
            diff = mp.mpf(float(x[j])) - mp.mpf(float(means[k][j]))
            log_pdf += -(diff**2) / (2 * v) - mp.log(2 * mp.pi * v) / 2
        joints.append(mp.log(mp.mpf(float(weights[k]))) + log_pdf)
    mx = max(joints)
    exps = [mp.e ** (j - mx) for j in joints]
    total = sum(exps)
    return np.array([float(e / total) for e in exps])


def textbook_paired_t(a, b):
    """Hand-written paired t statistic (mean difference over its std error)."""
    d = [float(x) - float(y) for x, y in zip(a, b)]
    n = len(d)
    mean = sum(d) / n
    var = sum((v - mean) ** 2 for v in d) / (n - 1)
    return mean / (var**0.5 / n**0.5)
