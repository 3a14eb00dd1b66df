"""Fisher-vector bag encoding over a diagonal GMM.

A bag's encoding concatenates, per component, the gradient of its average
instance log-likelihood with respect to the component means and variances,
scaled by the closed-form diagonal Fisher-information normalizer. Optional
power (signed square root) and L2 normalization follow. The encoding has
dimension 2*d*K.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bags import Bag
from .errors import DimMismatch
from .gmm import GMMModel, gmm_posteriors_batch


@dataclass(frozen=True)
class FisherEncoder:
    """A fitted GMM plus normalization flags."""

    gmm: GMMModel
    power_norm: bool = True
    l2_norm: bool = True

    @property
    def dim(self) -> int:
        return 2 * self.gmm.dim * self.gmm.n_components


def loglik_gradients(gmm: GMMModel, X: np.ndarray):
    """Gradients of the average log-likelihood of X w.r.t. means and variances.

    Returns (gmean, gvar), each (K, d):
        gmean[k] = (1/T) sum_t r_tk (x_t - mu_k) / var_k
        gvar[k]  = (1/T) sum_t r_tk ((x_t - mu_k)^2 / (2 var_k^2) - 1/(2 var_k))
    """
    X = np.asarray(X, dtype=np.float64)
    resp = gmm_posteriors_batch(gmm, X)
    T = len(X)
    diff = X[:, None, :] - gmm.means[None, :, :]
    gmean = (resp[:, :, None] * diff / gmm.variances[None, :, :]).sum(axis=0) / T
    gvar = (
        resp[:, :, None] * (diff**2 / (2.0 * gmm.variances[None, :, :] ** 2)
                            - 1.0 / (2.0 * gmm.variances[None, :, :]))
    ).sum(axis=0) / T
    return gmean, gvar


def instance_contributions(gmm: GMMModel, X: np.ndarray) -> np.ndarray:
    """Per-instance Fisher-scaled contribution rows, shape (T, 2dK).

    A bag's pre-normalization encoding is the mean of its instances' rows, so
    appending an instance to a bag only adds one row to the running sum. Rows
    are laid out as [mean-block (K*d), variance-block (K*d)].
    """
    X = np.asarray(X, dtype=np.float64)
    resp = gmm_posteriors_batch(gmm, X)
    sd = np.sqrt(gmm.variances)
    dev = (X[:, None, :] - gmm.means[None, :, :]) / sd[None, :, :]
    root_w = np.sqrt(gmm.weights)[None, :, None]
    cm = resp[:, :, None] * dev / root_w
    cv = resp[:, :, None] * (dev**2 - 1.0) / (np.sqrt(2.0) * root_w)
    T = len(X)
    return np.concatenate([cm.reshape(T, -1), cv.reshape(T, -1)], axis=1)


def sum_contribution_rows(rows: np.ndarray) -> np.ndarray:
    """Strict in-order sum of contribution rows.

    Sequential accumulation keeps 'sum of T rows, then add one more' bitwise
    identical to 'sum of T+1 rows', which the treated-bag fast path relies on.
    """
    acc = np.zeros(rows.shape[1])
    for row in rows:
        acc += row
    return acc


def finish_encodings(
    totals: np.ndarray, counts: np.ndarray, power_norm: bool, l2_norm: bool
) -> np.ndarray:
    """Average (per row), then apply power and L2 normalization.

    Single-bag encoding goes through this same batched code so one-row and
    many-row calls produce bitwise identical rows.
    """
    V = totals / np.asarray(counts, dtype=np.float64)[:, None]
    if power_norm:
        V = np.sign(V) * np.sqrt(np.abs(V))
    if l2_norm:
        norms = np.sqrt(np.einsum("ij,ij->i", V, V))
        nz = norms > 0
        V[nz] = V[nz] / norms[nz, None]
    return V


def fisher_encode(bag: Bag, encoder: FisherEncoder) -> np.ndarray:
    """Encode a bag as its 2dK Fisher vector."""
    if bag.dim != encoder.gmm.dim:
        raise DimMismatch(f"bag dim {bag.dim}, gmm dim {encoder.gmm.dim}")
    rows = instance_contributions(encoder.gmm, bag.feature_matrix())
    total = sum_contribution_rows(rows)
    return finish_encodings(
        total[None, :], np.array([len(rows)]), encoder.power_norm, encoder.l2_norm
    )[0]
