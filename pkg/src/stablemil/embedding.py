"""Bag embedding against a stable-instance pool, with local kernel scaling.

A bag's embedding coordinate for pool member x_j is its best instance match
max_i exp(-lambda_j * ||x_i - x_j||^2), so positive bags light up at least
one coordinate while negative bags stay uniformly dim. Each lambda_j comes
from local scaling: the distance from x_j to its k-th nearest reference
instance sets the bandwidth.
"""
from __future__ import annotations

import hashlib
import io
import warnings
from dataclasses import dataclass

import numpy as np

from .bags import Bag, MILDataset
from .dataio import format_float
from .errors import (
    DimMismatch,
    EmptyPool,
    SingleClass,
    SingleFeatureDegenerate,
    TooFewReferences,
)
from .select import StablePool
from .svm import SVMGrid, SVMModel, grid_search_rbf, svm_decision_batch


@dataclass
class EmbeddingSpec:
    """Pool members plus one bandwidth per member (or a single global one)."""

    pool: StablePool
    lambdas: np.ndarray

    def __post_init__(self):
        self.lambdas = np.atleast_1d(np.asarray(self.lambdas, dtype=np.float64))
        q = self.pool.size
        if q == 0:
            raise EmptyPool("embedding needs a nonempty pool")
        if self.lambdas.shape[0] not in (1, q):
            raise ValueError(f"lambdas must have length 1 or {q}")
        if not np.all(self.lambdas > 0):
            raise ValueError("lambdas must be positive")

    @property
    def q(self) -> int:
        return self.pool.size

    def member_lambdas(self) -> np.ndarray:
        if self.lambdas.shape[0] == 1:
            return np.full(self.q, self.lambdas[0])
        return self.lambdas

    def spec_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.pool.feature_matrix().tobytes())
        h.update(self.member_lambdas().tobytes())
        return h.hexdigest()[:16]


def local_scale(pool: StablePool, reference_instances, k: int = 7) -> np.ndarray:
    """Per-member bandwidths 1/sigma^2 from k-th-nearest-reference distances.

    Exact self-matches among the references are excluded. Members without k
    distinct-position references (or with a zero k-th distance) fall back to
    the median of the valid bandwidths, or 1.0 if none exist.
    """
    refs = np.asarray(reference_instances, dtype=np.float64)
    if k < 1:
        raise ValueError("k must be >= 1")
    if len(refs) <= k:
        raise TooFewReferences(f"{len(refs)} references for k={k}")
    feats = pool.feature_matrix()
    if refs.shape[1] != feats.shape[1]:
        raise DimMismatch(f"pool dim {feats.shape[1]}, reference dim {refs.shape[1]}")

    lambdas = np.full(len(feats), np.nan)
    for j, x in enumerate(feats):
        d2 = ((refs - x) ** 2).sum(axis=1)
        d2 = d2[d2 > 0.0]
        if len(d2) < k:
            continue
        sigma2 = float(np.partition(d2, k - 1)[k - 1])
        if sigma2 > 0:
            lambdas[j] = 1.0 / sigma2
    missing = np.isnan(lambdas)
    if missing.any():
        valid = lambdas[~missing]
        lambdas[missing] = float(np.median(valid)) if len(valid) else 1.0
    return lambdas


def similarity(bag: Bag, x, lam: float) -> float:
    """Best instance match: max_i exp(-lam * ||x_i - x||^2), in (0, 1]."""
    x = np.asarray(x, dtype=np.float64)
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if bag.dim != x.shape[0]:
        raise DimMismatch(f"bag dim {bag.dim}, instance dim {x.shape[0]}")
    d2 = ((bag.feature_matrix() - x) ** 2).sum(axis=1)
    return float(np.exp(-lam * d2.min()))


def embed_bag(bag: Bag, spec: EmbeddingSpec) -> np.ndarray:
    """Embedding vector of length q, one coordinate per pool member."""
    feats = spec.pool.feature_matrix()
    if bag.dim != feats.shape[1]:
        raise DimMismatch(f"bag dim {bag.dim}, pool dim {feats.shape[1]}")
    X = bag.feature_matrix()
    diff = X[:, None, :] - feats[None, :, :]
    d2 = np.einsum("ijk,ijk->ij", diff, diff)
    return np.exp(-spec.member_lambdas()[None, :] * d2).max(axis=0)


@dataclass
class EmbeddedDataset:
    """Embedded bags as an (m, q) matrix with labels and provenance."""

    vectors: np.ndarray
    labels: np.ndarray
    bag_ids: list[str]
    spec_hash: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        q = self.vectors.shape[1]
        buf.write("bag_id," + ",".join(f"z{j + 1}" for j in range(q)) + ",label\n")
        for bid, row, label in zip(self.bag_ids, self.vectors, self.labels):
            buf.write(bid + "," + ",".join(format_float(v) for v in row) + f",{int(label)}\n")
        return buf.getvalue()


def embed_dataset(dataset: MILDataset, spec: EmbeddingSpec) -> EmbeddedDataset:
    vectors = np.stack([embed_bag(b, spec) for b in dataset.bags])
    labels = np.array([b.label for b in dataset.bags])
    return EmbeddedDataset(vectors, labels, [b.id for b in dataset.bags], spec.spec_hash())


@dataclass
class EmbeddedClassifier:
    """Final model: embedding spec plus either an SVM or a majority vote."""

    spec: EmbeddingSpec
    model: SVMModel | None
    majority_label: int | None = None
    chosen_C: float | None = None
    chosen_gamma: float | None = None
    cv_accuracy: float | None = None

    def predict_bag(self, bag: Bag) -> int:
        if self.model is None:
            return int(self.majority_label)
        z = embed_bag(bag, self.spec)
        return int(svm_decision_batch(self.model, z[None, :])[0] >= 0)

    def predict_dataset(self, dataset: MILDataset) -> np.ndarray:
        if self.model is None:
            return np.full(len(dataset.bags), int(self.majority_label))
        emb = embed_dataset(dataset, self.spec)
        return (svm_decision_batch(self.model, emb.vectors) >= 0).astype(int)


def train_embedded_classifier(
    train: MILDataset,
    spec: EmbeddingSpec,
    seed: int,
    grid: SVMGrid = SVMGrid(),
    max_iter: int | None = None,
) -> EmbeddedClassifier:
    """Embed the training bags and grid-search an RBF SVM on the embeddings.

    If every embedded vector is identical the features carry no signal; a
    SingleFeatureDegenerate warning is issued and a majority-vote classifier
    is returned instead.
    """
    labels = np.array([b.label for b in train.bags])
    if len(np.unique(labels)) < 2:
        raise SingleClass("training data has a single bag label")
    emb = embed_dataset(train, spec)
    if np.all(emb.vectors == emb.vectors[0]):
        warnings.warn(
            "all embedded vectors identical; returning majority classifier",
            SingleFeatureDegenerate,
        )
        majority = int(np.sum(labels == 1) * 2 >= len(labels))
        return EmbeddedClassifier(spec, None, majority_label=majority)
    y = np.where(labels == 1, 1.0, -1.0)
    model, C, gamma, cv_acc = grid_search_rbf(emb.vectors, y, seed, grid, max_iter=max_iter)
    return EmbeddedClassifier(
        spec, model, chosen_C=C, chosen_gamma=gamma, cv_accuracy=cv_acc
    )
