"""Bag-level classifiers: the Fisher-vector pipeline, the truth oracle, and stubs.

The trained kind ("mifv") fits a GMM on the pooled training instances,
Fisher-encodes each bag, and trains a linear SVM on the encodings. The
"oracle" kind labels bags from ground-truth instance roles, and "stub" reads
answers from a fixed table (test plumbing). Prediction is pure and safe to
fan out across workers.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .bags import Bag, MILDataset, oracle_label
from .errors import DimMismatch, SingleClass
from .fisher import (
    FisherEncoder,
    finish_encodings,
    fisher_encode,
    instance_contributions,
    sum_contribution_rows,
)
from .gmm import GMMModel, gmm_fit
from .kernels import KernelSpec
from .svm import SVMModel, smo_train, svm_decision_batch

DEFAULT_COMPONENTS = 5
DEFAULT_LINEAR_C = 1.0


@dataclass
class BagClassifier:
    """A bag -> {0,1} predictor; kind is "mifv", "oracle", or "stub"."""

    kind: str
    encoder: FisherEncoder | None = None
    linear_model: SVMModel | None = None
    stub_table: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ("mifv", "oracle", "stub"):
            raise ValueError(f"unknown classifier kind {self.kind!r}")
        if self.kind == "mifv" and (self.encoder is None or self.linear_model is None):
            raise ValueError("mifv classifier needs an encoder and a linear model")

    def to_json(self) -> str:
        from .dataio import canonical_json

        if self.kind != "mifv":
            raise ValueError("only mifv classifiers serialize")
        return canonical_json(
            {
                "kind": self.kind,
                "power_norm": self.encoder.power_norm,
                "l2_norm": self.encoder.l2_norm,
                "gmm": json.loads(self.encoder.gmm.to_json()),
                "linear_model": json.loads(self.linear_model.to_json()),
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "BagClassifier":
        rec = json.loads(text)
        gmm = GMMModel.from_json(json.dumps(rec["gmm"]))
        encoder = FisherEncoder(gmm, rec["power_norm"], rec["l2_norm"])
        model = SVMModel.from_json(json.dumps(rec["linear_model"]))
        return cls("mifv", encoder=encoder, linear_model=model)


def oracle_classifier() -> BagClassifier:
    return BagClassifier("oracle")


def stub_classifier(table: dict) -> BagClassifier:
    return BagClassifier("stub", stub_table=dict(table))


def train_bag_classifier(
    train: MILDataset,
    K: int = DEFAULT_COMPONENTS,
    seed: int = 0,
    C: float = DEFAULT_LINEAR_C,
    restarts: int = 1,
    power_norm: bool = True,
    l2_norm: bool = True,
    max_iter: int | None = None,
) -> BagClassifier:
    """Fit the Fisher-vector bag classifier on a training dataset."""
    labels = np.array([b.label for b in train.bags])
    if len(np.unique(labels)) < 2:
        raise SingleClass("training data has a single bag label")
    gmm = gmm_fit(train.all_instances(), K=K, seed=seed, restarts=restarts)
    encoder = FisherEncoder(gmm, power_norm=power_norm, l2_norm=l2_norm)
    Z = np.stack([fisher_encode(b, encoder) for b in train.bags])
    y = np.where(labels == 1, 1.0, -1.0)
    model = smo_train(Z, y, KernelSpec("linear"), C=C, max_iter=max_iter)
    return BagClassifier("mifv", encoder=encoder, linear_model=model)


def predict_bag(classifier: BagClassifier, bag: Bag) -> int:
    """Predict a bag label in {0, 1}; pure function of (classifier, bag)."""
    if classifier.kind == "oracle":
        return oracle_label(bag)
    if classifier.kind == "stub":
        return int(classifier.stub_table[bag.id])
    z = fisher_encode(bag, classifier.encoder)
    return int(svm_decision_batch(classifier.linear_model, z[None, :])[0] >= 0)


# -- treated-bag fast path ---------------------------------------------------
#
# Appending one instance to a bag shifts its pre-normalization encoding sum by
# that instance's contribution row, so treated-bag predictions for many
# (candidate, bag) pairs reduce to row adds plus renormalization. Results are
# bitwise identical to encoding each treated bag from scratch because the
# per-bag sums accumulate rows strictly in instance order.


@dataclass
class EncodedBags:
    """Pre-summed contribution rows for a fixed list of bags."""

    sums: np.ndarray  # (m, 2dK)
    counts: np.ndarray  # (m,)


def encode_bag_sums(classifier: BagClassifier, bags) -> EncodedBags:
    if classifier.kind != "mifv":
        raise ValueError("fast path requires a mifv classifier")
    gmm = classifier.encoder.gmm
    sums = []
    counts = []
    for bag in bags:
        rows = instance_contributions(gmm, bag.feature_matrix())
        sums.append(sum_contribution_rows(rows))
        counts.append(len(rows))
    return EncodedBags(np.stack(sums), np.asarray(counts))


def predict_treated_batch(
    classifier: BagClassifier, encoded: EncodedBags, candidate: np.ndarray
) -> np.ndarray:
    """Labels of every encoded bag after appending one candidate instance."""
    enc = classifier.encoder
    row = instance_contributions(enc.gmm, np.asarray(candidate, dtype=np.float64)[None, :])[0]
    totals = encoded.sums + row[None, :]
    counts = encoded.counts + 1
    Z = finish_encodings(totals, counts, enc.power_norm, enc.l2_norm)
    dec = svm_decision_batch(classifier.linear_model, Z)
    return (dec >= 0).astype(int)
