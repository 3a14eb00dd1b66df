"""Multi-instance data model: instances, bags, datasets, and the oracle label rule.

A bag is a multiset of feature-vector instances sharing one binary label.
Under the standard multi-instance assumption the bag label is the boolean OR
of the (hidden) instance labels, so a bag is positive iff it contains at
least one positive instance. Instances optionally carry a ground-truth role
used by synthetic benchmarks and oracle tests.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DimMismatch, EmptyDataset, UnknownTruth

CAUSAL = "causal"
NOISY = "noisy"
NEGATIVE = "negative"
UNKNOWN = "unknown"
TRUTH_ROLES = (CAUSAL, NOISY, NEGATIVE, UNKNOWN)


def _as_feature_vector(features) -> np.ndarray:
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError("features must be a nonempty 1-d vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("features must be finite")
    arr = arr.copy()
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Instance:
    """One feature vector plus an optional ground-truth role."""

    features: np.ndarray
    truth: str = UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "features", _as_feature_vector(self.features))
        if self.truth not in TRUTH_ROLES:
            raise ValueError(f"unknown truth role {self.truth!r}")

    @property
    def dim(self) -> int:
        return self.features.shape[0]


@dataclass(frozen=True)
class Bag:
    """A nonempty multiset of instances with a binary label."""

    id: str
    instances: tuple[Instance, ...]
    label: int

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        if not self.instances:
            raise ValueError(f"bag {self.id!r} has no instances")
        if self.label not in (0, 1):
            raise ValueError(f"bag {self.id!r} label must be 0 or 1")
        d = self.instances[0].dim
        for inst in self.instances[1:]:
            if inst.dim != d:
                raise DimMismatch(f"bag {self.id!r} mixes dimensions {d} and {inst.dim}")

    @property
    def dim(self) -> int:
        return self.instances[0].dim

    def __len__(self) -> int:
        return len(self.instances)

    def feature_matrix(self) -> np.ndarray:
        """Instances stacked in order as an (n, d) array."""
        return np.stack([inst.features for inst in self.instances])


@dataclass(frozen=True)
class MILDataset:
    """An ordered collection of bags plus free-form provenance metadata."""

    bags: tuple[Bag, ...]
    meta: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "bags", tuple(self.bags))
        object.__setattr__(self, "meta", dict(self.meta))
        if not self.bags:
            raise EmptyDataset("dataset has no bags")
        d = self.bags[0].dim
        for bag in self.bags:
            if bag.dim != d:
                raise DimMismatch(f"bag {bag.id!r} has dim {bag.dim}, expected {d}")

    @property
    def dim(self) -> int:
        return self.bags[0].dim

    def __len__(self) -> int:
        return len(self.bags)

    def positives(self) -> list[Bag]:
        return [b for b in self.bags if b.label == 1]

    def negatives(self) -> list[Bag]:
        return [b for b in self.bags if b.label == 0]

    def all_instances(self) -> np.ndarray:
        """Every instance of every bag, stacked in dataset order."""
        return np.vstack([b.feature_matrix() for b in self.bags])


def oracle_label(bag: Bag) -> int:
    """Label a bag from its instances' ground-truth roles.

    Returns 1 iff at least one instance is causal (the boolean-OR rule of
    the standard multi-instance assumption), 0 otherwise.

    Raises UnknownTruth if any instance role is unknown.
    """
    return oracle_label_roles(inst.truth for inst in bag.instances)


def oracle_label_roles(roles: Iterable[str]) -> int:
    """oracle_label over bare roles; an empty collection labels 0."""
    label = 0
    for role in roles:
        if role == UNKNOWN:
            raise UnknownTruth("instance with unknown truth role")
        if role == CAUSAL:
            label = 1
    return label


def make_bag(bag_id: str, features: Sequence, label: int, truths: Sequence[str] | None = None) -> Bag:
    """Convenience constructor from a feature matrix and optional role list."""
    rows = np.asarray(features, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if truths is None:
        truths = [UNKNOWN] * len(rows)
    if len(truths) != len(rows):
        raise ValueError("truths length must match instance count")
    return Bag(bag_id, tuple(Instance(r, t) for r, t in zip(rows, truths)), label)
