"""Stable-instance learning: treated bags, effect scores, threshold, pool.

A candidate instance's score is the fraction of negative training bags whose
predicted label flips to positive once the candidate is appended — the
empirical estimate of its treatment effect on the bag label. Candidates come
only from positive bags; those scoring at or above the threshold form the
stable pool the embedding is built on.

brute_force_effect additionally verifies the population-level decomposition
of the effect (base-rate term plus unique-positive constant) by exhaustively
treating and untreating every bag of a fully labeled population under the
truth oracle.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .bags import CAUSAL, Bag, Instance, MILDataset, oracle_label_roles
from .classifier import BagClassifier, encode_bag_sums, predict_bag, predict_treated_batch
from .dataio import canonical_json
from .errors import (
    DimMismatch,
    EmptyNegatives,
    MissingClass,
    NotNegativeBag,
    TooFewNegatives,
    UnknownTruth,
)


@dataclass(frozen=True)
class TreatedBag:
    """A negative bag with one candidate instance appended."""

    base_id: str
    candidate: Instance
    bag: Bag


@dataclass(frozen=True)
class ScoredCandidate:
    instance: Instance
    source_bag: str
    source_index: int
    score: float


@dataclass
class StablePool:
    """Selected candidates, the threshold used, and the full scored list."""

    members: list[ScoredCandidate]
    tau: float
    all_scores: list[ScoredCandidate]
    fallback: bool = False

    @property
    def size(self) -> int:
        return len(self.members)

    def feature_matrix(self) -> np.ndarray:
        if not self.members:
            raise ValueError("pool is empty")
        return np.stack([m.instance.features for m in self.members])

    def to_json(self) -> str:
        def cand(c: ScoredCandidate) -> dict:
            return {
                "features": [float(v) for v in c.instance.features],
                "truth": c.instance.truth,
                "source_bag": c.source_bag,
                "source_index": c.source_index,
                "score": float(c.score),
            }

        return canonical_json(
            {
                "tau": float(self.tau),
                "fallback": self.fallback,
                "members": [cand(c) for c in self.members],
                "all_scores": [cand(c) for c in self.all_scores],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "StablePool":
        rec = json.loads(text)

        def cand(c: dict) -> ScoredCandidate:
            return ScoredCandidate(
                Instance(np.asarray(c["features"], dtype=np.float64), c["truth"]),
                c["source_bag"],
                int(c["source_index"]),
                float(c["score"]),
            )

        return cls(
            members=[cand(c) for c in rec["members"]],
            tau=float(rec["tau"]),
            all_scores=[cand(c) for c in rec["all_scores"]],
            fallback=bool(rec["fallback"]),
        )


def construct_treated_bag(x: Instance, neg: Bag) -> TreatedBag:
    """Append candidate x to a negative bag (multiset append; base unchanged)."""
    if neg.label != 0:
        raise NotNegativeBag(f"bag {neg.id!r} has label {neg.label}")
    if x.dim != neg.dim:
        raise DimMismatch(f"candidate dim {x.dim}, bag dim {neg.dim}")
    treated = Bag(f"{neg.id}+treated", neg.instances + (x,), neg.label)
    return TreatedBag(neg.id, x, treated)


def score_instance(x: Instance, negatives, classifier: BagClassifier) -> float:
    """Average predicted label over all treated bags; a multiple of 1/m-.

    Computed as an integer flip count over m-, so the value is exact and
    independent of the order of the negative bags.
    """
    negatives = list(negatives)
    if not negatives:
        raise EmptyNegatives("scoring needs at least one negative bag")
    for b in negatives:
        if b.label != 0:
            raise NotNegativeBag(f"bag {b.id!r} has label {b.label}")
    if classifier.kind == "mifv":
        encoded = encode_bag_sums(classifier, negatives)
        flips = int(predict_treated_batch(classifier, encoded, x.features).sum())
    else:
        flips = sum(
            predict_bag(classifier, construct_treated_bag(x, b).bag) for b in negatives
        )
    return flips / len(negatives)


def _scores_for_candidates(candidates, negatives, classifier) -> np.ndarray:
    """Scores for many candidates against one fixed negative-bag list."""
    if classifier.kind == "mifv":
        encoded = encode_bag_sums(classifier, negatives)
        m = len(negatives)
        return np.array(
            [
                int(predict_treated_batch(classifier, encoded, x.features).sum()) / m
                for x in candidates
            ]
        )
    return np.array([score_instance(x, negatives, classifier) for x in candidates])


def third_quartile(values) -> float:
    """Linear-interpolation quantile at position 0.75*(n-1) of the sorted values."""
    arr = np.sort(np.asarray(values, dtype=np.float64))
    if arr.size == 0:
        raise ValueError("quantile of empty list")
    pos = 0.75 * (arr.size - 1)
    lo = int(math.floor(pos))
    hi = int(math.ceil(pos))
    frac = pos - lo
    return float(arr[lo] + frac * (arr[hi] - arr[lo]))


def select_threshold(negatives, classifier: BagClassifier, seed: int) -> float:
    """Calibrate the selection threshold on negative-only treatments.

    The negative bags are split (seeded shuffle) into halves A and B; every
    instance of every bag in A is scored against the bags of B, and the
    returned threshold is the third quartile of those scores.
    """
    negatives = list(negatives)
    if len(negatives) < 2:
        raise TooFewNegatives("threshold selection needs at least 2 negative bags")
    for b in negatives:
        if b.label != 0:
            raise NotNegativeBag(f"bag {b.id!r} has label {b.label}")
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(negatives))
    half = (len(negatives) + 1) // 2
    part_a = [negatives[i] for i in order[:half]]
    part_b = [negatives[i] for i in order[half:]]
    probes = [inst for bag in part_a for inst in bag.instances]
    scores = _scores_for_candidates(probes, part_b, classifier)
    return third_quartile(scores)


def candidate_pool(train: MILDataset) -> list[ScoredCandidate]:
    """All instances of positive bags, deduplicated by exact feature equality.

    Duplicates keep the first occurrence's provenance; scores are filled in
    later (initialized to nan).
    """
    seen = set()
    out = []
    for bag in train.bags:
        if bag.label != 1:
            continue
        for idx, inst in enumerate(bag.instances):
            key = inst.features.tobytes()
            if key in seen:
                continue
            seen.add(key)
            out.append(ScoredCandidate(inst, bag.id, idx, float("nan")))
    return out


def learn_stable_instances(
    train: MILDataset,
    classifier: BagClassifier,
    tau: float,
    subsample_negatives: int | None = None,
    subsample_seed: int = 0,
) -> StablePool:
    """Score every positive-bag instance and keep those with score >= tau.

    When no candidate reaches tau, the top ceil(5%) by score are kept and the
    pool is flagged as a fallback. subsample_negatives optionally caps how
    many negative bags each candidate is scored against (off by default).
    """
    positives = train.positives()
    negatives = train.negatives()
    if not positives or not negatives:
        raise MissingClass("training data needs both positive and negative bags")
    if subsample_negatives is not None and subsample_negatives < len(negatives):
        rng = np.random.default_rng(subsample_seed)
        keep = rng.choice(len(negatives), size=subsample_negatives, replace=False)
        negatives = [negatives[i] for i in sorted(keep)]

    candidates = candidate_pool(train)
    scores = _scores_for_candidates([c.instance for c in candidates], negatives, classifier)
    scored = [
        ScoredCandidate(c.instance, c.source_bag, c.source_index, float(s))
        for c, s in zip(candidates, scores)
    ]
    members = [c for c in scored if c.score >= tau]
    fallback = False
    if not members:
        fallback = True
        k = max(1, math.ceil(0.05 * len(scored)))
        # stable sort on -score keeps candidate order among ties
        order = np.argsort([-c.score for c in scored], kind="stable")[:k]
        members = [scored[i] for i in sorted(order)]
    return StablePool(members=members, tau=float(tau), all_scores=scored, fallback=fallback)


@dataclass(frozen=True)
class EffectDecomposition:
    """Exhaustive treatment effect and its base-rate/unique-positive split."""

    effect: float
    p_y0: float
    e_treated_given_y0: float
    p_unique_positive: float
    p_y1: float

    @property
    def decomposition(self) -> float:
        return self.p_y0 * self.e_treated_given_y0 + self.p_unique_positive * self.p_y1


def brute_force_effect(x: Instance, bag_population) -> EffectDecomposition:
    """Exact effect of x over an enumerable, fully truth-labeled population.

    Every bag is treated (x appended) and untreated (all copies of x removed,
    possibly emptying the bag) and relabeled by the truth oracle. The effect
    is E[Y*|T=1] - E[Y*|T=0]; the returned record carries P(Y=0),
    E[Y*|Y=0,T=1], and the fraction p of positive bags whose only causal
    content is x, so callers can check
        effect == P(Y=0) * E[Y*|Y=0,T=1] + p * P(Y=1)
    exactly. Conditional terms over empty strata are defined as 0.
    """
    bags = list(bag_population)
    if not bags:
        raise ValueError("population is empty")
    key = x.features.tobytes()
    if x.truth == "unknown":
        raise UnknownTruth("candidate instance has unknown truth")

    n = len(bags)
    pre = []
    treated = []
    untreated = []
    for bag in bags:
        roles = [inst.truth for inst in bag.instances]
        pre.append(oracle_label_roles(roles))
        treated.append(oracle_label_roles(roles + [x.truth]))
        kept = [
            inst.truth for inst in bag.instances if inst.features.tobytes() != key
        ]
        untreated.append(oracle_label_roles(kept))

    e_t1 = sum(treated) / n
    e_t0 = sum(untreated) / n
    effect = e_t1 - e_t0

    y0 = [i for i in range(n) if pre[i] == 0]
    y1 = [i for i in range(n) if pre[i] == 1]
    p_y0 = len(y0) / n
    p_y1 = len(y1) / n
    e_y0_t1 = (sum(treated[i] for i in y0) / len(y0)) if y0 else 0.0
    p_unique = (sum(1 - untreated[i] for i in y1) / len(y1)) if y1 else 0.0
    return EffectDecomposition(
        effect=effect,
        p_y0=p_y0,
        e_treated_given_y0=e_y0_t1,
        p_unique_positive=p_unique,
        p_y1=p_y1,
    )
