import numpy as np
import pytest

from stablemil.bags import CAUSAL, NEGATIVE, NOISY, Bag, Instance, MILDataset, make_bag


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_dataset(rng, n_bags=6, d=3, max_instances=5, with_truths=False, with_meta=False):
    bags = []
    for i in range(n_bags):
        n = int(rng.integers(1, max_instances + 1))
        feats = rng.normal(size=(n, d))
        if with_truths:
            truths = [str(rng.choice([CAUSAL, NOISY, NEGATIVE])) for _ in range(n)]
            label = int(CAUSAL in truths)
            bags.append(make_bag(f"bag-{i}", feats, label, truths))
        else:
            bags.append(make_bag(f"bag-{i}", feats, int(rng.integers(2))))
    if not any(b.label == 1 for b in bags):
        bags[0] = make_bag("bag-0", rng.normal(size=(2, d)), 1,
                           [CAUSAL, NEGATIVE] if with_truths else None)
    meta = {"seed": 3, "note": "fixture", "ratio": 0.25} if with_meta else {}
    return MILDataset(tuple(bags), meta)


@pytest.fixture
def toy_truth_bag():
    return make_bag("toy", [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]], 1,
                    [NEGATIVE, NOISY, CAUSAL])


def tiny_shift_config(seed=0, bags_total=40, n=6, dim=4, var=0.25):
    """A small, fast benchmark config for unit tests."""
    from stablemil.benchgen import CONCEPT_NAMES, ShiftConfig, make_concepts

    e = np.eye(dim)
    means = {
        "causal": 3.0 * e[0],
        "noisy": 3.0 * e[1],
        "negative2": -3.0 * e[0],
        "negative3": -3.0 * e[1],
    }
    concepts = make_concepts(dim, means, {name: var for name in CONCEPT_NAMES})
    return ShiftConfig(concepts=concepts, bags_total=bags_total, instances_per_bag=n,
                       positive_fraction=0.5, seed=seed)
