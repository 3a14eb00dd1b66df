import numpy as np
import pytest
from hypothesis import given, strategies as st

from stablemil.bags import (
    CAUSAL,
    NEGATIVE,
    NOISY,
    UNKNOWN,
    Bag,
    Instance,
    MILDataset,
    make_bag,
    oracle_label,
)
from stablemil.errors import DimMismatch, EmptyDataset, UnknownTruth


def test_oracle_label_all_nonpositive():
    bag = make_bag("b", [[0.0], [1.0], [2.0]], 0, [NEGATIVE, NOISY, NEGATIVE])
    assert oracle_label(bag) == 0


def test_oracle_label_single_causal_suffices():
    bag = make_bag("b", [[0.0], [1.0]], 1, [NEGATIVE, CAUSAL])
    assert oracle_label(bag) == 1


def test_oracle_label_boolean_or():
    bag = make_bag("b", [[0.0], [1.0], [2.0]], 1, [CAUSAL, CAUSAL, NOISY])
    assert oracle_label(bag) == 1


def test_oracle_label_unknown_truth_raises():
    bag = make_bag("b", [[0.0], [1.0]], 0, [NEGATIVE, UNKNOWN])
    with pytest.raises(UnknownTruth):
        oracle_label(bag)


@given(st.lists(st.sampled_from([CAUSAL, NOISY, NEGATIVE]), min_size=1, max_size=8),
       st.sampled_from([CAUSAL, NOISY, NEGATIVE]))
def test_oracle_label_monotone_under_addition(roles, extra):
    feats = [[float(i)] for i in range(len(roles))]
    bag = make_bag("b", feats, int(CAUSAL in roles), roles)
    grown = Bag("b2", bag.instances + (Instance([99.0], extra),),
                int(CAUSAL in roles or extra == CAUSAL))
    if oracle_label(bag) == 1:
        assert oracle_label(grown) == 1


@given(st.lists(st.sampled_from([CAUSAL, NOISY, NEGATIVE]), min_size=2, max_size=8))
def test_oracle_label_stable_under_noncausal_removal(roles):
    feats = [[float(i)] for i in range(len(roles))]
    bag = make_bag("b", feats, int(CAUSAL in roles), roles)
    for i, role in enumerate(roles):
        if role == CAUSAL:
            continue
        kept = bag.instances[:i] + bag.instances[i + 1:]
        shrunk = Bag("b2", kept, bag.label)
        assert oracle_label(shrunk) == oracle_label(bag)


def test_instance_rejects_nonfinite():
    with pytest.raises(ValueError):
        Instance([np.nan, 1.0])
    with pytest.raises(ValueError):
        Instance([np.inf])


def test_instance_features_frozen():
    inst = Instance([1.0, 2.0])
    with pytest.raises(ValueError):
        inst.features[0] = 5.0


def test_bag_requires_instances_and_consistent_dims():
    with pytest.raises(ValueError):
        Bag("b", (), 0)
    with pytest.raises(DimMismatch):
        Bag("b", (Instance([1.0]), Instance([1.0, 2.0])), 0)
    with pytest.raises(ValueError):
        make_bag("b", [[1.0]], 2)


def test_dataset_checks_dims_and_nonempty():
    with pytest.raises(EmptyDataset):
        MILDataset((), {})
    b1 = make_bag("a", [[1.0, 2.0]], 0)
    b2 = make_bag("b", [[1.0]], 0)
    with pytest.raises(DimMismatch):
        MILDataset((b1, b2), {})


def test_dataset_accessors():
    b1 = make_bag("a", [[1.0, 2.0], [3.0, 4.0]], 1)
    b2 = make_bag("b", [[5.0, 6.0]], 0)
    ds = MILDataset((b1, b2), {"k": 1})
    assert ds.dim == 2
    assert len(ds) == 2
    assert [b.id for b in ds.positives()] == ["a"]
    assert [b.id for b in ds.negatives()] == ["b"]
    assert ds.all_instances().shape == (3, 2)
