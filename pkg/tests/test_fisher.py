import numpy as np
import pytest

from stablemil.bags import Bag, Instance, make_bag
from stablemil.errors import DimMismatch
from stablemil.fisher import (
    FisherEncoder,
    fisher_encode,
    instance_contributions,
    loglik_gradients,
    sum_contribution_rows,
)
from stablemil.gmm import GMMModel, gmm_fit

from oracles import finite_diff_gradients


def random_gmm(rng, K, d):
    return GMMModel(
        weights=rng.dirichlet(np.ones(K) * 5),
        means=rng.normal(size=(K, d)) * 2,
        variances=rng.uniform(0.3, 2.0, size=(K, d)),
    )


def test_mean_gradient_zero_at_component_mean(rng):
    model = gmm_fit(rng.normal(size=(30, 3)), K=1, seed=0)
    bag = make_bag("b", model.means[0][None, :], 1)
    enc = FisherEncoder(model, power_norm=False, l2_norm=False)
    v = fisher_encode(bag, enc)
    assert np.allclose(v[:3], 0.0, atol=1e-12)  # mean block exactly zero


def test_encoding_dimension():
    rng = np.random.default_rng(0)
    model = random_gmm(rng, K=5, d=3)
    enc = FisherEncoder(model)
    assert enc.dim == 30
    bag = make_bag("b", rng.normal(size=(4, 3)), 0)
    assert fisher_encode(bag, enc).shape == (30,)


def test_gradients_match_finite_differences(rng):
    for _ in range(10):
        K = int(rng.integers(1, 4))
        d = int(rng.integers(1, 4))
        model = random_gmm(rng, K, d)
        X = rng.normal(size=(int(rng.integers(2, 7)), d)) * 2
        gm, gv = loglik_gradients(model, X)
        fm, fv = finite_diff_gradients(model, X)
        scale_m = max(np.abs(fm).max(), 1e-3)
        scale_v = max(np.abs(fv).max(), 1e-3)
        assert np.all(np.abs(gm - fm) <= 1e-5 * np.maximum(np.abs(fm), 1e-2 * scale_m))
        assert np.all(np.abs(gv - fv) <= 1e-5 * np.maximum(np.abs(fv), 1e-2 * scale_v))


def test_contributions_are_scaled_gradients(rng):
    # the encoder's averaged rows are the loglik gradients times the
    # closed-form Fisher normalizers sigma/sqrt(w) and sigma^2*sqrt(2/w)
    model = random_gmm(rng, K=2, d=3)
    X = rng.normal(size=(5, 3))
    rows = instance_contributions(model, X)
    enc = rows.mean(axis=0)
    gm, gv = loglik_gradients(model, X)
    sd = np.sqrt(model.variances)
    expect_mean = gm * sd / np.sqrt(model.weights)[:, None]
    expect_var = gv * model.variances * np.sqrt(2.0) / np.sqrt(model.weights)[:, None]
    K, d = model.means.shape
    assert np.allclose(enc[: K * d], expect_mean.reshape(-1), rtol=1e-10, atol=1e-12)
    assert np.allclose(enc[K * d:], expect_var.reshape(-1), rtol=1e-10, atol=1e-12)


def test_permutation_invariance(rng):
    model = random_gmm(rng, K=3, d=4)
    feats = rng.normal(size=(8, 4))
    enc = FisherEncoder(model)
    base = fisher_encode(make_bag("b", feats, 1), enc)
    for _ in range(50):
        perm = rng.permutation(8)
        v = fisher_encode(make_bag("b", feats[perm], 1), enc)
        assert np.allclose(v, base, atol=1e-12)


def test_l2_normalization_unit_norm(rng):
    model = random_gmm(rng, K=2, d=3)
    enc = FisherEncoder(model, power_norm=True, l2_norm=True)
    for _ in range(20):
        bag = make_bag("b", rng.normal(size=(5, 3)), 0)
        v = fisher_encode(bag, enc)
        assert abs(np.linalg.norm(v) - 1.0) < 1e-12


def test_zero_vector_left_zero():
    # L2 normalization must pass an all-zero row through untouched
    from stablemil.fisher import finish_encodings

    totals = np.vstack([np.zeros(4), np.ones(4)])
    out = finish_encodings(totals, np.array([2, 2]), power_norm=True, l2_norm=True)
    assert np.all(out[0] == 0.0)
    assert abs(np.linalg.norm(out[1]) - 1.0) < 1e-12


def test_dim_mismatch(rng):
    model = random_gmm(rng, K=2, d=3)
    with pytest.raises(DimMismatch):
        fisher_encode(make_bag("b", rng.normal(size=(2, 4)), 0), FisherEncoder(model))


def test_incremental_sum_bitwise_consistency(rng):
    # the treated-bag fast path relies on sum(rows[:T]) + row == sum(rows[:T+1])
    model = random_gmm(rng, K=2, d=3)
    X = rng.normal(size=(7, 3))
    rows = instance_contributions(model, X)
    assert np.array_equal(
        sum_contribution_rows(rows[:-1]) + rows[-1], sum_contribution_rows(rows)
    )
