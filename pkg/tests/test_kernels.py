import numpy as np
import pytest

from stablemil.errors import DimMismatch
from stablemil.kernels import KernelSpec, kernel_matrix, median_heuristic_gamma, rbf


def test_rbf_zero_distance(rng):
    x = rng.normal(size=7)
    assert rbf(x, x, 2.5) == 1.0


def test_rbf_closed_form():
    assert rbf([0.0], [1.0], 1.0) == pytest.approx(np.exp(-1.0), abs=1e-12)


def test_rbf_symmetry_and_range(rng):
    for _ in range(1000):
        d = int(rng.integers(1, 6))
        x, y = rng.normal(size=d), rng.normal(size=d)
        g = float(rng.uniform(0.1, 5.0))
        v = rbf(x, y, g)
        assert v == rbf(y, x, g)
        assert 0.0 < v <= 1.0


def test_rbf_validation():
    with pytest.raises(DimMismatch):
        rbf([1.0], [1.0, 2.0], 1.0)
    with pytest.raises(ValueError):
        rbf([1.0], [1.0], 0.0)


def test_kernel_spec_validation():
    with pytest.raises(ValueError):
        KernelSpec("poly")
    with pytest.raises(ValueError):
        KernelSpec("rbf", -1.0)
    KernelSpec("linear")  # gamma ignored for linear


def test_kernel_matrix_matches_rbf(rng):
    X = rng.normal(size=(5, 3))
    Y = rng.normal(size=(4, 3))
    K = kernel_matrix(KernelSpec("rbf", 0.7), X, Y)
    for i in range(5):
        for j in range(4):
            assert K[i, j] == pytest.approx(rbf(X[i], Y[j], 0.7), rel=1e-12)
    L = kernel_matrix(KernelSpec("linear"), X, Y)
    assert np.allclose(L, X @ Y.T)


def test_median_heuristic(rng):
    X = rng.normal(size=(20, 4))
    g = median_heuristic_gamma(X)
    d2 = ((X[:, None] - X[None, :]) ** 2).sum(-1)
    med = np.median(d2[np.triu_indices(20, 1)])
    assert g == pytest.approx(1.0 / med)
    assert median_heuristic_gamma(np.zeros((3, 2))) == 1.0
    assert median_heuristic_gamma(np.zeros((1, 2))) == 1.0
