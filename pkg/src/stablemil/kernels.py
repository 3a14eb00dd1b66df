"""RBF and linear kernels plus the median-heuristic bandwidth."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family and its bandwidth. kind is "rbf" or "linear"."""

    kind: str = "rbf"
    gamma: float = 1.0

    def __post_init__(self):
        if self.kind not in ("rbf", "linear"):
            raise ValueError(f"unsupported kernel kind {self.kind!r}")
        if self.kind == "rbf" and not self.gamma > 0:
            raise ValueError("gamma must be positive")


def rbf(x, y, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2); 1.0 iff x == y, symmetric, in (0, 1]."""
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape:
        raise DimMismatch(f"shapes {x.shape} and {y.shape} differ")
    diff = x - y
    return float(np.exp(-gamma * np.dot(diff, diff)))


def squared_distances(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    """Pairwise ||x_i - y_j||^2, exact zero for identical rows."""
    X = np.asarray(X, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.shape[1] != Y.shape[1]:
        raise DimMismatch(f"dims {X.shape[1]} and {Y.shape[1]} differ")
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def kernel_matrix(spec: KernelSpec, X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    Y = X if Y is None else Y
    if spec.kind == "linear":
        return np.asarray(X, dtype=np.float64) @ np.asarray(Y, dtype=np.float64).T
    return np.exp(-spec.gamma * squared_distances(X, Y))


def median_heuristic_gamma(X: np.ndarray) -> float:
    """1 / median of pairwise squared distances (distinct pairs).

    Falls back to 1.0 when fewer than two points or all points coincide.
    """
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if n < 2:
        return 1.0
    d2 = squared_distances(X, X)
    med = float(np.median(d2[np.triu_indices(n, k=1)]))
    if med <= 0:
        return 1.0
    return 1.0 / med
