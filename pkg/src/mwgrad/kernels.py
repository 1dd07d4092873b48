"""Gaussian (RBF) kernel: evaluation, gradients, pairwise matrices.

The kernel form is pinned as K(x, y) = exp(-||x - y||^2 / (2 h^2)); every
tolerance downstream assumes this convention.  The median-heuristic
bandwidth is exposed for callers that want it but nothing selects it by
default; the reference experiment uses a fixed bandwidth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RbfKernel:
    bandwidth: float

    def __post_init__(self):
        if not (self.bandwidth > 0.0) or not math.isfinite(self.bandwidth):
            raise ValueError("bandwidth must be positive and finite")


def _check_pair(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("x and y must be vectors of the same dimension")
    return x, y


def kernel_eval(kernel: RbfKernel, x, y) -> float:
    """K(x, y) = exp(-||x - y||^2 / (2 h^2)), in (0, 1], symmetric."""
    x, y = _check_pair(x, y)
    diff = x - y
    return float(np.exp(-diff.dot(diff) / (2.0 * kernel.bandwidth**2)))


def kernel_grad_second(kernel: RbfKernel, x, y) -> np.ndarray:
    """Gradient in the second argument: ((x - y) / h^2) K(x, y).

    Antisymmetric against the first-argument gradient:
    grad_y K(x, y) = -grad_x K(x, y).
    """
    x, y = _check_pair(x, y)
    h2 = kernel.bandwidth**2
    diff = x - y
    return (diff / h2) * np.exp(-diff.dot(diff) / (2.0 * h2))


def pairwise_sq_dists(positions: np.ndarray) -> np.ndarray:
    """m x m matrix of squared Euclidean distances, exact diagonal zeros."""
    x = np.asarray(positions, dtype=np.float64)
    sq = np.sum(x * x, axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def kernel_matrix(kernel: RbfKernel, positions: np.ndarray) -> np.ndarray:
    """m x m matrix K_ij = K(x_i, x_j); unit diagonal."""
    return np.exp(-pairwise_sq_dists(positions) / (2.0 * kernel.bandwidth**2))


def median_bandwidth(positions: np.ndarray) -> float:
    """Median heuristic: h^2 = median pairwise squared distance / (2 log(m+1)).

    Off-diagonal pairs only; requires at least two particles.
    """
    x = np.asarray(positions, dtype=np.float64)
    m = x.shape[0]
    if m < 2:
        raise ValueError("median heuristic needs at least two particles")
    d2 = pairwise_sq_dists(x)
    med = float(np.median(d2[~np.eye(m, dtype=bool)]))
    return math.sqrt(med / (2.0 * math.log(m + 1.0)))
