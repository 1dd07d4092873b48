"""Shared reference implementations for the test suite.

Oracles here are deliberately naive (double loops, dense grids) so they
stay independent of the vectorized library code they check.
"""

from __future__ import annotations

import math

import numpy as np

from mwgrad.objectives import GaussianMixtureTarget, ObjectiveSet, QuadraticTarget


def rbf(x, y, bandwidth):
    d = np.asarray(x, dtype=np.float64) - np.asarray(y, dtype=np.float64)
    return math.exp(-float(d @ d) / (2.0 * bandwidth**2))


def svgd_oracle(positions, grads, bandwidth, normalize=True):
    """Double-loop kernel-smoothed estimate; grads has shape (m, K, d)."""
    x = np.asarray(positions, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    m, k, d = g.shape
    h2 = bandwidth**2
    out = np.zeros((m, k, d))
    for i in range(m):
        for kk in range(k):
            smoothed = np.zeros(d)
            repulsion = np.zeros(d)
            for j in range(m):
                kij = rbf(x[i], x[j], bandwidth)
                smoothed += kij * g[j, kk]
                # gradient of the kernel in its second argument
                repulsion += ((x[i] - x[j]) / h2) * kij
            out[i, kk] = smoothed - repulsion
    if normalize:
        out /= m
    return out


def blob_oracle(positions, grads, bandwidth):
    """Double-loop self-normalized estimate; grads has shape (m, K, d)."""
    x = np.asarray(positions, dtype=np.float64)
    g = np.asarray(grads, dtype=np.float64)
    m, k, d = g.shape
    h2 = bandwidth**2
    s = np.array([sum(rbf(x[i], x[l], bandwidth) for l in range(m)) for i in range(m)])
    out = np.zeros((m, k, d))
    for i in range(m):
        entropy = np.zeros(d)
        for j in range(m):
            # gradient of the kernel in its first argument
            g1 = -((x[i] - x[j]) / h2) * rbf(x[i], x[j], bandwidth)
            entropy += g1 / s[j] + g1 / s[i]
        for kk in range(k):
            out[i, kk] = g[i, kk] + entropy
    return out


def random_mixture_objectives(rng, num_objectives, dim):
    """Entropy-bearing mixture targets with random diagonal covariances."""
    targets = []
    for _ in range(num_objectives):
        parts = int(rng.integers(1, 4))
        weights = rng.uniform(0.2, 1.0, size=parts)
        weights /= weights.sum()
        means = rng.normal(scale=2.0, size=(parts, dim))
        covs = np.stack([np.diag(rng.uniform(0.3, 2.0, size=dim)) for _ in range(parts)])
        targets.append(
            GaussianMixtureTarget(weights=weights, means=means, covariances=covs)
        )
    return ObjectiveSet(targets=tuple(targets), include_entropy=True)


def random_quadratic_objectives(rng, num_objectives, dim, min_eig=1.0):
    """Potential-only convex quadratics with eigenvalues >= min_eig."""
    targets = []
    for _ in range(num_objectives):
        q = rng.normal(size=(dim, dim))
        curv = q @ q.T + min_eig * np.eye(dim)
        targets.append(QuadraticTarget(center=rng.normal(size=dim), curvature=curv))
    return ObjectiveSet(targets=tuple(targets), include_entropy=False)


def simplex_grid(k, n):
    """All points with coordinates i/n on the (k-1)-simplex."""
    if k == 1:
        return np.array([[1.0]])
    pts = []

    def rec(prefix, remaining, slots):
        if slots == 1:
            pts.append(prefix + [remaining])
            return
        for i in range(remaining + 1):
            rec(prefix + [i], remaining - i, slots - 1)

    rec([], n, k)
    return np.array(pts, dtype=np.float64) / n


def brute_force_simplex_min(g, levels=3, n=60):
    """Refined grid search for min (1/2) w' G w over the simplex.

    Starts from a global barycentric grid and re-grids a shrinking
    neighborhood of the incumbent; negative coordinates from the local
    grids are projected out by clipping and renormalizing.
    """
    g = np.asarray(g, dtype=np.float64)
    k = g.shape[0]
    base = simplex_grid(k, n)

    def best_of(points):
        vals = 0.5 * np.einsum("pi,ij,pj->p", points, g, points)
        idx = int(np.argmin(vals))
        return points[idx], float(vals[idx])

    w, val = best_of(base)
    radius = 1.0
    for _ in range(levels):
        radius /= 10.0
        local = w[None, :] + radius * (base - 1.0 / k)
        local = np.clip(local, 0.0, None)
        sums = local.sum(axis=1)
        local = local[sums > 0] / sums[sums > 0, None]
        cand_w, cand_val = best_of(np.vstack([local, w[None, :]]))
        if cand_val < val:
            w, val = cand_w, cand_val
    return w, val
