"""Target potentials f_k = -log pi_k with closed-form values and gradients.

Two target families: Gaussian mixtures (log-sum-exp stabilized, component
normalization constants kept so values check against direct density sums)
and convex quadratics (for rate verification).  An ObjectiveSet bundles
the K targets and records whether the entropy term participates, which
selects between KL objectives (kernel estimators) and plain potential
objectives (rate scenarios).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import frozen_array

_LOG_2PI = math.log(2.0 * math.pi)


def _cholesky_spd(matrix: np.ndarray, name: str) -> np.ndarray:
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    try:
        return np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} must be positive definite") from exc


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    mx = np.max(a, axis=axis, keepdims=True)
    out = mx.squeeze(axis) + np.log(np.sum(np.exp(a - mx), axis=axis))
    return out


@dataclass(frozen=True)
class GaussianMixtureTarget:
    """f(x) = -log sum_j gamma_j N(x; mu_j, Sigma_j), weights summing to 1."""

    weights: np.ndarray
    means: np.ndarray
    covariances: np.ndarray

    def __post_init__(self):
        w = frozen_array(self.weights)
        mu = frozen_array(self.means)
        cov = frozen_array(self.covariances)
        if w.ndim != 1 or mu.ndim != 2 or cov.ndim != 3:
            raise ValueError("expected weights (J,), means (J,d), covariances (J,d,d)")
        j, d = mu.shape
        if w.shape != (j,) or cov.shape != (j, d, d):
            raise ValueError("component counts and dimensions must agree")
        if np.any(w <= 0.0):
            raise ValueError("component weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("component weights must sum to 1 within 1e-12")
        precisions = np.empty(cov.shape)
        log_norms = np.empty(j)
        for idx in range(j):
            chol = _cholesky_spd(cov[idx], f"covariance {idx}")
            inv_chol = np.linalg.inv(chol)
            precisions[idx] = inv_chol.T @ inv_chol
            log_det = 2.0 * float(np.sum(np.log(np.diag(chol))))
            log_norms[idx] = math.log(float(w[idx])) - 0.5 * (d * _LOG_2PI + log_det)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        object.__setattr__(self, "_precisions", frozen_array(precisions))
        object.__setattr__(self, "_log_norms", frozen_array(log_norms))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    def _component_logs(self, x: np.ndarray) -> np.ndarray:
        """(n, J) matrix of log(gamma_j N_j(x_i))."""
        diff = x[:, None, :] - self.means[None, :, :]
        quad = np.einsum("njd,jde,nje->nj", diff, self._precisions, diff)
        return self._log_norms[None, :] - 0.5 * quad

    def value_batch(self, x: np.ndarray) -> np.ndarray:
        return -_logsumexp(self._component_logs(x), axis=1)

    def grad_batch(self, x: np.ndarray) -> np.ndarray:
        logs = self._component_logs(x)
        mx = np.max(logs, axis=1, keepdims=True)
        resp = np.exp(logs - mx)
        resp /= np.sum(resp, axis=1, keepdims=True)
        diff = x[:, None, :] - self.means[None, :, :]
        pulls = np.einsum("jde,nje->njd", self._precisions, diff)
        return np.einsum("nj,njd->nd", resp, pulls)

    def responsibilities(self, x: np.ndarray) -> np.ndarray:
        """Posterior component responsibilities, rows summing to 1."""
        logs = self._component_logs(x)
        mx = np.max(logs, axis=1, keepdims=True)
        resp = np.exp(logs - mx)
        return resp / np.sum(resp, axis=1, keepdims=True)


@dataclass(frozen=True)
class QuadraticTarget:
    """f(x) = (1/2) (x - c)' A (x - c) with A symmetric positive definite."""

    center: np.ndarray
    curvature: np.ndarray

    def __post_init__(self):
        c = frozen_array(self.center)
        a = frozen_array(self.curvature)
        if c.ndim != 1:
            raise ValueError("center must be a vector")
        if a.shape != (c.size, c.size):
            raise ValueError("curvature must be d x d")
        _cholesky_spd(a, "curvature")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "curvature", a)

    @property
    def dim(self) -> int:
        return self.center.size

    def value_batch(self, x: np.ndarray) -> np.ndarray:
        diff = x - self.center[None, :]
        return 0.5 * np.einsum("nd,de,ne->n", diff, self.curvature, diff)

    def grad_batch(self, x: np.ndarray) -> np.ndarray:
        return (x - self.center[None, :]) @ self.curvature.T


Target = GaussianMixtureTarget | QuadraticTarget


@dataclass(frozen=True)
class ObjectiveSet:
    """The K target potentials plus the entropy switch.

    include_entropy=True means each objective is a KL divergence to its
    target (estimators must supply the entropy part); False means the
    objectives are plain expected potentials.
    """

    targets: tuple[Target, ...]
    include_entropy: bool = True

    def __post_init__(self):
        targets = tuple(self.targets)
        if len(targets) < 1:
            raise ValueError("need at least one target")
        dims = {t.dim for t in targets}
        if len(dims) != 1:
            raise ValueError("all targets must share one dimension")
        object.__setattr__(self, "targets", targets)

    @property
    def num_objectives(self) -> int:
        return len(self.targets)

    @property
    def dim(self) -> int:
        return self.targets[0].dim


def _as_batch(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    if arr.ndim == 2:
        return arr, False
    raise ValueError("expected a vector or an n x d matrix")


def _check_dim(target: Target, x: np.ndarray):
    if x.shape[1] != target.dim:
        raise ValueError("point dimension does not match target dimension")
    if not np.all(np.isfinite(x)):
        raise ValueError("points must be finite")


def potential_value(target: Target, x) -> float | np.ndarray:
    """f(x); accepts a single point (returns a scalar) or an n x d batch."""
    batch, single = _as_batch(x)
    _check_dim(target, batch)
    values = target.value_batch(batch)
    return float(values[0]) if single else values


def potential_grad(target: Target, x) -> np.ndarray:
    """grad f(x); accepts a single point or an n x d batch."""
    batch, single = _as_batch(x)
    _check_dim(target, batch)
    grads = target.grad_batch(batch)
    return grads[0] if single else grads


def potential_values_all(objectives: ObjectiveSet, x: np.ndarray) -> np.ndarray:
    """(n, K) matrix of f_k(x_i)."""
    batch, _ = _as_batch(x)
    return np.stack([potential_value(t, batch) for t in objectives.targets], axis=1)


def potential_grads_all(objectives: ObjectiveSet, x: np.ndarray) -> np.ndarray:
    """(n, K, d) tensor of grad f_k(x_i)."""
    batch, _ = _as_batch(x)
    return np.stack([potential_grad(t, batch) for t in objectives.targets], axis=1)


def _two_component(mu1, mu2) -> GaussianMixtureTarget:
    dim = len(mu1)
    return GaussianMixtureTarget(
        weights=np.array([0.7, 0.3]),
        means=np.array([mu1, mu2], dtype=np.float64),
        covariances=np.broadcast_to(np.eye(dim), (2, dim, dim)).copy(),
    )


def toy4_objectives() -> ObjectiveSet:
    """The built-in four-target benchmark: 2-D two-component mixtures.

    Each target has component weights (0.7, 0.3) and identity covariances;
    the dominant modes sit at the four corners (+-4, +-4) and the minor
    modes near the origin.
    """
    return ObjectiveSet(
        targets=(
            _two_component((4.0, -4.0), (0.1, 0.2)),
            _two_component((-4.0, 4.0), (-0.1, 0.3)),
            _two_component((-4.0, -4.0), (0.4, -0.4)),
            _two_component((4.0, 4.0), (-0.2, 0.3)),
        ),
        include_entropy=True,
    )


OBJECTIVE_REGISTRY = {"toy4": toy4_objectives}
