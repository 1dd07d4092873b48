"""Per-objective update-direction estimates at each particle.

Three estimators produce the m x K x d tensor of directions that the
weight solver aggregates: the SVGD form (kernel-smoothed gradients plus a
kernel-gradient repulsion term), the Blob form (raw gradients plus two
self-normalized kernel-gradient sums approximating the log-density
gradient), and the potential-only form (raw gradients, entropy-free).
All three are dense O(m^2) and exactly reproduce their double-loop
definitions; summation order is fixed so results do not depend on any
parallel schedule.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import ParticleEnsemble, frozen_array
from .kernels import RbfKernel, kernel_matrix
from .objectives import ObjectiveSet, potential_grads_all


class EstimatorTag(enum.Enum):
    SVGD = "svgd"
    BLOB = "blob"
    POTENTIAL_ONLY = "potential_only"


@dataclass(frozen=True)
class EstimateBatch:
    """values[i, k, :] is the estimated direction for particle i, objective k."""

    values: np.ndarray
    estimator_tag: EstimatorTag

    def __post_init__(self):
        values = frozen_array(self.values)
        if values.ndim != 3:
            raise ValueError("values must be an m x K x d tensor")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def num_particles(self) -> int:
        return self.values.shape[0]

    @property
    def num_objectives(self) -> int:
        return self.values.shape[1]

    @property
    def dim(self) -> int:
        return self.values.shape[2]


def _check_inputs(ensemble: ParticleEnsemble, objectives: ObjectiveSet):
    if ensemble.dim != objectives.dim:
        raise ValueError("ensemble and objectives disagree on dimension")


def estimate_svgd(
    ensemble: ParticleEnsemble,
    objectives: ObjectiveSet,
    kernel: RbfKernel,
    normalize: bool = True,
) -> EstimateBatch:
    """Kernel-smoothed KL gradient estimate.

    For each objective k and particle i:
        (1/m) [ sum_j K(x_i, x_j) grad f_k(x_j) - sum_j grad_2 K(x_i, x_j) ]
    where grad_2 differentiates the second argument.  normalize=False
    drops the leading 1/m (the unnormalized variant of the update rule);
    requires entropy-bearing objectives.
    """
    _check_inputs(ensemble, objectives)
    if not objectives.include_entropy:
        raise ValueError("SVGD estimates the KL gradient; objectives must include entropy")
    x = ensemble.positions
    m = ensemble.num_particles
    h2 = kernel.bandwidth**2
    kmat = kernel_matrix(kernel, x)
    grads = potential_grads_all(objectives, x)
    smoothed = np.einsum("ij,jkd->ikd", kmat, grads)
    # sum_j grad_2 K(x_i, x_j) = (x_i * rowsum_i - (K x)_i) / h^2
    repulsion = (x * kmat.sum(axis=1)[:, None] - kmat @ x) / h2
    values = smoothed - repulsion[:, None, :]
    if normalize:
        values = values / m
    return EstimateBatch(values=values, estimator_tag=EstimatorTag.SVGD)


def estimate_blob(
    ensemble: ParticleEnsemble,
    objectives: ObjectiveSet,
    kernel: RbfKernel,
) -> EstimateBatch:
    """Blob estimate of grad f_k + grad log rho at each particle.

    For each objective k and particle i, with s_i = sum_l K(x_i, x_l):
        grad f_k(x_i)
        + sum_j grad_1 K(x_i, x_j) / s_j
        + (1/s_i) sum_j grad_1 K(x_i, x_j)
    where grad_1 differentiates the first argument.  The kernel sums are
    self-normalizing, so there is no 1/m switch; requires entropy-bearing
    objectives.
    """
    _check_inputs(ensemble, objectives)
    if not objectives.include_entropy:
        raise ValueError("Blob estimates the KL gradient; objectives must include entropy")
    x = ensemble.positions
    h2 = kernel.bandwidth**2
    kmat = kernel_matrix(kernel, x)
    s = kmat.sum(axis=1)
    grads = potential_grads_all(objectives, x)
    # grad_1 K(x_i, x_j) = -((x_i - x_j) / h^2) K_ij
    weighted = kmat / s[None, :]
    term_a = (weighted @ x - weighted.sum(axis=1)[:, None] * x) / h2
    term_b = (kmat @ x - s[:, None] * x) / (h2 * s[:, None])
    entropy_part = term_a + term_b
    values = grads + entropy_part[:, None, :]
    return EstimateBatch(values=values, estimator_tag=EstimatorTag.BLOB)


def estimate_potential_only(
    ensemble: ParticleEnsemble, objectives: ObjectiveSet
) -> EstimateBatch:
    """Raw potential gradients; the entropy-free case."""
    _check_inputs(ensemble, objectives)
    if objectives.include_entropy:
        raise ValueError("potential-only estimates require entropy-free objectives")
    values = potential_grads_all(objectives, ensemble.positions)
    return EstimateBatch(values=values, estimator_tag=EstimatorTag.POTENTIAL_ONLY)
