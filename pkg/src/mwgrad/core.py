"""Shared domain types, ensemble initialization, and seeded randomness.

Reproducibility contract: all randomness flows through the Philox
counter-based generator keyed directly by a 64-bit seed, and standard
normals are produced by an explicit Box-Muller transform on Philox
uniforms.  Both choices are part of the public contract so that two runs
(or two independent implementations of the same contract) produce
bit-identical ensembles from equal seeds.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:
    from .objectives import ObjectiveSet

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class Method(enum.Enum):
    """The four particle methods: plain or accelerated, SVGD or Blob."""

    MWGRAD_SVGD = "mwgrad_svgd"
    MWGRAD_BLOB = "mwgrad_blob"
    AMWGRAD_SVGD = "amwgrad_svgd"
    AMWGRAD_BLOB = "amwgrad_blob"

    @property
    def accelerated(self) -> bool:
        return self in (Method.AMWGRAD_SVGD, Method.AMWGRAD_BLOB)

    @property
    def family(self) -> str:
        """Estimator family, "svgd" or "blob"."""
        return "svgd" if self in (Method.MWGRAD_SVGD, Method.AMWGRAD_SVGD) else "blob"


class Regime(enum.Enum):
    CONVEX = "convex"
    STRONGLY_CONVEX = "strongly_convex"


def frozen_array(values, dtype=np.float64) -> np.ndarray:
    """Copy into a C-contiguous read-only float array."""
    arr = np.array(values, dtype=dtype, order="C", copy=True)
    arr.setflags(write=False)
    return arr


def splitmix64(z: int) -> int:
    """One SplitMix64 output step (finalizer of the given state)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_trial_seed(seed: int, trial_index: int) -> int:
    """Independent per-trial stream seed.

    Defined as splitmix64(seed + (trial_index + 1) * golden) with the
    SplitMix64 golden-gamma constant; trial 0 already gets a mixed seed
    so no trial reuses the base stream.
    """
    if trial_index < 0:
        raise ValueError("trial_index must be >= 0")
    return splitmix64(seed + (trial_index + 1) * _GOLDEN)


def _philox_uniforms(seed: int, count: int) -> np.ndarray:
    """53-bit uniforms in [0, 1) from Philox keyed by the bare seed."""
    key = np.array([seed & _MASK64, 0], dtype=np.uint64)
    gen = np.random.Generator(np.random.Philox(key=key))
    return gen.random(count)


def standard_normal(shape: tuple[int, ...], seed: int) -> np.ndarray:
    """Standard normals via Box-Muller on Philox uniforms.

    Uniforms are consumed in pairs (u1, u2) = (u[2j], u[2j+1]); each pair
    yields z0 = sqrt(-2 ln(1 - u1)) cos(2 pi u2) and the sin twin z1.
    The 1 - u1 map sends [0, 1) to (0, 1] so the log is always finite.
    Outputs fill the requested shape row-major in (z0, z1) order.
    """
    n = int(np.prod(shape, dtype=np.int64)) if shape else 1
    pairs = (n + 1) // 2
    u = _philox_uniforms(seed, 2 * pairs)
    u1 = 1.0 - u[0::2]
    u2 = u[1::2]
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.empty(2 * pairs)
    z[0::2] = r * np.cos(2.0 * np.pi * u2)
    z[1::2] = r * np.sin(2.0 * np.pi * u2)
    return z[:n].reshape(shape)


@dataclass(frozen=True)
class ParticleEnsemble:
    """Immutable snapshot of m particles: positions, velocities, iteration.

    Positions empirically represent the current distribution; velocities
    carry the momentum field of the accelerated scheme (identically zero
    for the plain scheme and at initialization).
    """

    positions: np.ndarray
    velocities: np.ndarray
    iteration: int = 0

    def __post_init__(self):
        pos = frozen_array(self.positions)
        vel = frozen_array(self.velocities)
        if pos.ndim != 2:
            raise ValueError("positions must be an m x d matrix")
        if vel.shape != pos.shape:
            raise ValueError("velocities must match positions in shape")
        if self.iteration < 0:
            raise ValueError("iteration must be >= 0")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "velocities", vel)

    @property
    def num_particles(self) -> int:
        return self.positions.shape[0]

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class SimplexWeights:
    """A point of the K-simplex: nonnegative entries summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = frozen_array(self.w)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("w must be a nonempty vector")
        if not np.all(np.isfinite(w)):
            raise ValueError("w must be finite")
        if np.any(w < 0.0):
            raise ValueError("w must be nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise ValueError("w must sum to 1 within 1e-12")
        object.__setattr__(self, "w", w)

    @property
    def num_objectives(self) -> int:
        return self.w.size


@dataclass(frozen=True)
class MomentumSchedule:
    """Momentum regime for the accelerated scheme.

    Convex: alpha_n = (n - 1) / (n + 2).  StronglyConvex: constant
    alpha = (1 - sqrt(beta eta)) / (1 + sqrt(beta eta)) and requires the
    strong-convexity modulus beta.
    """

    regime: Regime
    beta: float | None = None

    def __post_init__(self):
        if self.regime is Regime.STRONGLY_CONVEX:
            if self.beta is None or not (self.beta > 0.0) or not math.isfinite(self.beta):
                raise ValueError("StronglyConvex schedule requires beta > 0")
        elif self.beta is not None:
            raise ValueError("beta only applies to the StronglyConvex regime")


@dataclass(frozen=True)
class RunConfig:
    """Everything one seeded trial needs."""

    method: Method
    num_particles: int
    dim: int
    step_size: float
    iterations: int
    seed: int
    bandwidth: float
    schedule: MomentumSchedule
    objectives: "ObjectiveSet"

    def __post_init__(self):
        if self.num_particles < 1:
            raise ValueError("num_particles must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not (self.step_size > 0.0) or not math.isfinite(self.step_size):
            raise ValueError("step_size must be positive and finite")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not (0 <= self.seed <= _MASK64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if not (self.bandwidth > 0.0) or not math.isfinite(self.bandwidth):
            raise ValueError("bandwidth must be positive and finite")


def init_ensemble(m: int, d: int, seed: int) -> ParticleEnsemble:
    """m i.i.d. standard-normal positions in R^d, zero velocities, iteration 0.

    Bit-identical output for identical (m, d, seed).
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if d < 1:
        raise ValueError("d must be >= 1")
    positions = standard_normal((m, d), seed)
    return ParticleEnsemble(
        positions=positions, velocities=np.zeros((m, d)), iteration=0
    )
