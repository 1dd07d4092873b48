"""One-step particle updates and the momentum-coefficient schedules.

The plain scheme moves positions against the aggregated direction; the
accelerated scheme advances positions along the velocity field and then
damps and redirects the velocities.  Both consume a direction evaluated
at the input positions; neither uses a look-ahead point.
"""

from __future__ import annotations

import math

import numpy as np

from .core import MomentumSchedule, ParticleEnsemble, Regime


def momentum_coefficient(
    schedule: MomentumSchedule, n: int, step_size: float | None = None
) -> float:
    """alpha_n for iteration n.

    Convex regime: (n - 1) / (n + 2) for n >= 1, and 0 at n = 0 (the
    formula is quoted for n >= 1; the first loop iteration carries no
    momentum anyway since velocities start at zero).  StronglyConvex
    regime: constant (1 - sqrt(beta eta)) / (1 + sqrt(beta eta)), clamped
    to [0, 1); beta * eta >= 1 is rejected rather than clamped below zero.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    if schedule.regime is Regime.CONVEX:
        if n == 0:
            return 0.0
        return (n - 1.0) / (n + 2.0)
    if step_size is None or not (step_size > 0.0):
        raise ValueError("StronglyConvex schedule requires a positive step size")
    product = schedule.beta * step_size
    if product >= 1.0:
        raise ValueError("beta * step_size must be below 1 for the StronglyConvex schedule")
    root = math.sqrt(product)
    alpha = (1.0 - root) / (1.0 + root)
    return min(max(alpha, 0.0), math.nextafter(1.0, 0.0))


def _check_direction(ensemble: ParticleEnsemble, direction: np.ndarray) -> np.ndarray:
    direction = np.asarray(direction, dtype=np.float64)
    if direction.shape != ensemble.positions.shape:
        raise ValueError("direction must match positions in shape")
    return direction


def mwgrad_step(
    ensemble: ParticleEnsemble, direction: np.ndarray, step_size: float
) -> ParticleEnsemble:
    """positions - eta * direction; velocities pass through untouched."""
    direction = _check_direction(ensemble, direction)
    if not (step_size > 0.0):
        raise ValueError("step_size must be positive")
    return ParticleEnsemble(
        positions=ensemble.positions - step_size * direction,
        velocities=ensemble.velocities,
        iteration=ensemble.iteration + 1,
    )


def amwgrad_step(
    ensemble: ParticleEnsemble,
    direction: np.ndarray,
    step_size: float,
    alpha: float,
) -> ParticleEnsemble:
    """Accelerated update with the pre-update velocity.

    positions' = positions + sqrt(eta) * velocities
    velocities' = alpha * velocities - sqrt(eta) * direction

    The direction must have been evaluated at the input positions.
    """
    direction = _check_direction(ensemble, direction)
    if not (step_size > 0.0):
        raise ValueError("step_size must be positive")
    if not (0.0 <= alpha < 1.0):
        raise ValueError("alpha must lie in [0, 1)")
    root = math.sqrt(step_size)
    return ParticleEnsemble(
        positions=ensemble.positions + root * ensemble.velocities,
        velocities=alpha * ensemble.velocities - root * direction,
        iteration=ensemble.iteration + 1,
    )
