"""Simplex-constrained quadratic program for the objective weights.

Each iteration minimizes (1/2) w' G w over the probability simplex, where
G is the Gram matrix of the per-objective direction estimates.  K=1 and
K=2 have closed forms; K>=3 uses Frank-Wolfe with exact line search,
which is dependency-free and certifies optimality through its duality
gap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .core import SimplexWeights, frozen_array
from .estimators import EstimateBatch

_DEFAULT_TOL = 1e-10
_DEFAULT_MAX_ITERS = 1000


def _validate_gram(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError("G must be square")
    if not np.all(np.isfinite(g)):
        raise ValueError("G must be finite")
    scale = max(1.0, float(np.max(np.abs(g))))
    if not np.allclose(g, g.T, rtol=0.0, atol=1e-12 * scale):
        raise ValueError("G must be symmetric")
    return g


@dataclass(frozen=True)
class GramMatrix:
    """G_kl = (1/m) sum_i <values[i,k,:], values[i,l,:]>; symmetric PSD."""

    g: np.ndarray

    def __post_init__(self):
        g = frozen_array(_validate_gram(self.g))
        eigmin = float(np.min(np.linalg.eigvalsh(g))) if g.size else 0.0
        scale = max(1.0, float(np.max(np.abs(g)))) if g.size else 1.0
        if eigmin < -1e-10 * scale:
            raise ValueError("G must be positive semidefinite")
        object.__setattr__(self, "g", g)

    @property
    def num_objectives(self) -> int:
        return self.g.shape[0]


def gram_matrix(batch: EstimateBatch) -> GramMatrix:
    """Empirical Gram matrix of the estimate batch, averaged over particles."""
    values = batch.values
    m = values.shape[0]
    g = np.einsum("ikd,ild->kl", values, values) / m
    g = 0.5 * (g + g.T)
    return GramMatrix(g=g)


class QpResult(NamedTuple):
    weights: SimplexWeights
    converged: bool


def _closed_form_two(g: np.ndarray) -> np.ndarray:
    denom = g[0, 0] - 2.0 * g[0, 1] + g[1, 1]
    if abs(denom) < 1e-14:
        w1 = 0.5
    else:
        w1 = float(np.clip((g[1, 1] - g[0, 1]) / denom, 0.0, 1.0))
    return np.array([w1, 1.0 - w1])


def frank_wolfe_simplex(
    g, tol: float = _DEFAULT_TOL, max_iters: int = _DEFAULT_MAX_ITERS
) -> QpResult:
    """Away-step Frank-Wolfe on the simplex from the uniform start.

    Both linear oracles break ties at the lowest index and the line
    search is exact for the quadratic objective.  Away steps matter:
    plain Frank-Wolfe zig-zags at O(1/n) toward interior optima and
    cannot reach the default gap tolerance within the default iteration
    budget, while the away-step variant converges linearly on
    quadratics.  Terminates when the duality gap
    w' G w - min_k (G w)_k drops to tol.
    """
    g = _validate_gram(np.asarray(g, dtype=np.float64))
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    k = g.shape[0]
    # Scalar loop: K is the objective count (single digits) while the
    # iteration count until the gap closes can reach the hundreds, so
    # per-iteration array overhead would dominate the whole solve.  The
    # running product gw = G w is updated in O(K) per step (a step mixes
    # w with a single vertex), which also gives the quadratic form and
    # the directional curvatures in O(1):
    #   toward vertex t:  d = e_t - w,  d'Gd = G_tt - 2 gw_t + w'Gw
    #   away from a:      d = w - e_a,  d'Gd = w'Gw - 2 gw_a + G_aa
    rows = [[float(v) for v in row] for row in g]
    diag = [rows[j][j] for j in range(k)]
    w = [1.0 / k] * k
    gw = [sum(r) / k for r in rows]
    wgw = sum(w[j] * gw[j] for j in range(k))
    converged = False
    for it in range(max_iters):
        if it & 63 == 63:
            # refresh the running products so rounding drift cannot
            # stall the gap test over long solves
            gw = [sum(rows[i][j] * w[j] for j in range(k)) for i in range(k)]
            wgw = sum(w[j] * gw[j] for j in range(k))
        target = 0
        away = -1
        for j in range(1, k):
            if gw[j] < gw[target]:
                target = j
        for j in range(k):
            if w[j] > 0.0 and (away < 0 or gw[j] > gw[away]):
                away = j
        fw_gap = wgw - gw[target]
        if fw_gap <= tol:
            converged = True
            break
        away_gap = gw[away] - wgw
        if fw_gap >= away_gap or w[away] >= 1.0:
            curvature = diag[target] - 2.0 * gw[target] + wgw
            if curvature <= 0.0:
                gamma = 1.0
            else:
                gamma = min(1.0, fw_gap / curvature)
            gw_t = gw[target]
            keep = 1.0 - gamma
            col = rows[target]
            for j in range(k):
                w[j] = keep * w[j]
                gw[j] = keep * gw[j] + gamma * col[j]
            w[target] += gamma
            wgw = (
                keep * keep * wgw
                + 2.0 * gamma * keep * gw_t
                + gamma * gamma * diag[target]
            )
        else:
            gamma_max = w[away] / (1.0 - w[away])
            curvature = wgw - 2.0 * gw[away] + diag[away]
            if curvature <= 0.0:
                gamma = gamma_max
            else:
                gamma = min(gamma_max, away_gap / curvature)
            gw_a = gw[away]
            grow = 1.0 + gamma
            col = rows[away]
            for j in range(k):
                w[j] = grow * w[j]
                gw[j] = grow * gw[j] - gamma * col[j]
            if gamma == gamma_max:
                w[away] = 0.0
            else:
                w[away] -= gamma
            wgw = (
                grow * grow * wgw
                - 2.0 * gamma * grow * gw_a
                + gamma * gamma * diag[away]
            )
    out = np.maximum(np.array(w, dtype=np.float64), 0.0)
    out = out / out.sum()
    return QpResult(weights=SimplexWeights(w=out), converged=converged)


def solve_simplex_qp(
    gram, tol: float = _DEFAULT_TOL, max_iters: int = _DEFAULT_MAX_ITERS
) -> QpResult:
    """Minimize (1/2) w' G w over the simplex.

    Accepts a GramMatrix or a raw symmetric PSD array.  K=1 returns (1);
    all-zero G returns uniform weights (every w is optimal and uniform is
    deterministic); K=2 uses the closed form with the degenerate-denominator
    guard; K>=3 runs Frank-Wolfe.  The converged flag is False only when
    Frank-Wolfe exhausts max_iters above its gap tolerance.
    """
    g = gram.g if isinstance(gram, GramMatrix) else _validate_gram(gram)
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    k = g.shape[0]
    if k == 1:
        return QpResult(weights=SimplexWeights(w=np.array([1.0])), converged=True)
    if not np.any(g):
        return QpResult(weights=SimplexWeights(w=np.full(k, 1.0 / k)), converged=True)
    if k == 2:
        return QpResult(weights=SimplexWeights(w=_closed_form_two(g)), converged=True)
    return frank_wolfe_simplex(g, tol=tol, max_iters=max_iters)


def qp_objective(gram, weights: SimplexWeights) -> float:
    """(1/2) w' G w, the quantity the solver minimizes."""
    g = gram.g if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=np.float64)
    w = weights.w
    return 0.5 * float(w @ g @ w)


def aggregate_direction(batch: EstimateBatch, weights: SimplexWeights) -> np.ndarray:
    """Row i is sum_k w_k values[i, k, :]; linear in both arguments."""
    if weights.num_objectives != batch.num_objectives:
        raise ValueError("weights and batch disagree on K")
    return np.einsum("ikd,k->id", batch.values, weights.w)
