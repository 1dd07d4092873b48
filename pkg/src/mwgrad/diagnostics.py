"""Convergence metrics: the gradient-norm diagnostic, the brute-force
merit function of the single-particle reduction, and rate fitting.

The merit function is only computed in the Euclidean reduction (a Dirac
particle against quadratic potentials), where the inner supremum can be
brute-forced over a grid; the general distributional merit is
intractable and out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import Method, SimplexWeights, frozen_array
from .estimators import EstimateBatch
from .objectives import QuadraticTarget
from .weights import aggregate_direction

_MERIT_CHUNK = 1 << 20


class InsufficientDataError(ValueError):
    """A fit was requested on fewer positive in-window points than allowed."""


@dataclass(frozen=True)
class TrialRecord:
    """Logged series and final state of one seeded trial.

    iterations, grad_norms, and potential_estimates are parallel: row r
    holds iteration iterations[r], the gradient-norm diagnostic computed
    from that iteration's pre-step quantities, and the per-objective mean
    potentials over particles.  diverged_at is the iteration at which the
    divergence guard aborted the run, or None for a clean run.
    """

    method: Method
    step_size: float
    seed: int
    iterations: np.ndarray
    grad_norms: np.ndarray
    potential_estimates: np.ndarray
    final_positions: np.ndarray
    diverged_at: int | None = None

    def __post_init__(self):
        iters = np.array(self.iterations, dtype=np.int64, copy=True)
        iters.setflags(write=False)
        norms = frozen_array(self.grad_norms)
        pots = frozen_array(self.potential_estimates)
        finals = frozen_array(self.final_positions)
        if iters.ndim != 1 or norms.shape != iters.shape:
            raise ValueError("iterations and grad_norms must be parallel vectors")
        if pots.ndim != 2 or pots.shape[0] != iters.size:
            raise ValueError("potential_estimates must have one row per logged iteration")
        if iters.size and np.any(np.diff(iters) <= 0):
            raise ValueError("iterations must be strictly increasing")
        if np.any(norms < 0.0):
            raise ValueError("grad_norms must be nonnegative")
        object.__setattr__(self, "iterations", iters)
        object.__setattr__(self, "grad_norms", norms)
        object.__setattr__(self, "potential_estimates", pots)
        object.__setattr__(self, "final_positions", finals)


def grad_norm(batch: EstimateBatch, weights: SimplexWeights) -> float:
    """(1/m) sum_i || sum_k w_k values[i,k,:] ||^2; zero iff the
    aggregated direction vanishes identically."""
    combined = aggregate_direction(batch, weights)
    return float(np.sum(combined * combined) / combined.shape[0])


def _grid_axes(search_box, grid_resolution: float, dim: int) -> list[np.ndarray]:
    box = np.asarray(search_box, dtype=np.float64)
    if box.ndim == 1:
        box = box[None, :]
    if box.shape != (dim, 2):
        raise ValueError("search_box must supply (lo, hi) per dimension")
    if not (grid_resolution > 0.0):
        raise ValueError("grid_resolution must be positive")
    axes = []
    for lo, hi in box:
        if not hi > lo:
            raise ValueError("each box interval needs hi > lo")
        count = max(2, int(round((hi - lo) / grid_resolution)) + 1)
        axes.append(np.linspace(lo, hi, count))
    return axes


class EuclideanMeritGrid:
    """Reusable brute-force merit oracle over a fixed grid.

    Precomputes the per-objective potentials on the grid when they fit in
    memory (repeated evaluations then cost one pass over the table);
    otherwise walks the grid in chunks per query.
    """

    _PRECOMPUTE_CAP = 8 << 20

    def __init__(
        self,
        objectives: Sequence[QuadraticTarget],
        search_box,
        grid_resolution: float,
    ):
        targets = list(objectives)
        if not targets:
            raise ValueError("need at least one objective")
        dim = targets[0].dim
        axes = _grid_axes(search_box, grid_resolution, dim)
        box = np.asarray(search_box, dtype=np.float64).reshape(dim, 2)
        for target in targets:
            if target.dim != dim:
                raise ValueError("objectives must share one dimension")
            if np.any(target.center < box[:, 0]) or np.any(target.center > box[:, 1]):
                raise ValueError("search_box must contain every objective center")
        self.targets = targets
        self.dim = dim
        self._axes = axes
        total = int(np.prod([a.size for a in axes]))
        self._grid_values = None
        if total * len(targets) <= self._PRECOMPUTE_CAP:
            points = self._chunk_points(axes[0])
            self._grid_values = np.stack(
                [t.value_batch(points) for t in targets], axis=1
            )

    def _chunk_points(self, lead_chunk: np.ndarray) -> np.ndarray:
        grids = np.meshgrid(lead_chunk, *self._axes[1:], indexing="ij")
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def merit(self, x) -> float:
        """max over grid points q of min_k (f_k(x) - f_k(q)), clamped at 0."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.dim,):
            raise ValueError("x must be a vector matching the objectives' dimension")
        return float(self.merit_many(x[None, :])[0])

    def merit_many(self, points) -> np.ndarray:
        """Vectorized merit of a batch of query points, shape (n, dim) -> (n,)."""
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError("points must have shape (n, dim)")
        f_at_x = np.stack([t.value_batch(pts) for t in self.targets], axis=1)
        if self._grid_values is not None:
            out = np.empty(pts.shape[0])
            q_total = self._grid_values.shape[0]
            # bound the (rows x grid) temporary to a few million floats
            rows = max(1, (_MERIT_CHUNK * 8) // max(q_total, 1))
            for start in range(0, pts.shape[0], rows):
                fx = f_at_x[start : start + rows]
                gaps = fx[:, 0, None] - self._grid_values[None, :, 0]
                for k in range(1, len(self.targets)):
                    np.minimum(
                        gaps, fx[:, k, None] - self._grid_values[None, :, k], out=gaps
                    )
                out[start : start + rows] = gaps.max(axis=1)
            return np.maximum(out, 0.0)
        return np.array([self._merit_chunked(f_at_x[i]) for i in range(pts.shape[0])])

    def _merit_chunked(self, f_at_x: np.ndarray) -> float:
        best = -np.inf
        lead = self._axes[0]
        tail_total = int(np.prod([a.size for a in self._axes[1:]])) if self.dim > 1 else 1
        rows_per_chunk = max(1, _MERIT_CHUNK // max(tail_total, 1))
        for start in range(0, lead.size, rows_per_chunk):
            points = self._chunk_points(lead[start : start + rows_per_chunk])
            gaps = np.full(points.shape[0], np.inf)
            for k, target in enumerate(self.targets):
                np.minimum(gaps, f_at_x[k] - target.value_batch(points), out=gaps)
            best = max(best, float(gaps.max()))
        return max(best, 0.0)


def merit_euclidean(
    x,
    objectives: Sequence[QuadraticTarget],
    search_box,
    grid_resolution: float,
) -> float:
    """max over grid points q of min_k (f_k(x) - f_k(q)), clamped at 0.

    Accurate to O(grid_resolution * max gradient over the box).  The box
    must contain every objective's center, otherwise the grid cannot see
    the minimizers and the value would be meaningless.
    """
    return EuclideanMeritGrid(objectives, search_box, grid_resolution).merit(x)


def _window_points(series, window, need_log_t: bool) -> tuple[np.ndarray, np.ndarray]:
    arr = np.asarray(series, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("series must be a sequence of (t, value) pairs")
    t_lo, t_hi = float(window[0]), float(window[1])
    if not t_hi > t_lo:
        raise ValueError("window must satisfy t_hi > t_lo")
    t, v = arr[:, 0], arr[:, 1]
    mask = (t >= t_lo) & (t <= t_hi) & (v > 0.0)
    if need_log_t:
        mask &= t > 0.0
    t, v = t[mask], v[mask]
    if t.size < 10:
        raise InsufficientDataError(
            f"need >= 10 positive points in the window, found {t.size}"
        )
    return t, v


def fit_rate_slope(series, window) -> float:
    """Least-squares slope of log(value) against log(t) over the window."""
    t, v = _window_points(series, window, need_log_t=True)
    design = np.stack([np.log(t), np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.log(v), rcond=None)
    return float(coef[0])


def fit_exp_rate(series, window) -> float:
    """Least-squares slope of log(value) against t over the window."""
    t, v = _window_points(series, window, need_log_t=False)
    design = np.stack([t, np.ones_like(t)], axis=1)
    coef, *_ = np.linalg.lstsq(design, np.log(v), rcond=None)
    return float(coef[0])
