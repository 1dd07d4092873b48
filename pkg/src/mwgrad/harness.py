"""Experiment orchestration and persistence.

run_trial drives one seeded particle run with the exact per-iteration
order: estimate at the current positions, solve the weight program, log
the pre-step diagnostics, then apply the step.  run_experiment fans out
over methods, step sizes, and trials, writing per-trial CSVs, aggregate
CSVs, optional snapshot JSONL, and a deterministic manifest.
run_rate_scenario drives the single-particle reduction and fits the
configured rate law to the merit series.

Everything written by default is byte-identical across runs of the same
config on one platform; opt-in wall-clock timings go to a separate
timings.csv that is documented as the sole non-deterministic output.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, Scenario, config_as_dict
from .core import (
    Method,
    ParticleEnsemble,
    RunConfig,
    derive_trial_seed,
    init_ensemble,
)
from .diagnostics import (
    EuclideanMeritGrid,
    InsufficientDataError,
    TrialRecord,
    fit_exp_rate,
    fit_rate_slope,
    grad_norm,
)
from .dynamics import amwgrad_step, momentum_coefficient, mwgrad_step
from .estimators import estimate_blob, estimate_potential_only, estimate_svgd
from .kernels import RbfKernel
from .objectives import potential_values_all
from .weights import aggregate_direction, gram_matrix, solve_simplex_qp

_DIVERGENCE_LIMIT = 1e8


def _fmt(value: float) -> str:
    """17 significant digits: exact float64 round-trip."""
    return f"{value:.17g}"


def _eta_label(eta: float) -> str:
    return f"eta_{eta:g}"


def _healthy(ensemble: ParticleEnsemble) -> bool:
    for arr in (ensemble.positions, ensemble.velocities):
        if not np.all(np.isfinite(arr)) or np.max(np.abs(arr)) > _DIVERGENCE_LIMIT:
            return False
    return True


def _estimator_for(config: RunConfig):
    kernel = RbfKernel(config.bandwidth)
    if config.method.family == "svgd":
        return lambda ensemble: estimate_svgd(ensemble, config.objectives, kernel)
    return lambda ensemble: estimate_blob(ensemble, config.objectives, kernel)


def run_trial(
    config: RunConfig,
    trial_index: int,
    log_stride: int = 1,
    snapshot_stride: int = 0,
    _snapshots: list | None = None,
) -> TrialRecord:
    """One seeded run of the configured method.

    Deterministic given (config, trial_index); the trial draws its
    initial particles from an independent stream derived from the base
    seed and the trial index.  Rows are logged at every iteration n < T
    with n % log_stride == 0 and always at n = T, each computed from the
    pre-step quantities of that iteration, so the series has
    ceil(T / log_stride) + 1 rows including iteration 0.  If the
    divergence guard trips (non-finite coordinate or magnitude above
    1e8), the run stops and the record carries diverged_at.

    Callers that want position snapshots pass snapshot_stride > 0 and a
    list to collect (iteration, positions) pairs into.
    """
    if log_stride < 1:
        raise ValueError("log_stride must be >= 1")
    estimate = _estimator_for(config)
    ensemble = init_ensemble(
        config.num_particles, config.dim, derive_trial_seed(config.seed, trial_index)
    )
    iterations: list[int] = []
    norms: list[float] = []
    potentials: list[np.ndarray] = []
    diverged_at: int | None = None

    def log_row(n: int, batch, weights):
        iterations.append(n)
        norms.append(grad_norm(batch, weights))
        potentials.append(
            potential_values_all(config.objectives, ensemble.positions).mean(axis=0)
        )

    def snapshot(n: int):
        if _snapshots is not None and snapshot_stride > 0:
            _snapshots.append((n, np.array(ensemble.positions, copy=True)))

    for n in range(config.iterations):
        batch = estimate(ensemble)
        gram = gram_matrix(batch)
        solution = solve_simplex_qp(gram)
        if n % log_stride == 0:
            log_row(n, batch, solution.weights)
        if snapshot_stride > 0 and n % snapshot_stride == 0:
            snapshot(n)
        direction = aggregate_direction(batch, solution.weights)
        if config.method.accelerated:
            alpha = momentum_coefficient(config.schedule, n, config.step_size)
            ensemble = amwgrad_step(ensemble, direction, config.step_size, alpha)
        else:
            ensemble = mwgrad_step(ensemble, direction, config.step_size)
        if not _healthy(ensemble):
            diverged_at = n + 1
            break

    if diverged_at is None:
        batch = estimate(ensemble)
        gram = gram_matrix(batch)
        solution = solve_simplex_qp(gram)
        log_row(config.iterations, batch, solution.weights)
        if snapshot_stride > 0:
            snapshot(config.iterations)

    return TrialRecord(
        method=config.method,
        step_size=config.step_size,
        seed=config.seed,
        iterations=np.array(iterations, dtype=np.int64),
        grad_norms=np.array(norms),
        potential_estimates=np.array(potentials).reshape(len(iterations), -1),
        final_positions=ensemble.positions,
        diverged_at=diverged_at,
    )


def _write_trial_csv(path: Path, record: TrialRecord):
    k = record.potential_estimates.shape[1]
    header = "iter,grad_norm," + ",".join(f"f_{i + 1}" for i in range(k))
    lines = [header]
    for row in range(record.iterations.size):
        cells = [str(int(record.iterations[row])), _fmt(record.grad_norms[row])]
        cells.extend(_fmt(v) for v in record.potential_estimates[row])
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def _write_aggregate_csv(path: Path, records: list[TrialRecord]):
    length = min(r.iterations.size for r in records)
    iters = records[0].iterations[:length]
    stacked = np.stack([r.grad_norms[:length] for r in records], axis=0)
    mean = stacked.mean(axis=0)
    std = (
        stacked.std(axis=0, ddof=1)
        if stacked.shape[0] > 1
        else np.zeros(length)
    )
    lines = ["iter,grad_norm_mean,grad_norm_std"]
    for row in range(length):
        lines.append(
            ",".join([str(int(iters[row])), _fmt(mean[row]), _fmt(std[row])])
        )
    path.write_text("\n".join(lines) + "\n")


def _write_snapshots(path: Path, snapshots: list[tuple[int, np.ndarray]]):
    with path.open("w") as handle:
        for n, positions in snapshots:
            handle.write(
                json.dumps({"iter": n, "positions": positions.tolist()}) + "\n"
            )


def _probe_writable(out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    probe = out_dir / ".write_probe"
    probe.write_text("")
    probe.unlink()


@dataclass(frozen=True)
class ExperimentResult:
    """In-memory view of a finished experiment."""

    output_dir: Path
    records: dict[tuple[str, float], list[TrialRecord]]
    files: tuple[str, ...]

    @property
    def any_diverged(self) -> bool:
        return any(
            r.diverged_at is not None for rs in self.records.values() for r in rs
        )

    def diverged_trials(self) -> list[tuple[str, float, int, int]]:
        out = []
        for (method, eta), rs in sorted(self.records.items()):
            for t, r in enumerate(rs):
                if r.diverged_at is not None:
                    out.append((method, eta, t, r.diverged_at))
        return out


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run methods x step sizes x trials and persist everything.

    Layout under output_dir:
        <method>/eta_<eta>/trial_<t>.csv      per-trial series
        <method>/eta_<eta>/aggregate.csv      mean/std of grad_norm over trials
        <method>/eta_<eta>/snapshots_trial_<t>.jsonl   when snapshot_stride > 0
        manifest.json                          resolved config + file inventory
        timings.csv                            only when timings = true
    """
    if config.scenario.is_rate:
        raise ValueError("run_experiment drives the run scenarios; use run_rate_scenario")
    out_dir = Path(config.output_dir)
    _probe_writable(out_dir)

    records: dict[tuple[str, float], list[TrialRecord]] = {}
    written: list[str] = []
    timing_rows: list[str] = []
    for method_name in config.methods:
        method = Method(method_name)
        for eta in config.step_sizes:
            run_config = RunConfig(
                method=method,
                num_particles=config.num_particles,
                dim=config.dim,
                step_size=eta,
                iterations=config.iterations,
                seed=config.seed,
                bandwidth=config.bandwidth,
                schedule=config.schedule,
                objectives=config.objectives,
            )
            cell_dir = out_dir / method_name / _eta_label(eta)
            cell_dir.mkdir(parents=True, exist_ok=True)
            cell_records = []
            for trial in range(config.num_trials):
                snapshots: list[tuple[int, np.ndarray]] = []
                started = time.perf_counter()
                record = run_trial(
                    run_config,
                    trial,
                    log_stride=config.log_stride,
                    snapshot_stride=config.snapshot_stride,
                    _snapshots=snapshots,
                )
                elapsed = time.perf_counter() - started
                cell_records.append(record)
                trial_path = cell_dir / f"trial_{trial}.csv"
                _write_trial_csv(trial_path, record)
                written.append(str(trial_path.relative_to(out_dir)))
                if config.snapshot_stride > 0:
                    snap_path = cell_dir / f"snapshots_trial_{trial}.jsonl"
                    _write_snapshots(snap_path, snapshots)
                    written.append(str(snap_path.relative_to(out_dir)))
                if config.timings:
                    timing_rows.append(
                        f"{method_name},{eta:g},{trial},{elapsed:.6f}"
                    )
            agg_path = cell_dir / "aggregate.csv"
            _write_aggregate_csv(agg_path, cell_records)
            written.append(str(agg_path.relative_to(out_dir)))
            records[(method_name, eta)] = cell_records

    diverged = {}
    for (method, eta), cell_records in sorted(records.items()):
        for trial, record in enumerate(cell_records):
            if record.diverged_at is not None:
                diverged[f"{method},{_eta_label(eta)},trial_{trial}"] = record.diverged_at
    manifest = {
        "version": __version__,
        "config": config_as_dict(config),
        "files": sorted(written),
        "diverged": diverged,
    }
    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    files = sorted(written + ["manifest.json"])
    if config.timings:
        timings_path = out_dir / "timings.csv"
        timings_path.write_text(
            "\n".join(["method,step_size,trial,seconds"] + timing_rows) + "\n"
        )
        files = sorted(files + ["timings.csv"])
    return ExperimentResult(
        output_dir=out_dir, records=records, files=tuple(files)
    )


@dataclass(frozen=True)
class RateFit:
    """Fit outcome for one (method, step size) cell of a rate scenario.

    Exactly one of slope / converged_before_window / insufficient_data
    describes the outcome: a fitted slope when the window held enough
    positive merit values; converged_before_window when the merit series
    reached exact zero ahead of the window (stronger than any finite
    rate); insufficient_data otherwise.
    """

    method: str
    step_size: float
    kind: str
    slope: float | None
    converged_before_window: bool
    insufficient_data: bool
    window_points: int
    last_positive_t: float | None
    diverged: bool = False


@dataclass(frozen=True)
class RateReport:
    scenario: Scenario
    fits: tuple[RateFit, ...]
    series: dict[tuple[str, float], np.ndarray]
    output_dir: Path
    files: tuple[str, ...]

    def fit_for(self, method: str, step_size: float) -> RateFit:
        for fit in self.fits:
            if fit.method == method and fit.step_size == step_size:
                return fit
        raise KeyError((method, step_size))


def _rate_trajectory(
    config: ExperimentConfig, method: str, eta: float, oracle: EuclideanMeritGrid
) -> tuple[np.ndarray, bool]:
    """Merit-vs-t series for one cell; t = n sqrt(eta) for both schemes.

    Runs until the continuous clock covers the fit window.  Returns the
    series and a divergence flag.
    """
    root = math.sqrt(eta)
    total = int(math.ceil(config.fit_window[1] / root))
    ensemble = ParticleEnsemble(
        positions=np.full((1, 1), config.x0),
        velocities=np.zeros((1, 1)),
        iteration=0,
    )
    points = []
    diverged = False
    for n in range(total + 1):
        points.append(ensemble.positions[0])
        if n == total:
            break
        batch = estimate_potential_only(ensemble, config.objectives)
        solution = solve_simplex_qp(gram_matrix(batch))
        direction = aggregate_direction(batch, solution.weights)
        if method == "amwgrad":
            alpha = momentum_coefficient(config.schedule, n, eta)
            ensemble = amwgrad_step(ensemble, direction, eta, alpha)
        else:
            ensemble = mwgrad_step(ensemble, direction, eta)
        if not _healthy(ensemble):
            diverged = True
            break
    merits = oracle.merit_many(np.stack(points))
    ts = np.arange(len(points)) * root
    return np.stack([ts, merits], axis=1), diverged


def run_rate_scenario(config: ExperimentConfig) -> RateReport:
    """Single-particle rate verification over the configured window.

    The convex scenario fits a log-log slope (power-law rate); the
    strongly convex scenario fits log merit against t (exponential
    rate).  A series that reaches exact zero merit before the window
    opens is reported as converged_before_window instead of a slope.
    Writes merit_<method>_eta_<eta>.csv per cell plus rate_report.json.
    """
    if not config.scenario.is_rate:
        raise ValueError("run_rate_scenario requires a rate scenario config")
    out_dir = Path(config.output_dir)
    _probe_writable(out_dir)
    oracle = EuclideanMeritGrid(
        config.objectives.targets, [config.merit_box], config.merit_resolution
    )
    exponential = config.scenario is Scenario.RATE_STRONGLY_CONVEX
    kind = "exponential" if exponential else "loglog"
    fit_fn = fit_exp_rate if exponential else fit_rate_slope
    window = config.fit_window

    fits: list[RateFit] = []
    series_map: dict[tuple[str, float], np.ndarray] = {}
    written: list[str] = []
    for method in config.methods:
        for eta in config.step_sizes:
            series, diverged = _rate_trajectory(config, method, eta, oracle)
            series_map[(method, eta)] = series
            csv_path = out_dir / f"merit_{method}_{_eta_label(eta)}.csv"
            lines = ["t,merit"]
            lines.extend(f"{_fmt(t)},{_fmt(v)}" for t, v in series)
            csv_path.write_text("\n".join(lines) + "\n")
            written.append(csv_path.name)

            t, v = series[:, 0], series[:, 1]
            in_window = (t >= window[0]) & (t <= window[1]) & (v > 0.0)
            positive = v > 0.0
            last_positive_t = float(t[positive][-1]) if positive.any() else None
            slope = None
            converged = False
            insufficient = False
            if diverged:
                insufficient = True
            else:
                try:
                    slope = fit_fn(series, window)
                except InsufficientDataError:
                    zero_before = (v == 0.0) & (t < window[0])
                    if zero_before.any():
                        converged = True
                    else:
                        insufficient = True
            fits.append(
                RateFit(
                    method=method,
                    step_size=eta,
                    kind=kind,
                    slope=slope,
                    converged_before_window=converged,
                    insufficient_data=insufficient,
                    window_points=int(in_window.sum()),
                    last_positive_t=last_positive_t,
                    diverged=diverged,
                )
            )

    report_payload = {
        "version": __version__,
        "config": config_as_dict(config),
        "fits": [
            {
                "method": f.method,
                "step_size": f.step_size,
                "kind": f.kind,
                "slope": f.slope,
                "converged_before_window": f.converged_before_window,
                "insufficient_data": f.insufficient_data,
                "window_points": f.window_points,
                "last_positive_t": f.last_positive_t,
                "diverged": f.diverged,
            }
            for f in fits
        ],
    }
    report_path = out_dir / "rate_report.json"
    report_path.write_text(json.dumps(report_payload, indent=2, sort_keys=True) + "\n")
    written.append("rate_report.json")
    return RateReport(
        scenario=config.scenario,
        fits=tuple(fits),
        series=series_map,
        output_dir=out_dir,
        files=tuple(sorted(written)),
    )
