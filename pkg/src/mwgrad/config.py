"""Experiment configuration: a flat key = value document, strictly parsed.

Format: one `key = value` per line, `#` starts a comment, commas separate
list items.  Unknown keys, duplicate keys, and malformed lines are
rejected with their line number; constraint violations name the field.
The scenario key decides which other keys apply and which defaults kick
in (docs/config.md holds the full schema).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

from .core import MomentumSchedule, Regime
from .objectives import (
    OBJECTIVE_REGISTRY,
    ObjectiveSet,
    QuadraticTarget,
)

import numpy as np

_METHOD_NAMES = ("mwgrad_svgd", "mwgrad_blob", "amwgrad_svgd", "amwgrad_blob")
_RATE_METHOD_NAMES = ("mwgrad", "amwgrad")
_MASK64 = (1 << 64) - 1


class Scenario(enum.Enum):
    TOY4 = "toy4"
    RATE_CONVEX = "rate_convex"
    RATE_STRONGLY_CONVEX = "rate_strongly_convex"
    CUSTOM = "custom"

    @property
    def is_rate(self) -> bool:
        return self in (Scenario.RATE_CONVEX, Scenario.RATE_STRONGLY_CONVEX)


class ConfigError(ValueError):
    """Raised for parse errors (with line numbers) and invalid field values."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    methods holds config-level method names: the four estimator methods
    for the run scenarios, or the plain/accelerated pair for the rate
    scenarios (which always use the potential-only estimator).
    """

    scenario: Scenario
    methods: tuple[str, ...]
    num_particles: int
    dim: int
    iterations: int
    num_trials: int
    step_sizes: tuple[float, ...]
    seed: int
    bandwidth: float
    log_stride: int
    snapshot_stride: int
    timings: bool
    output_dir: str
    schedule: MomentumSchedule
    objectives: ObjectiveSet
    x0: float
    fit_window: tuple[float, float]
    merit_box: tuple[float, float]
    merit_resolution: float


def _parse_lines(text: str) -> dict[str, tuple[str, int]]:
    entries: dict[str, tuple[str, int]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in entries:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        entries[key] = (value, lineno)
    return entries


class _Reader:
    """Typed access over the raw entries; tracks consumed keys."""

    def __init__(self, entries: dict[str, tuple[str, int]]):
        self.entries = entries
        self.consumed: set[str] = set()

    def _raw(self, key: str) -> tuple[str, int] | None:
        if key in self.entries:
            self.consumed.add(key)
            return self.entries[key]
        return None

    def has(self, key: str) -> bool:
        return key in self.entries

    def string(self, key: str, default: str | None = None) -> str | None:
        raw = self._raw(key)
        return raw[0] if raw else default

    def integer(self, key: str, default: int | None = None) -> int | None:
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            return int(raw[0])
        except ValueError:
            raise ConfigError(f"line {raw[1]}: key {key!r} must be an integer") from None

    def real(self, key: str, default: float | None = None) -> float | None:
        raw = self._raw(key)
        if raw is None:
            return default
        try:
            value = float(raw[0])
        except ValueError:
            raise ConfigError(f"line {raw[1]}: key {key!r} must be a number") from None
        if not math.isfinite(value):
            raise ConfigError(f"line {raw[1]}: key {key!r} must be finite")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        raw = self._raw(key)
        if raw is None:
            return default
        lowered = raw[0].lower()
        if lowered in ("true", "yes", "1"):
            return True
        if lowered in ("false", "no", "0"):
            return False
        raise ConfigError(f"line {raw[1]}: key {key!r} must be true or false")

    def real_list(self, key: str, default: tuple[float, ...] | None = None):
        raw = self._raw(key)
        if raw is None:
            return default
        items = [item.strip() for item in raw[0].split(",") if item.strip()]
        if not items:
            raise ConfigError(f"line {raw[1]}: key {key!r} must list numbers")
        try:
            values = tuple(float(item) for item in items)
        except ValueError:
            raise ConfigError(f"line {raw[1]}: key {key!r} must list numbers") from None
        if any(not math.isfinite(v) for v in values):
            raise ConfigError(f"line {raw[1]}: key {key!r} must list finite numbers")
        return values

    def string_list(self, key: str, default: tuple[str, ...] | None = None):
        raw = self._raw(key)
        if raw is None:
            return default
        items = tuple(item.strip() for item in raw[0].split(",") if item.strip())
        if not items:
            raise ConfigError(f"line {raw[1]}: key {key!r} must list values")
        return items

    def reject_unconsumed(self):
        for key, (_, lineno) in self.entries.items():
            if key not in self.consumed:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")


def _pair(values, key: str) -> tuple[float, float]:
    if values is None or len(values) != 2:
        raise ConfigError(f"{key} must be two comma-separated numbers")
    return float(values[0]), float(values[1])


def _rate_objectives() -> ObjectiveSet:
    """The built-in rate instance: two 1-D unit quadratics at centers -1, 1."""
    eye = np.array([[1.0]])
    return ObjectiveSet(
        targets=(
            QuadraticTarget(center=np.array([-1.0]), curvature=eye),
            QuadraticTarget(center=np.array([1.0]), curvature=eye),
        ),
        include_entropy=False,
    )


def _custom_objectives(reader: _Reader) -> tuple[ObjectiveSet, int]:
    kind = reader.string("objectives")
    if kind is None:
        raise ConfigError("custom scenario requires the objectives key")
    if kind in OBJECTIVE_REGISTRY:
        objectives = OBJECTIVE_REGISTRY[kind]()
        return objectives, objectives.dim
    if kind != "quadratics":
        known = ", ".join(sorted(OBJECTIVE_REGISTRY))
        raise ConfigError(f"objectives must be one of: {known}, quadratics")
    raw = reader.string("quadratic_centers")
    if raw is None:
        raise ConfigError("objectives = quadratics requires quadratic_centers")
    centers = []
    for chunk in raw.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        try:
            centers.append([float(item) for item in chunk.split(",")])
        except ValueError:
            raise ConfigError("quadratic_centers must be ; separated numeric vectors") from None
    if not centers:
        raise ConfigError("quadratic_centers must name at least one center")
    dim = len(centers[0])
    if any(len(c) != dim for c in centers):
        raise ConfigError("quadratic_centers must share one dimension")
    eye = np.eye(dim)
    targets = tuple(
        QuadraticTarget(center=np.array(c), curvature=eye) for c in centers
    )
    return ObjectiveSet(targets=targets, include_entropy=True), dim


def _check_methods(methods, allowed, label):
    for name in methods:
        if name not in allowed:
            raise ConfigError(f"methods for {label} must come from: {', '.join(allowed)}")
    if len(set(methods)) != len(methods):
        raise ConfigError("methods must not repeat")


def load_config(path) -> ExperimentConfig:
    """Parse and validate a config file into an ExperimentConfig."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    reader = _Reader(_parse_lines(text))

    scenario_name = reader.string("scenario")
    if scenario_name is None:
        raise ConfigError("missing required key scenario")
    try:
        scenario = Scenario(scenario_name)
    except ValueError:
        names = ", ".join(s.value for s in Scenario)
        raise ConfigError(f"scenario must be one of: {names}") from None

    step_sizes = reader.real_list("step_sizes")
    if step_sizes is None:
        raise ConfigError("missing required key step_sizes")
    if any(not (s > 0.0) for s in step_sizes):
        raise ConfigError("step_sizes must be positive")

    output_dir = reader.string("output_dir")
    if output_dir is None:
        raise ConfigError("missing required key output_dir")

    seed = reader.integer("seed", 0)
    if not (0 <= seed <= _MASK64):
        raise ConfigError("seed must be a 64-bit unsigned integer")
    log_stride = reader.integer("log_stride", 1)
    if log_stride < 1:
        raise ConfigError("log_stride must be >= 1")
    snapshot_stride = reader.integer("snapshot_stride", 0)
    if snapshot_stride < 0:
        raise ConfigError("snapshot_stride must be >= 0")
    timings = reader.boolean("timings", False)
    bandwidth = reader.real("bandwidth", 1.0)
    if not (bandwidth > 0.0):
        raise ConfigError("bandwidth must be positive")

    schedule_name = reader.string("schedule")
    beta = reader.real("beta")

    if scenario.is_rate:
        methods = reader.string_list("methods", _RATE_METHOD_NAMES)
        _check_methods(methods, _RATE_METHOD_NAMES, scenario.value)
        num_particles = reader.integer("num_particles", 1)
        if num_particles != 1:
            raise ConfigError("rate scenarios are single-particle (num_particles = 1)")
        dim = reader.integer("dim", 1)
        if dim != 1:
            raise ConfigError("rate scenarios are one-dimensional (dim = 1)")
        num_trials = reader.integer("num_trials", 1)
        if num_trials != 1:
            raise ConfigError("rate scenarios are deterministic (num_trials = 1)")
        iterations = reader.integer("iterations", 0)
        objectives = _rate_objectives()
        if scenario is Scenario.RATE_STRONGLY_CONVEX:
            if schedule_name not in (None, "strongly_convex"):
                raise ConfigError("rate_strongly_convex forces schedule = strongly_convex")
            if beta is None:
                raise ConfigError("rate_strongly_convex requires beta")
            if not (beta > 0.0):
                raise ConfigError("beta must be positive")
            schedule = MomentumSchedule(regime=Regime.STRONGLY_CONVEX, beta=beta)
        else:
            if schedule_name not in (None, "convex"):
                raise ConfigError("rate_convex forces schedule = convex")
            if beta is not None:
                raise ConfigError("beta only applies to the strongly convex schedule")
            schedule = MomentumSchedule(regime=Regime.CONVEX)
        x0 = reader.real("x0", 4.0)
        fit_window = _pair(reader.real_list("fit_window", (5.0, 50.0)), "fit_window")
        if not (0.0 < fit_window[0] < fit_window[1]):
            raise ConfigError("fit_window must satisfy 0 < lo < hi")
        merit_box = _pair(reader.real_list("merit_box", (-5.0, 5.0)), "merit_box")
        if not merit_box[0] < merit_box[1]:
            raise ConfigError("merit_box must satisfy lo < hi")
        merit_resolution = reader.real("merit_resolution", 1e-4)
        if not (merit_resolution > 0.0):
            raise ConfigError("merit_resolution must be positive")
    else:
        methods = reader.string_list("methods", _METHOD_NAMES)
        _check_methods(methods, _METHOD_NAMES, scenario.value)
        if scenario is Scenario.TOY4:
            objectives = OBJECTIVE_REGISTRY["toy4"]()
            obj_dim = objectives.dim
            if reader.string("objectives") not in (None, "toy4"):
                raise ConfigError("toy4 scenario fixes objectives = toy4")
        else:
            objectives, obj_dim = _custom_objectives(reader)
        num_particles = reader.integer("num_particles", 50)
        if num_particles < 1:
            raise ConfigError("num_particles must be >= 1")
        dim = reader.integer("dim", obj_dim)
        if dim != obj_dim:
            raise ConfigError(f"dim must match the objectives' dimension ({obj_dim})")
        iterations = reader.integer("iterations", 1000)
        if iterations < 0:
            raise ConfigError("iterations must be >= 0")
        num_trials = reader.integer("num_trials", 1)
        if num_trials < 1:
            raise ConfigError("num_trials must be >= 1")
        if schedule_name in (None, "convex"):
            if beta is not None:
                raise ConfigError("beta only applies to schedule = strongly_convex")
            schedule = MomentumSchedule(regime=Regime.CONVEX)
        elif schedule_name == "strongly_convex":
            if beta is None or not (beta > 0.0):
                raise ConfigError("schedule = strongly_convex requires beta > 0")
            schedule = MomentumSchedule(regime=Regime.STRONGLY_CONVEX, beta=beta)
        else:
            raise ConfigError("schedule must be convex or strongly_convex")
        x0 = 0.0
        fit_window = (5.0, 50.0)
        merit_box = (-5.0, 5.0)
        merit_resolution = 1e-4

    reader.reject_unconsumed()
    return ExperimentConfig(
        scenario=scenario,
        methods=tuple(methods),
        num_particles=num_particles,
        dim=dim,
        iterations=iterations,
        num_trials=num_trials,
        step_sizes=tuple(step_sizes),
        seed=seed,
        bandwidth=bandwidth,
        log_stride=log_stride,
        snapshot_stride=snapshot_stride,
        timings=timings,
        output_dir=output_dir,
        schedule=schedule,
        objectives=objectives,
        x0=x0,
        fit_window=fit_window,
        merit_box=merit_box,
        merit_resolution=merit_resolution,
    )


def config_as_dict(config: ExperimentConfig) -> dict:
    """JSON-ready view of the resolved config (for the output manifest)."""
    schedule = {"regime": config.schedule.regime.value}
    if config.schedule.beta is not None:
        schedule["beta"] = config.schedule.beta
    return {
        "scenario": config.scenario.value,
        "methods": list(config.methods),
        "num_particles": config.num_particles,
        "dim": config.dim,
        "iterations": config.iterations,
        "num_trials": config.num_trials,
        "step_sizes": list(config.step_sizes),
        "seed": config.seed,
        "bandwidth": config.bandwidth,
        "log_stride": config.log_stride,
        "snapshot_stride": config.snapshot_stride,
        "timings": config.timings,
        "output_dir": config.output_dir,
        "schedule": schedule,
        "num_objectives": config.objectives.num_objectives,
        "include_entropy": config.objectives.include_entropy,
        "x0": config.x0,
        "fit_window": list(config.fit_window),
        "merit_box": list(config.merit_box),
        "merit_resolution": config.merit_resolution,
    }


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped inside the package (e.g. "toy4.cfg")."""
    base = Path(__file__).parent / "configs"
    candidate = base / name
    if candidate.suffix != ".cfg":
        candidate = candidate.with_suffix(".cfg")
    return candidate


def resolve_config_path(spec: str) -> Path:
    """Resolve a --config argument: explicit path first, bundled name second."""
    path = Path(spec)
    if path.exists():
        return path
    bundled = bundled_config_path(spec)
    if bundled.exists():
        return bundled
    raise ConfigError(f"config not found: {spec} (no such file or bundled config)")
