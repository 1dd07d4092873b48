"""Command line interface.

Subcommands: run (particle experiments), rates (single-particle rate
verification), validate (parse a config and exit), report (render
figures from emitted output).  Exit codes: 0 success, 1 validation
error, 2 runtime divergence in any trial.

--config accepts a filesystem path or the bare name of a bundled config
(toy4.cfg, rate_convex.cfg, rate_strongly_convex.cfg).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .config import ConfigError, ExperimentConfig, load_config, resolve_config_path
from .harness import run_experiment, run_rate_scenario

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DIVERGED = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwgrad",
        description="Multi-objective Wasserstein gradient descent experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a particle experiment")
    run_p.add_argument("--config", required=True, help="config path or bundled name")
    run_p.add_argument("--method", help="restrict to one method from the config")
    run_p.add_argument("--seed", type=int, help="override the base seed")
    run_p.add_argument("--out", help="override output_dir")

    rates_p = sub.add_parser("rates", help="run a rate-verification scenario")
    rates_p.add_argument("--config", required=True, help="config path or bundled name")

    val_p = sub.add_parser("validate", help="parse and validate a config, then exit")
    val_p.add_argument("--config", required=True, help="config path or bundled name")

    rep_p = sub.add_parser("report", help="render figures from emitted output")
    rep_p.add_argument("--config", help="config whose output_dir should be rendered")
    rep_p.add_argument("--in", dest="in_dir", help="output directory to render")
    return parser


def _load(config_arg: str) -> ExperimentConfig:
    return load_config(resolve_config_path(config_arg))


def _apply_overrides(config: ExperimentConfig, args) -> ExperimentConfig:
    updates = {}
    if getattr(args, "method", None):
        if args.method not in config.methods:
            raise ConfigError(
                f"--method {args.method!r} is not among the config methods: "
                + ", ".join(config.methods)
            )
        updates["methods"] = (args.method,)
    if getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be >= 0")
        updates["seed"] = args.seed
    if getattr(args, "out", None):
        updates["output_dir"] = args.out
    return dataclasses.replace(config, **updates) if updates else config


def _cmd_run(args) -> int:
    config = _apply_overrides(_load(args.config), args)
    if config.scenario.is_rate:
        raise ConfigError("this config is a rate scenario; use `mwgrad rates`")
    result = run_experiment(config)
    print(f"wrote {len(result.files)} files under {result.output_dir}")
    if result.any_diverged:
        for method, eta, trial, at in result.diverged_trials():
            print(
                f"diverged: method={method} step_size={eta:g} trial={trial} iteration={at}",
                file=sys.stderr,
            )
        return EXIT_DIVERGED
    return EXIT_OK


def _cmd_rates(args) -> int:
    config = _load(args.config)
    if not config.scenario.is_rate:
        raise ConfigError("this config is not a rate scenario; use `mwgrad run`")
    report = run_rate_scenario(config)
    diverged = False
    for fit in report.fits:
        label = f"{fit.method} eta={fit.step_size:g} [{fit.kind}]"
        if fit.diverged:
            print(f"{label}: diverged")
            diverged = True
        elif fit.slope is not None:
            print(f"{label}: slope {fit.slope:.4f} over {fit.window_points} points")
        elif fit.converged_before_window:
            last = "never positive" if fit.last_positive_t is None else f"last positive merit at t={fit.last_positive_t:.3f}"
            print(f"{label}: converged before window ({last})")
        else:
            print(f"{label}: insufficient data in window")
    print(f"wrote {len(report.files)} files under {report.output_dir}")
    return EXIT_DIVERGED if diverged else EXIT_OK


def _cmd_validate(args) -> int:
    config = _load(args.config)
    print(
        "config OK: scenario={} methods={} step_sizes={}".format(
            config.scenario.value,
            ",".join(config.methods),
            ",".join(f"{s:g}" for s in config.step_sizes),
        )
    )
    return EXIT_OK


def _cmd_report(args) -> int:
    from .report import render_all

    if bool(args.config) == bool(args.in_dir):
        raise ConfigError("report needs exactly one of --config or --in")
    if args.config:
        out_dir = _load(args.config).output_dir
    else:
        out_dir = args.in_dir
    figures = render_all(out_dir)
    if not figures:
        raise ConfigError(f"nothing to render under {out_dir}")
    for path in figures:
        print(f"wrote {path}")
    return EXIT_OK


_COMMANDS = {
    "run": _cmd_run,
    "rates": _cmd_rates,
    "validate": _cmd_validate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
