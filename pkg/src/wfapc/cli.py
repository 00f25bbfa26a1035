"""Command-line entry point.

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import yaml

from . import analysis
from .harness.config import ConfigError, ScenarioConfig
from .harness.metrics import CaseMismatch, RunMetrics, compare_cases, format_comparison
from .harness.simulate import NumericalFailure, run_scenario
from .sysid import IdentificationError, InvalidExperiment, LinearThrustModel, identify

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2


def _simulate(args) -> int:
    config = ScenarioConfig.load(args.config)
    if args.output:
        config.output.directory = args.output
    if not config.output.directory:
        config.output.directory = str(Path("runs") / config.name)
    result = run_scenario(config)
    print(result.metrics.to_json())
    print(f"run written to {config.output.directory}", file=sys.stderr)
    return EXIT_OK


def _identify(args) -> int:
    config = ScenarioConfig.load(args.config)
    out = Path(args.output or config.output.directory or "identification")
    exp, model = identify(config)
    out.mkdir(parents=True, exist_ok=True)
    exp.save(out / "experiment.csv")
    model.save(out / "model.txt")
    print((out / "model.txt").read_text(), end="")
    return EXIT_OK


def _analyze(args) -> int:
    try:
        model = LinearThrustModel.load(args.model)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read model {args.model}: {exc}") from None
    n = args.turbines
    if n < 1:
        raise ConfigError("--turbines must be at least 1")
    try:
        model.a
    except ValueError as exc:
        raise IdentificationError(str(exc)) from None
    if args.sweep:
        verdicts = analysis.sweep(model.a, model.b, args.gain, model.T_s, n,
                                  exhaustive=True if args.exhaustive else None,
                                  samples=args.samples, seed=args.seed)
    else:
        verdicts = analysis.sweep(model.a, model.b, args.gain, model.T_s, n, exhaustive=False, samples=0)[:1]
    report = analysis.format_report(model, args.gain, n, verdicts)
    out = Path(args.output) if args.output else Path(args.model).parent
    out.mkdir(parents=True, exist_ok=True)
    (out / "spectrum.txt").write_text(report)
    analysis.write_eigenvalues(out / "eigenvalues.csv", verdicts)
    print(report, end="")
    return EXIT_OK


def _load_run(directory):
    path = Path(directory)
    try:
        metrics = RunMetrics.from_json((path / "metrics.json").read_text())
        config = yaml.safe_load((path / "config.yaml").read_text())
    except (OSError, ValueError, TypeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read run {directory}: {exc}") from None
    return metrics, config


def _compare(args) -> int:
    ma, ca = _load_run(args.run_a)
    mb, cb = _load_run(args.run_b)
    try:
        report = compare_cases(ma, mb, ca, cb)
    except CaseMismatch as exc:
        raise ConfigError(str(exc)) from None
    if args.json:
        print(json.dumps(report, indent=2))
    else:
        print(format_comparison(report))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wfapc", description="Wind-farm power tracking and thrust balancing simulator")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a farm scenario")
    p.add_argument("config")
    p.add_argument("-o", "--output", help="run directory (overrides output.directory)")
    p.set_defaults(func=_simulate)

    p = sub.add_parser("identify", help="step experiment and first-order thrust fit")
    p.add_argument("config")
    p.add_argument("-o", "--output")
    p.set_defaults(func=_identify)

    p = sub.add_parser("analyze", help="closed-loop spectrum of the thrust loop")
    p.add_argument("model", help="model file written by 'identify'")
    p.add_argument("--sweep", action="store_true", help="check saturation patterns")
    p.add_argument("--exhaustive", action="store_true", help="enumerate all patterns")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--turbines", type=int, default=9)
    p.add_argument("--gain", type=float, default=0.5)
    p.add_argument("-o", "--output")
    p.set_defaults(func=_analyze)

    p = sub.add_parser("compare", help="compare two run directories")
    p.add_argument("run_a")
    p.add_argument("run_b")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InvalidExperiment) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, IdentificationError, analysis.AnalysisError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
