"""Command-line interface.

    fedguard run --preset clean [--defense on|off] [--seed N] [--out DIR]
    fedguard run --config experiment.json [--out DIR]
    fedguard validate --config experiment.json

Exit codes: 0 success, 1 configuration/validation failure, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import validate_config, with_defense, with_seed
from .errors import ConfigError, FedGuardError
from .harness import run_experiment
from .presets import PRESET_NAMES, preset

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedguard",
        description="Deterministic federated-averaging simulator with a "
        "clustering-and-reward poisoning defense.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and export metrics")
    run.add_argument("--config", type=Path, help="JSON experiment config file")
    run.add_argument("--preset", choices=PRESET_NAMES, help="built-in scenario")
    run.add_argument("--defense", choices=("on", "off"), help="override the defense toggle")
    run.add_argument("--seed", type=int, help="override the master seed")
    run.add_argument("--out", type=Path, default=Path("out"), help="output directory (default: out)")

    validate = sub.add_parser("validate", help="check a config file and exit")
    validate.add_argument("--config", type=Path, required=True)
    return parser


def _load_config(args: argparse.Namespace):
    if (args.config is None) == (args.preset is None):
        raise ConfigError("exactly one of --config or --preset is required")
    if args.preset is not None:
        cfg = preset(args.preset)
    else:
        try:
            text = args.config.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        cfg = validate_config(text)
    if args.defense is not None:
        cfg = with_defense(cfg, args.defense == "on")
    if args.seed is not None:
        cfg = with_seed(cfg, args.seed)
    return cfg


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "validate":
        try:
            validate_config(args.config.read_text(encoding="utf-8"))
        except (ConfigError, OSError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print("ok")
        return EXIT_OK

    try:
        cfg = _load_config(args)
    except FedGuardError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        trace = run_experiment(cfg, args.out)
    except FedGuardError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    assert trace.final_metrics is not None
    print(
        f"completed {trace.rounds_executed} rounds "
        f"(converged={trace.converged}); final accuracy "
        f"{trace.final_metrics.accuracy:.4f}, loss {trace.final_metrics.loss:.4f}; "
        f"eliminated {list(trace.eliminated)}; outputs in {args.out}"
    )
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
