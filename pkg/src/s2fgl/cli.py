"""Command-line entry point: ``s2fgl <subcommand> [config] [--key value ...]``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import experiments
from .config import ConfigError, load_config, overrides_from_argv

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2

COMMANDS = {
    "run": lambda cfg: experiments.run_experiment(cfg) and None,
    "sis-curve": experiments.emit_sis_curve,
    "spectral-heatmap": experiments.emit_spectral_heatmap,
    "ablation": experiments.run_ablation,
    "sensitivity": experiments.run_sensitivity,
    "validate-config": lambda cfg: print(cfg.to_text(), end=""),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="s2fgl",
        description="Federated graph learning simulator with prototype distillation and spectral alignment.",
        epilog="Any config key can be overridden with --key value (command line > file > defaults).",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", nargs="?", help="key = value config file")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    verbose = any(a in ("-v", "--verbose") for a in argv)
    argv = [a for a in argv if a not in ("-v", "--verbose")]
    # command and optional config file come first; everything after is --key value overrides
    n_head = 2 if len(argv) > 1 and not argv[1].startswith("--") else 1
    args = build_parser().parse_args(argv[:n_head])
    rest = argv[n_head:]
    logging.basicConfig(level=logging.INFO if verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, overrides_from_argv(rest))
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = COMMANDS[args.command](cfg)
    except Exception as exc:  # noqa: BLE001 - report any failure as a runtime exit code
        print(f"{args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    if result is not None:
        print(result)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
