"""
regraft - Main Entry Point
"""
import argparse
import logging
import sys
from typing import List, Optional

from src.config import load_config
from src.constants import EXIT_CONFIG_ERROR, EXIT_OK, EXIT_RUNTIME_ERROR
from src.errors import ConfigError, RegraftError
from src.experiment import Experiment
from src.presets import PresetManager

logger = logging.getLogger("regraft")

COMMANDS = ("train-teacher", "distill", "evaluate", "gen-dump", "bounds-check")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="regraft", description="Data-free distillation of regression models")
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        p = sub.add_parser(command)
        p.add_argument("--config", required=True, help="flat key = value config file")
        p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--output", help="output directory (overrides output_dir)")
        verbosity = p.add_mutually_exclusive_group()
        verbosity.add_argument("--verbose", action="store_true")
        verbosity.add_argument("--quiet", action="store_true")
    sub.add_parser("presets", help="list strategy presets")
    return parser


def configure_logging(verbose: bool = False, quiet: bool = False):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s - %(levelname)s - %(message)s", force=True)


def list_presets():
    for preset in PresetManager().get_all_presets():
        settings = ", ".join(f"{key}={value}" for key, value in preset.values.items())
        print(f"{preset.preset_id:18s} {preset.name} [{preset.category}]: {settings}")


def run(argv: Optional[List[str]] = None) -> int:
    """Run one command; returns the process exit code"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG_ERROR

    if args.command == "presets":
        list_presets()
        return EXIT_OK

    configure_logging(args.verbose, args.quiet)
    try:
        config = load_config(args.config, args.overrides)
        experiment = Experiment(config, args.output)
        experiment.setup()
        if args.command == "train-teacher":
            experiment.train_teacher()
        elif args.command == "distill":
            experiment.distill()
        elif args.command == "evaluate":
            print(f"{experiment.evaluate():.17g}")
        elif args.command == "gen-dump":
            experiment.gen_dump()
        else:
            experiment.bounds_check()
    except ConfigError as err:
        logger.error("Config error: %s", err)
        return EXIT_CONFIG_ERROR
    except (RegraftError, OSError) as err:
        logger.error("%s: %s", type(err).__name__, err)
        return EXIT_RUNTIME_ERROR
    return EXIT_OK


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
