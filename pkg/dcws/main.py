"""
DCWS - Command-Line Entry Point
Data-consistent weak supervision: label models, benchmarks and ablations
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from pydantic import ValidationError

from dcws import __version__
from dcws.commands import ablate, evaluate, experiment, fit, generate
from dcws.commands.common import EXIT_INPUT, EXIT_UNEXPECTED
from dcws.config import get_settings
from dcws.errors import DCWSError

logger = logging.getLogger("dcws")

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


# ============================================================================
# LOGGING
# ============================================================================

def configure_training_log(path: Optional[Path] = None) -> logging.Logger:
    """Route the per-epoch TSV log to a file, or stdout when path is None"""
    training = logging.getLogger("dcws.training")
    for handler in list(training.handlers):
        training.removeHandler(handler)
        handler.close()
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        handler = logging.FileHandler(path, mode="w")
    else:
        handler = logging.StreamHandler(sys.stdout)
    handler.setFormatter(logging.Formatter("%(message)s"))
    training.addHandler(handler)
    training.setLevel(logging.INFO)
    training.propagate = False
    return training


def configure_logging(level: str, training_log: Optional[Path]) -> None:
    logging.basicConfig(level=level.upper(), format=LOG_FORMAT)
    logging.getLogger("dcws").setLevel(level.upper())
    configure_training_log(training_log)


# ============================================================================
# PARSER
# ============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcws",
        description="Data-consistent weak supervision",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", help="Root log level (default from DCWS_LOG_LEVEL)")
    parser.add_argument("--training-log", type=Path, help="Per-epoch TSV log file; stdout when unset")
    subparsers = parser.add_subparsers(dest="command", required=True)

    generate.add_parser(subparsers)
    fit.add_parser(subparsers)
    evaluate.add_parser(subparsers)
    ablate.add_parser(subparsers)
    experiment.add_parser(subparsers)
    return parser


# ============================================================================
# RUN
# ============================================================================

def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    settings = get_settings()
    configure_logging(args.log_level or settings.log_level, args.training_log or settings.training_log)

    try:
        return args.handler(args)
    except (DCWSError, ValidationError, ValueError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        return EXIT_INPUT
    except Exception as exc:
        logger.error(f"{args.command} failed unexpectedly: {exc}")
        logger.debug("Traceback", exc_info=True)
        return EXIT_UNEXPECTED


if __name__ == "__main__":
    sys.exit(main())
