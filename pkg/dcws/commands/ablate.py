"""
DCWS - ablate: run the base configuration and every ablation arm
"""

import argparse

from dcws.commands.common import EXIT_OK, add_experiment_arguments, build_experiment_config, output_dir
from dcws.services.pipeline import emit_ablation, run_ablation


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("ablate", help="Run the ablation study")
    add_experiment_arguments(parser)
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    config = build_experiment_config(args)
    reports = run_ablation(config)
    emit_ablation(reports, output_dir(args), config)
    return EXIT_OK
