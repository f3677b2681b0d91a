"""
DCWS - experiment: run one configuration over several trials
"""

import argparse

from dcws.commands.common import EXIT_OK, add_experiment_arguments, build_experiment_config, output_dir
from dcws.models.experiment import Method
from dcws.services.pipeline import emit_metrics, run_experiment


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("experiment", help="Run a two-stage experiment")
    add_experiment_arguments(parser)
    parser.add_argument("--method", choices=[method.value for method in Method], help="Label method")
    parser.add_argument("--plus", action="store_true", help="DCWS+: fit on every example")
    parser.add_argument("--no-end-model", action="store_true", help="Skip the end model")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    fixed = {}
    if args.method is not None:
        fixed["method"] = args.method
    if args.plus:
        fixed["dcws_plus"] = True
    if args.no_end_model:
        fixed["end_model"] = False
    config = build_experiment_config(args, **fixed)
    report = run_experiment(config)
    emit_metrics(report, output_dir(args), config)
    return EXIT_OK
