"""
DCWS - eval: score a saved label model against true labels
"""

import argparse
import json
from pathlib import Path

from dcws.commands.common import EXIT_OK, fail
from dcws.services.core import accuracy, f1_score
from dcws.services.network import load_checkpoint
from dcws.services.solver import predict
from dcws.services.storage import read_features, read_labels, write_soft_labels


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("eval", help="Evaluate a label-model checkpoint")
    parser.add_argument("--model", type=Path, required=True, help="Checkpoint written by `fit`")
    parser.add_argument("--features", type=Path, required=True, help="Features CSV")
    parser.add_argument("--labels", type=Path, required=True, help="True labels CSV")
    parser.add_argument("--out", type=Path, help="Also write predictions.csv and metrics.json here")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    """Print accuracy and macro F1 as JSON"""
    params = load_checkpoint(args.model)
    features, error = read_features(args.features)
    if error:
        return fail(error)
    n_classes = max(params.spec.n_outputs, 2)
    labels, error = read_labels(args.labels, n_classes)
    if error:
        return fail(error)
    if labels.n_examples != features.n_examples:
        return fail(f"{labels.n_examples} labels for {features.n_examples} feature rows")

    predictions = predict(params, None, features)
    result = {
        "accuracy": accuracy(predictions, labels),
        "f1": f1_score(predictions, labels),
        "n_examples": features.n_examples,
    }
    document = json.dumps(result, indent=2, sort_keys=True)
    print(document)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        write_soft_labels(predictions, args.out / "predictions.csv")
        (args.out / "metrics.json").write_text(document + "\n")
    return EXIT_OK
