"""
DCWS - fit: train a label model on a dataset and write its labels
"""

import argparse
import json
from pathlib import Path

import numpy as np

from dcws.commands.common import EXIT_OK, fail, output_dir, solver_overrides
from dcws.models.network import LabelModelSpec
from dcws.models.solver import PriorMode, SolverConfig
from dcws.services.core import accuracy, coverage, f1_score
from dcws.services.network import save_checkpoint
from dcws.services.pipeline import version_string
from dcws.services.solver import fit_dcws, predict
from dcws.services.storage import read_bounds, read_features, read_labels, read_signals, write_soft_labels

LABELS_FILE = "labels.csv"
MODEL_FILE = "model.npz"
METRICS_FILE = "metrics.json"


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("fit", help="Fit a DCWS label model")
    parser.add_argument("--features", type=Path, required=True, help="Features CSV")
    parser.add_argument("--signals", type=Path, required=True, help="Weak-signal CSV, -1 for abstain")
    parser.add_argument("--meta", type=Path, required=True, help="Signal metadata JSON")
    bounds = parser.add_mutually_exclusive_group()
    bounds.add_argument("--bounds", type=Path, help="Bounds CSV, one per signal")
    bounds.add_argument("--bounds-zero", action="store_true", help="All bounds 0 (the default)")
    parser.add_argument("--plus", action="store_true", help="Fit on every example, covered or not")
    parser.add_argument("--prior", choices=[mode.value for mode in PriorMode], help="Regularisation prior")
    parser.add_argument("--config", type=Path, help="Flat key=value solver/label-model file")
    parser.add_argument("--labels", type=Path, help="True labels CSV, to report label accuracy")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    """Write labels.csv for every example, model.npz and metrics.json"""
    features, error = read_features(args.features)
    if error:
        return fail(error)
    signals, error = read_signals(args.signals, args.meta)
    if error:
        return fail(error)
    if features.n_examples != signals.n_examples:
        return fail(f"{features.n_examples} feature rows but {signals.n_examples} signal rows")
    bounds = None
    if args.bounds is not None:
        bounds, error = read_bounds(args.bounds, signals.n_signals)
        if error:
            return fail(error)
    truth = None
    if args.labels is not None:
        truth, error = read_labels(args.labels, signals.n_classes)
        if error:
            return fail(error)
        if truth.n_examples != features.n_examples:
            return fail(f"{truth.n_examples} labels for {features.n_examples} examples")

    overrides = solver_overrides(args.config)
    if args.prior is not None:
        overrides["solver"]["prior_mode"] = args.prior
    solver = SolverConfig(**overrides["solver"])
    spec = LabelModelSpec(**overrides["label_model"])

    rows = np.arange(signals.n_examples) if args.plus else np.flatnonzero(coverage(signals))
    if rows.size == 0:
        return fail("no weak signal covers any example; use --plus to fit anyway")
    fit_signals = signals.subset(rows)
    labels, state = fit_dcws(features.subset(rows), fit_signals, bounds, spec, solver)

    out = output_dir(args)
    out.mkdir(parents=True, exist_ok=True)
    write_soft_labels(predict(state.params, None, features), out / LABELS_FILE)
    save_checkpoint(state.params, out / MODEL_FILE)

    metrics = {
        "n_examples": signals.n_examples,
        "n_fit_examples": int(rows.size),
        "plus": bool(args.plus),
        "epochs": state.epoch,
        "converged": state.converged,
        "stalled": state.stalled,
        "diagnostic": state.diagnostic,
        "max_violation": state.final_violation,
        "lambdas": state.lambdas.tolist(),
        "slacks": state.slacks.tolist(),
        "label_accuracy": None,
        "label_f1": None,
        "solver": solver.model_dump(mode="json"),
        "label_model": state.params.spec.model_dump(mode="json"),
        "version": version_string(),
    }
    if truth is not None:
        fit_truth = truth.subset(rows)
        metrics["label_accuracy"] = accuracy(labels, fit_truth)
        metrics["label_f1"] = f1_score(labels, fit_truth)
    (out / METRICS_FILE).write_text(json.dumps(metrics, indent=2, sort_keys=True) + "\n")
    return EXIT_OK
