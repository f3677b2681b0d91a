"""
DCWS - Dataset Files

Readers and writers for the CSV/JSON file formats. Readers follow the
service contract of returning (result, error): error is a readable message
or None, and callers decide how to surface it.
"""

import json
import logging
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError

from dcws.models.constraints import BoundVector
from dcws.models.experiment import DatasetPaths
from dcws.models.signals import FeatureMatrix, LabeledEval, SoftLabelMatrix, WeakSignalSet
from dcws.models.synth import SyntheticBundle

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"

# Names of the files `generate` writes into its output directory.
TRAIN_FEATURES = "train_features.csv"
TRAIN_SIGNALS = "train_signals.csv"
TRAIN_LABELS = "train_labels.csv"
TEST_FEATURES = "test_features.csv"
TEST_LABELS = "test_labels.csv"
META = "meta.json"
MANIFEST = "manifest.json"


class LoadedDataset(BaseModel):
    """A dataset read from files"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    features: FeatureMatrix
    signals: WeakSignalSet
    labels: Optional[LabeledEval] = None
    test_features: Optional[FeatureMatrix] = None
    test_labels: Optional[LabeledEval] = None


# ============================================================================
# READERS
# ============================================================================

def _read_matrix(path: Path, what: str) -> Tuple[Optional[np.ndarray], Optional[str]]:
    path = Path(path)
    if not path.is_file():
        return None, f"{what} file not found: {path}"
    try:
        frame = pd.read_csv(path, header=None, dtype=float)
    except pd.errors.EmptyDataError:
        return None, f"{what} file is empty: {path}"
    except (pd.errors.ParserError, ValueError) as exc:
        return None, f"{what} file {path} is not a numeric CSV: {exc}"
    return frame.to_numpy(), None


def read_features(path: Path) -> Tuple[Optional[FeatureMatrix], Optional[str]]:
    """n rows x d columns of reals, no header"""
    values, error = _read_matrix(path, "Features")
    if error:
        return None, error
    try:
        return FeatureMatrix(values=values), None
    except ValidationError as exc:
        return None, f"Invalid features in {path}: {exc.errors()[0]['msg']}"


def read_meta(path: Path) -> Tuple[Optional[Dict], Optional[str]]:
    """Signal index -> class index, plus n_classes"""
    path = Path(path)
    if not path.is_file():
        return None, f"Metadata file not found: {path}"
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        return None, f"Metadata file {path} is not valid JSON: {exc}"
    if not isinstance(raw, dict) or "n_classes" not in raw:
        return None, f"Metadata file {path} must be an object with an n_classes entry"
    try:
        n_classes = int(raw["n_classes"])
        classes = {int(key): int(value) for key, value in raw.items() if key != "n_classes"}
    except (TypeError, ValueError):
        return None, f"Metadata file {path} must map integer signal indices to integer classes"
    return {"n_classes": n_classes, "signal_class": classes}, None


def read_signals(path: Path, meta_path: Path) -> Tuple[Optional[WeakSignalSet], Optional[str]]:
    """Votes CSV (-1 for abstain) joined with its metadata"""
    votes, error = _read_matrix(path, "Weak-signal")
    if error:
        return None, error
    meta, error = read_meta(meta_path)
    if error:
        return None, error

    classes = meta["signal_class"]
    if sorted(classes) != list(range(votes.shape[1])):
        return None, f"Metadata lists signals {sorted(classes)} but {path} has {votes.shape[1]} columns"
    try:
        signals = WeakSignalSet(
            votes=votes,
            signal_class=[classes[index] for index in range(votes.shape[1])],
            n_classes=meta["n_classes"],
        )
    except ValidationError as exc:
        return None, f"Invalid weak signals in {path}: {exc.errors()[0]['msg']}"
    return signals, None


def read_labels(path: Path, n_classes: int = 2) -> Tuple[Optional[LabeledEval], Optional[str]]:
    """One integer class index per line"""
    values, error = _read_matrix(path, "Labels")
    if error:
        return None, error
    if values.shape[1] != 1:
        return None, f"Labels file {path} must have one column, found {values.shape[1]}"
    column = values[:, 0]
    if not np.all(np.equal(np.mod(column, 1), 0)):
        return None, f"Labels file {path} must hold integer class indices"
    try:
        return LabeledEval(true_labels=column.astype(int), n_classes=n_classes), None
    except ValidationError as exc:
        return None, f"Invalid labels in {path}: {exc.errors()[0]['msg']}"


def read_bounds(path: Path, n_signals: Optional[int] = None) -> Tuple[Optional[BoundVector], Optional[str]]:
    """One non-negative decimal per signal line"""
    values, error = _read_matrix(path, "Bounds")
    if error:
        return None, error
    bounds = values.ravel()
    if n_signals is not None and bounds.shape[0] != n_signals:
        return None, f"Bounds file {path} has {bounds.shape[0]} entries for {n_signals} signals"
    try:
        return BoundVector(bounds=bounds), None
    except ValidationError as exc:
        return None, f"Invalid bounds in {path}: {exc.errors()[0]['msg']}"


def load_dataset(paths: DatasetPaths) -> Tuple[Optional[LoadedDataset], Optional[str]]:
    """Read every file a dataset names and check the row counts agree"""
    features, error = read_features(paths.features)
    if error:
        return None, error
    signals, error = read_signals(paths.signals, paths.meta)
    if error:
        return None, error
    if features.n_examples != signals.n_examples:
        return None, f"{features.n_examples} feature rows but {signals.n_examples} signal rows"

    labels = test_features = test_labels = None
    if paths.labels is not None:
        labels, error = read_labels(paths.labels, signals.n_classes)
        if error:
            return None, error
        if labels.true_labels.shape[0] != features.n_examples:
            return None, f"{labels.true_labels.shape[0]} labels for {features.n_examples} examples"
    if paths.test_features is not None:
        test_features, error = read_features(paths.test_features)
        if error:
            return None, error
        test_labels, error = read_labels(paths.test_labels, signals.n_classes)
        if error:
            return None, error
        if test_features.n_features != features.n_features:
            return None, "test features have a different number of columns than training features"
        if test_labels.true_labels.shape[0] != test_features.n_examples:
            return None, "test labels and test features disagree on the number of examples"

    logger.info(f"Loaded {features.n_examples} examples with {signals.n_signals} signals from {paths.features.parent}")
    dataset = LoadedDataset(
        features=features,
        signals=signals,
        labels=labels,
        test_features=test_features,
        test_labels=test_labels,
    )
    return dataset, None


# ============================================================================
# WRITERS
# ============================================================================

def write_matrix(array: np.ndarray, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    array = np.asarray(array)
    if array.ndim == 1:
        array = array[:, None]
    pd.DataFrame(array).to_csv(path, header=False, index=False, float_format=FLOAT_FORMAT)
    return path


def write_labels(labels: np.ndarray, path: Path) -> Path:
    return write_matrix(np.asarray(labels, dtype=int), path)


def write_soft_labels(labels: SoftLabelMatrix, path: Path) -> Path:
    return write_matrix(labels.probs, path)


def write_meta(signals: WeakSignalSet, path: Path) -> Path:
    meta = {str(index): int(label_class) for index, label_class in enumerate(signals.signal_class)}
    meta["n_classes"] = signals.n_classes
    path = Path(path)
    path.write_text(json.dumps(meta, indent=2) + "\n")
    return path


def write_bundle(bundle: SyntheticBundle, out_dir: Path) -> Path:
    """Write a generated benchmark in the dataset file formats plus a manifest; returns the manifest path"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_matrix(bundle.train_X, out_dir / TRAIN_FEATURES)
    write_matrix(bundle.signals.votes, out_dir / TRAIN_SIGNALS)
    write_labels(bundle.train_truth, out_dir / TRAIN_LABELS)
    write_matrix(bundle.test_X, out_dir / TEST_FEATURES)
    write_labels(bundle.test_truth, out_dir / TEST_LABELS)
    write_meta(bundle.signals, out_dir / META)

    manifest = {
        "spec": bundle.spec.model_dump(mode="json"),
        "error_rates": [float(rate) for rate in bundle.error_rates],
        "signal_coverage": [float(rate) for rate in bundle.signals.mask.mean(axis=0)],
        "global_coverage": bundle.global_coverage(),
        "fingerprint": bundle.fingerprint(),
    }
    manifest_path = out_dir / MANIFEST
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.info(f"Benchmark written to {out_dir}")
    return manifest_path


def bundle_paths(out_dir: Path) -> DatasetPaths:
    """DatasetPaths for a directory written by write_bundle"""
    out_dir = Path(out_dir)
    return DatasetPaths(
        features=out_dir / TRAIN_FEATURES,
        signals=out_dir / TRAIN_SIGNALS,
        meta=out_dir / META,
        labels=out_dir / TRAIN_LABELS,
        test_features=out_dir / TEST_FEATURES,
        test_labels=out_dir / TEST_LABELS,
    )
