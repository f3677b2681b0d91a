"""
DCWS - Coverage, Priors and Evaluation Metrics
"""

import logging
from typing import Union

import numpy as np
from sklearn.metrics import accuracy_score, f1_score as sklearn_f1_score

from dcws.errors import DimensionMismatchError
from dcws.models.signals import LabeledEval, SoftLabelMatrix, WeakSignalSet

logger = logging.getLogger(__name__)

Truth = Union[LabeledEval, np.ndarray, list]


# ============================================================================
# COVERAGE
# ============================================================================

def coverage(signals: WeakSignalSet) -> np.ndarray:
    """True for every example at least one signal votes on"""
    return signals.mask.any(axis=1)


# ============================================================================
# PRIORS
# ============================================================================

def _tally(votes: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Hard vote per example: 1, 0, or 0.5 on ties and when nobody votes"""
    rounded = np.where(votes > 0.5, 1.0, np.where(votes < 0.5, 0.0, 0.5))
    counts = mask.sum(axis=1)
    totals = np.where(mask, rounded, 0.0).sum(axis=1)
    mean = np.divide(totals, counts, out=np.full(votes.shape[0], 0.5), where=counts > 0)
    return np.where(mean > 0.5, 1.0, np.where(mean < 0.5, 0.0, 0.5))


def majority_vote_prior(signals: WeakSignalSet) -> SoftLabelMatrix:
    """
    Hard majority vote of the weak signals.

    Each covering vote is rounded to 0 or 1 (exactly 0.5 stays neutral), then
    the per-example mean is thresholded at 0.5 with ties going to 0.5. For
    multiclass tasks every class is tallied from its own signals and rows are
    normalised; an all-zero row falls back to uniform.
    """
    votes = signals.oriented_votes()
    mask = signals.mask
    if signals.is_binary:
        return SoftLabelMatrix(probs=_tally(votes, mask)[:, None])

    columns = signals.columns
    tallies = np.empty((signals.n_examples, signals.n_columns))
    for label_class in range(signals.n_columns):
        own = columns == label_class
        tallies[:, label_class] = _tally(votes[:, own], mask[:, own])

    totals = tallies.sum(axis=1, keepdims=True)
    uniform = np.full_like(tallies, 1.0 / signals.n_columns)
    probs = np.divide(tallies, totals, out=uniform, where=totals > 0)
    return SoftLabelMatrix(probs=probs)


def uniform_prior(n_examples: int, n_columns: int) -> SoftLabelMatrix:
    """0.5 everywhere for binary tasks, 1/K everywhere otherwise"""
    if n_examples < 1:
        raise ValueError("uniform prior needs at least one example")
    value = 0.5 if n_columns == 1 else 1.0 / n_columns
    return SoftLabelMatrix(probs=np.full((n_examples, n_columns), value))


# ============================================================================
# METRICS
# ============================================================================

def _true_labels(truth: Truth) -> np.ndarray:
    if isinstance(truth, LabeledEval):
        return truth.true_labels
    return np.asarray(truth).astype(int)


def _predicted_labels(predictions: Union[SoftLabelMatrix, np.ndarray]) -> np.ndarray:
    if not isinstance(predictions, SoftLabelMatrix):
        predictions = SoftLabelMatrix(probs=predictions)
    return predictions.hard_labels()


def accuracy(predictions: Union[SoftLabelMatrix, np.ndarray], truth: Truth) -> float:
    """Fraction of examples whose predicted class matches the truth"""
    predicted = _predicted_labels(predictions)
    actual = _true_labels(truth)
    if predicted.shape[0] != actual.shape[0]:
        raise DimensionMismatchError(
            f"{predicted.shape[0]} predictions for {actual.shape[0]} true labels"
        )
    return float(accuracy_score(actual, predicted))


def f1_score(predictions: Union[SoftLabelMatrix, np.ndarray], truth: Truth) -> float:
    """Macro F1 over the classes present in either the truth or the predictions"""
    actual = _true_labels(truth)
    if actual.size == 0:
        raise ValueError("f1_score needs at least one example")
    predicted = _predicted_labels(predictions)
    if predicted.shape[0] != actual.shape[0]:
        raise DimensionMismatchError(
            f"{predicted.shape[0]} predictions for {actual.shape[0]} true labels"
        )
    return float(sklearn_f1_score(actual, predicted, average="macro", zero_division=0))
