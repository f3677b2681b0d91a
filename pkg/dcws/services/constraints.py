"""
DCWS - Weak Supervision Error Bounds

Builds the linear system A y <= b from the weak signals and their error
bounds, evaluates constraint violations, and estimates bounds from a small
labeled validation set.
"""

import logging
from typing import Optional, Sequence, Union

import numpy as np

from dcws.errors import AbstainError, DimensionMismatchError
from dcws.models.constraints import BoundVector, ConstraintSystem
from dcws.models.signals import ABSTAIN, LabeledEval, SoftLabelMatrix, WeakSignalSet

logger = logging.getLogger(__name__)


def _as_labels(labels: Union[SoftLabelMatrix, np.ndarray]) -> np.ndarray:
    if isinstance(labels, SoftLabelMatrix):
        return labels.probs
    labels = np.asarray(labels, dtype=float)
    return labels[:, None] if labels.ndim == 1 else labels


# ============================================================================
# ERROR RATES
# ============================================================================

def empirical_error(signal_votes: np.ndarray, class_labels: np.ndarray) -> float:
    """
    Expected one-vs-all error of a signal on the examples it covers:
    (1/n_i) * ((1 - 2q)^T y + q^T 1) over covered entries.
    """
    votes = np.asarray(signal_votes, dtype=float)
    labels = np.asarray(class_labels, dtype=float)
    if votes.shape != labels.shape:
        raise DimensionMismatchError(f"{votes.shape[0]} votes for {labels.shape[0]} labels")
    covered = votes != ABSTAIN
    n_covered = int(covered.sum())
    if n_covered == 0:
        raise AbstainError("signal abstains on every example")
    q = votes[covered]
    y = labels[covered]
    return float(((1.0 - 2.0 * q) @ y + q.sum()) / n_covered)


# ============================================================================
# CONSTRAINT SYSTEM
# ============================================================================

def build_constraint_system(signals: WeakSignalSet, bounds: Optional[BoundVector] = None) -> ConstraintSystem:
    """Rearrange every error bound into a row of A y <= b"""
    if bounds is None:
        bounds = BoundVector.zeros(signals.n_signals)
    if bounds.n_signals != signals.n_signals:
        raise DimensionMismatchError(f"{bounds.n_signals} bounds for {signals.n_signals} signals")

    mask = signals.mask.T
    counts = mask.sum(axis=1)
    if np.any(counts == 0):
        raise AbstainError(f"signals {np.flatnonzero(counts == 0).tolist()} abstain on every example")

    votes = np.where(mask, signals.oriented_votes().T, 0.0)
    rows = np.where(mask, 1.0 - 2.0 * votes, 0.0)
    offsets = counts * bounds.bounds - votes.sum(axis=1)

    return ConstraintSystem(
        rows=rows,
        mask=mask,
        offsets=offsets,
        signal_class=signals.signal_class,
        columns=signals.columns,
        covered_counts=counts,
        n_columns=signals.n_columns,
    )


def constrained_columns(system: ConstraintSystem, labels: np.ndarray) -> np.ndarray:
    """n_examples x n_signals matrix holding, for each row i, labels[:, k_i]"""
    return labels[:, system.columns]


def violations(
    system: ConstraintSystem,
    labels: Union[SoftLabelMatrix, np.ndarray],
    slack: Optional[np.ndarray] = None,
) -> np.ndarray:
    """A_i f[:, k_i] - b_i - xi_i per signal; positive entries are violated constraints"""
    labels = _as_labels(labels)
    if labels.shape[0] != system.n_examples:
        raise DimensionMismatchError(f"{labels.shape[0]} labeled rows for {system.n_examples} examples")
    if labels.shape[1] != system.n_columns:
        raise DimensionMismatchError(f"{labels.shape[1]} label columns for {system.n_columns} expected")
    if slack is None:
        slack = np.zeros(system.n_signals)
    slack = np.asarray(slack, dtype=float)
    if slack.shape != (system.n_signals,):
        raise DimensionMismatchError(f"{slack.shape[0]} slacks for {system.n_signals} signals")
    if np.any(slack < 0.0):
        raise ValueError("slack must be non-negative")

    products = np.einsum("ij,ji->i", system.rows, constrained_columns(system, labels))
    return products - system.offsets - slack


# ============================================================================
# BOUND ESTIMATION
# ============================================================================

def estimate_bounds(
    signals: WeakSignalSet,
    validation: LabeledEval,
    rows: Optional[Sequence[int]] = None,
) -> BoundVector:
    """
    Empirical one-vs-all error of every signal against labeled validation rows.

    `rows` indexes the signal rows the validation labels belong to; all rows
    when omitted. A signal that abstains on every validation row gets bound 0
    and is listed in `defaulted`.
    """
    rows = np.arange(signals.n_examples) if rows is None else np.asarray(rows, dtype=int)
    if rows.shape[0] != validation.n_examples:
        raise DimensionMismatchError(f"{validation.n_examples} validation labels for {rows.shape[0]} rows")

    votes = signals.oriented_votes()[rows]
    bounds = np.zeros(signals.n_signals)
    defaulted = []
    for index in range(signals.n_signals):
        target = signals.positive_class if signals.is_binary else int(signals.signal_class[index])
        try:
            error = empirical_error(votes[:, index], validation.one_vs_all(target))
        except AbstainError:
            logger.warning(f"Signal {index} abstains on every validation row; bound defaults to 0")
            defaulted.append(index)
            continue
        bounds[index] = min(max(error, 0.0), 1.0)

    return BoundVector(bounds=bounds, defaulted=defaulted)
