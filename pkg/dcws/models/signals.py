"""
DCWS - Dataset, Weak Signal and Soft Label Models
"""

from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# External files mark abstentions with -1; votes live in [0, 1] so the sentinel is unambiguous.
ABSTAIN = -1.0

# Row sums of multiclass soft labels must hit 1 within this tolerance.
ROW_SUM_TOLERANCE = 1e-6


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


# ============================================================================
# FEATURES
# ============================================================================

class FeatureMatrix(BaseModel):
    """Feature descriptors, one row per example"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray = Field(..., description="n_examples x n_features real matrix")

    @field_validator("values", mode="before")
    @classmethod
    def _check_values(cls, value):
        array = np.array(value, dtype=float)
        if array.ndim != 2:
            raise ValueError(f"features must be a 2-d matrix, got {array.ndim} dimensions")
        if array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError(f"features need at least one row and column, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("features contain NaN or infinite entries")
        return _frozen(array)

    @property
    def n_examples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def subset(self, rows: Sequence[int]) -> "FeatureMatrix":
        return FeatureMatrix(values=self.values[np.asarray(rows)])


# ============================================================================
# WEAK SIGNALS
# ============================================================================

class WeakSignalSet(BaseModel):
    """
    Soft one-vs-all votes of every weak signal on every example.

    Binary tasks (n_classes <= 2) share a single label column holding the
    probability of the positive class; a binary signal declared for the
    other class votes on that column as 1 - q.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    votes: np.ndarray = Field(..., description="n_examples x n_signals votes in [0, 1] or ABSTAIN")
    signal_class: np.ndarray = Field(..., description="Class index each signal votes for")
    n_classes: int = Field(2, ge=1, description="Number of classes K")

    @field_validator("votes", mode="before")
    @classmethod
    def _check_votes(cls, value):
        votes = np.array(value, dtype=float)
        if votes.ndim != 2 or votes.shape[0] < 1 or votes.shape[1] < 1:
            raise ValueError(f"votes must be a non-empty 2-d matrix, got shape {votes.shape}")
        if np.isnan(votes).any():
            raise ValueError("votes contain NaN; mark abstentions with -1")
        covered = votes != ABSTAIN
        if np.any((votes[covered] < 0.0) | (votes[covered] > 1.0)):
            raise ValueError("non-abstain votes must lie in [0, 1]")
        return _frozen(votes)

    @field_validator("signal_class", mode="before")
    @classmethod
    def _check_signal_class(cls, value):
        classes = np.array(value)
        if classes.ndim != 1:
            raise ValueError("signal_class must be a vector")
        if classes.size and not np.all(np.equal(np.mod(classes, 1), 0)):
            raise ValueError("signal_class entries must be integers")
        return _frozen(classes.astype(int))

    @model_validator(mode="after")
    def _check_consistency(self):
        if self.signal_class.shape[0] != self.votes.shape[1]:
            raise ValueError(
                f"signal_class has {self.signal_class.shape[0]} entries for {self.votes.shape[1]} signals"
            )
        if np.any((self.signal_class < 0) | (self.signal_class >= self.n_classes)):
            raise ValueError(f"signal_class entries must lie in [0, {self.n_classes - 1}]")
        empty = np.flatnonzero(self.mask.sum(axis=0) == 0)
        if empty.size:
            raise ValueError(f"signals {empty.tolist()} abstain on every example")
        return self

    @property
    def n_examples(self) -> int:
        return self.votes.shape[0]

    @property
    def n_signals(self) -> int:
        return self.votes.shape[1]

    @property
    def is_binary(self) -> bool:
        return self.n_classes <= 2

    @property
    def n_columns(self) -> int:
        return 1 if self.is_binary else self.n_classes

    @property
    def positive_class(self) -> int:
        return self.n_classes - 1

    @property
    def mask(self) -> np.ndarray:
        """True where the signal votes"""
        return self.votes != ABSTAIN

    @property
    def covered_counts(self) -> np.ndarray:
        return self.mask.sum(axis=0)

    @property
    def columns(self) -> np.ndarray:
        """Label column each signal constrains"""
        if self.is_binary:
            return np.zeros(self.n_signals, dtype=int)
        return self.signal_class.copy()

    def oriented_votes(self) -> np.ndarray:
        """Votes expressed on each signal's label column, ABSTAIN preserved"""
        votes = self.votes.copy()
        if self.is_binary:
            flip = self.signal_class != self.positive_class
            mask = self.mask
            votes[:, flip] = np.where(mask[:, flip], 1.0 - votes[:, flip], ABSTAIN)
        return votes

    def subset(self, rows: Sequence[int]) -> "WeakSignalSet":
        return WeakSignalSet(
            votes=self.votes[np.asarray(rows)],
            signal_class=self.signal_class,
            n_classes=self.n_classes,
        )


# ============================================================================
# LABELS
# ============================================================================

class SoftLabelMatrix(BaseModel):
    """Probabilistic labels: one column for binary tasks, K columns otherwise"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    probs: np.ndarray = Field(..., description="n_examples x n_columns probabilities")

    @field_validator("probs", mode="before")
    @classmethod
    def _check_probs(cls, value):
        probs = np.array(value, dtype=float)
        if probs.ndim == 1:
            probs = probs[:, None]
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise ValueError(f"soft labels must be a non-empty matrix, got shape {probs.shape}")
        if not np.all(np.isfinite(probs)):
            raise ValueError("soft labels contain NaN or infinite entries")
        if np.any((probs < -1e-12) | (probs > 1.0 + 1e-12)):
            raise ValueError("soft labels must lie in [0, 1]")
        probs = np.clip(probs, 0.0, 1.0)
        if probs.shape[1] > 1:
            worst = np.max(np.abs(probs.sum(axis=1) - 1.0))
            if worst > ROW_SUM_TOLERANCE:
                raise ValueError(f"multiclass rows must sum to 1, worst deviation {worst:.3g}")
        return _frozen(probs)

    @property
    def n_examples(self) -> int:
        return self.probs.shape[0]

    @property
    def n_columns(self) -> int:
        return self.probs.shape[1]

    @property
    def is_binary(self) -> bool:
        return self.n_columns == 1

    def hard_labels(self) -> np.ndarray:
        """Predicted class per row; a binary probability of exactly 0.5 goes to class 1"""
        if self.is_binary:
            return (self.probs[:, 0] >= 0.5).astype(int)
        return np.argmax(self.probs, axis=1)

    def subset(self, rows: Sequence[int]) -> "SoftLabelMatrix":
        return SoftLabelMatrix(probs=self.probs[np.asarray(rows)])


class LabeledEval(BaseModel):
    """Held-out true labels, used only for metrics and bound estimation"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    true_labels: np.ndarray = Field(..., description="Class index per example")
    n_classes: int = Field(2, ge=1, description="Number of classes K")

    @field_validator("true_labels", mode="before")
    @classmethod
    def _check_labels(cls, value):
        labels = np.array(value)
        if labels.ndim != 1 or labels.size < 1:
            raise ValueError("true_labels must be a non-empty vector")
        if not np.all(np.equal(np.mod(labels, 1), 0)):
            raise ValueError("true_labels must be integer class indices")
        return _frozen(labels.astype(int))

    @model_validator(mode="after")
    def _check_range(self):
        upper = max(self.n_classes, 2) - 1
        if np.any((self.true_labels < 0) | (self.true_labels > upper)):
            raise ValueError(f"true_labels must lie in [0, {upper}]")
        return self

    @property
    def n_examples(self) -> int:
        return self.true_labels.shape[0]

    def one_vs_all(self, label_class: int) -> np.ndarray:
        return (self.true_labels == label_class).astype(float)

    def subset(self, rows: Sequence[int]) -> "LabeledEval":
        return LabeledEval(true_labels=self.true_labels[np.asarray(rows)], n_classes=self.n_classes)
