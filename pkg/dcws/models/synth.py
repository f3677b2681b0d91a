"""
DCWS - Synthetic Benchmark Models
"""

import enum
import hashlib
from typing import Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from dcws.models.signals import FeatureMatrix, LabeledEval, WeakSignalSet


class Benchmark(str, enum.Enum):
    DEPENDENT = "dependent"
    INDEPENDENT = "independent"


PRESETS = ("dependent", "pinned", "independent")


class SyntheticSpec(BaseModel):
    """Parameters of a synthetic weak-supervision benchmark"""

    model_config = ConfigDict(frozen=True)

    benchmark: Benchmark = Field(Benchmark.DEPENDENT, description="Which generator to run")
    n_train: int = Field(32000, ge=1)
    n_test: int = Field(8000, ge=1)
    n_features: int = Field(200, ge=1)
    feature_agreement_range: Tuple[float, float] = Field(
        (0.55, 0.65), description="Per-feature probability of agreeing with the label"
    )
    n_signals: int = Field(10, ge=1, description="Total weak signals")
    n_copies: int = Field(9, ge=0, description="Noisy copies of the base signal")
    copy_flip_rate: float = Field(0.05, ge=0.0, le=1.0, description="Fraction of base votes each copy flips")
    coverage: float = Field(0.5, gt=0.0, le=1.0, description="Fraction of training examples each signal covers")
    error_range: Tuple[float, float] = Field((0.35, 0.45), description="Allowed realised error of every signal")
    base_error: Optional[float] = Field(
        None, gt=0.0, lt=1.0, description="Pinned target error of the base signal; uniform draw when unset"
    )
    seed: int = Field(0)

    @field_validator("feature_agreement_range", "error_range", mode="before")
    @classmethod
    def _parse_range(cls, value):
        if isinstance(value, str):
            value = [part.strip() for part in value.strip("()[] ").split(",")]
        return value

    @field_validator("base_error", mode="before")
    @classmethod
    def _parse_optional(cls, value):
        if isinstance(value, str) and value.strip().lower() in ("", "none", "null"):
            return None
        return value

    @model_validator(mode="after")
    def _check_ranges(self):
        low, high = self.feature_agreement_range
        if not 0.5 < low <= high < 1.0:
            raise ValueError("feature_agreement_range must satisfy 0.5 < lo <= hi < 1")
        low, high = self.error_range
        if not 0.0 < low <= high < 1.0:
            raise ValueError("error_range must satisfy 0 < lo <= hi < 1")
        if self.n_copies > self.n_signals - 1:
            raise ValueError("n_copies must leave room for the base signal")
        return self

    @classmethod
    def dependent_preset(cls, **overrides) -> "SyntheticSpec":
        """10 signals, 9 of them noisy copies of the first, 50% coverage"""
        settings = {"benchmark": Benchmark.DEPENDENT}
        settings.update(overrides)
        return cls(**settings)

    @classmethod
    def pinned_preset(cls, **overrides) -> "SyntheticSpec":
        """Dependent benchmark with the base error pinned where majority vote scores 0.625"""
        settings = {"base_error": 0.375}
        settings.update(overrides)
        return cls.dependent_preset(**settings)

    @classmethod
    def independent_preset(cls, **overrides) -> "SyntheticSpec":
        """20 independent signals with full coverage"""
        settings = {"benchmark": Benchmark.INDEPENDENT, "n_signals": 20, "n_copies": 0, "coverage": 1.0}
        settings.update(overrides)
        return cls(**settings)

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "SyntheticSpec":
        factories = {
            "dependent": cls.dependent_preset,
            "pinned": cls.pinned_preset,
            "independent": cls.independent_preset,
        }
        if name not in factories:
            raise ValueError(f"Unknown preset {name!r}; choose from {', '.join(PRESETS)}")
        return factories[name](**overrides)


class SyntheticBundle(BaseModel):
    """Generated train/test data with weak signals on the training split"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spec: SyntheticSpec
    train_X: np.ndarray
    train_truth: np.ndarray
    test_X: np.ndarray
    test_truth: np.ndarray
    signals: WeakSignalSet
    error_rates: np.ndarray = Field(..., description="Realised error of each signal on the examples it covers")

    @model_validator(mode="after")
    def _check_shapes(self):
        if self.train_X.shape[0] != self.train_truth.shape[0] or self.signals.n_examples != self.train_truth.shape[0]:
            raise ValueError("training features, truth and signals disagree on the number of examples")
        if self.test_X.shape[0] != self.test_truth.shape[0]:
            raise ValueError("test features and truth disagree on the number of examples")
        if self.error_rates.shape != (self.signals.n_signals,):
            raise ValueError("one error rate per signal expected")
        return self

    @property
    def train_features(self) -> FeatureMatrix:
        return FeatureMatrix(values=self.train_X)

    @property
    def test_features(self) -> FeatureMatrix:
        return FeatureMatrix(values=self.test_X)

    @property
    def train_labels(self) -> LabeledEval:
        return LabeledEval(true_labels=self.train_truth, n_classes=self.signals.n_classes)

    @property
    def test_labels(self) -> LabeledEval:
        return LabeledEval(true_labels=self.test_truth, n_classes=self.signals.n_classes)

    def global_coverage(self) -> float:
        """Fraction of training examples at least one signal covers"""
        return float(self.signals.mask.any(axis=1).mean())

    def fingerprint(self) -> str:
        """sha256 over every generated array"""
        digest = hashlib.sha256()
        for array in (self.train_X, self.train_truth, self.test_X, self.test_truth, self.signals.votes):
            contiguous = np.ascontiguousarray(array)
            digest.update(str(contiguous.shape).encode())
            digest.update(contiguous.tobytes())
        return digest.hexdigest()
