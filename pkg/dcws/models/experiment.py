"""
DCWS - Experiment Configuration and Metrics Models
"""

import enum
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from dcws.models.network import LabelModelSpec
from dcws.models.solver import SolverConfig
from dcws.models.synth import SyntheticSpec


# ============================================================================
# ENUMS
# ============================================================================

class Method(str, enum.Enum):
    DCWS = "dcws"
    MAJORITY_VOTE = "majority_vote"
    DIRECT = "direct"


class BoundsSource(str, enum.Enum):
    ZERO = "zero"
    FILE = "file"
    VALIDATION = "validation"


class Representation(str, enum.Enum):
    FEATURES = "features"
    CLUSTERS = "clusters"


class EndModelLoss(str, enum.Enum):
    SQUARED = "squared"
    CROSS_ENTROPY = "cross_entropy"


# ============================================================================
# CONFIGURATION
# ============================================================================

class DatasetPaths(BaseModel):
    """Files of a user-supplied dataset"""

    model_config = ConfigDict(frozen=True)

    features: Path = Field(..., description="Training features CSV")
    signals: Path = Field(..., description="Weak-signal CSV, -1 for abstain")
    meta: Path = Field(..., description="Signal metadata JSON")
    labels: Optional[Path] = Field(None, description="Training labels, for label accuracy and validation bounds")
    test_features: Optional[Path] = Field(None, description="Held-out features for the end model")
    test_labels: Optional[Path] = Field(None, description="Held-out labels")

    @model_validator(mode="after")
    def _check_test_pair(self):
        if (self.test_features is None) != (self.test_labels is None):
            raise ValueError("test_features and test_labels go together")
        return self


class ExperimentConfig(BaseModel):
    """One experiment arm: data, label method, solver and end-model settings"""

    model_config = ConfigDict(frozen=True)

    name: str = Field("dcws", description="Arm name used in reports")
    synthetic: Optional[SyntheticSpec] = Field(None, description="Generate data from this spec")
    data: Optional[DatasetPaths] = Field(None, description="Or load it from these files")
    solver: SolverConfig = Field(default_factory=SolverConfig)
    label_model: LabelModelSpec = Field(default_factory=LabelModelSpec)
    method: Method = Field(Method.DCWS, description="How training labels are produced")
    dcws_plus: bool = Field(False, description="Fit on every example, not only covered ones")
    end_model: bool = Field(True, description="Train the end model and report test metrics")
    end_model_epochs: int = Field(200, ge=1)
    end_model_lr: float = Field(0.001, gt=0.0)
    end_model_loss: EndModelLoss = Field(EndModelLoss.SQUARED)
    end_model_covered_only: bool = Field(
        False, description="With dcws_plus, train the end model on covered examples only"
    )
    trials: int = Field(1, ge=1)
    seed: int = Field(0, description="Master seed; every trial derives its seeds from it")
    bounds_source: BoundsSource = Field(BoundsSource.ZERO)
    bounds_path: Optional[Path] = Field(None, description="Bounds CSV when bounds_source is file")
    validation_fraction: float = Field(0.1, gt=0.0, lt=1.0, description="Labeled share used to estimate bounds")
    representation: Representation = Field(Representation.FEATURES)
    n_clusters: int = Field(10, ge=1)
    minibatch_kmeans: bool = Field(False)
    workers: int = Field(1, ge=1, description="Processes for trials and arms")
    output: Optional[Path] = Field(None)

    @model_validator(mode="after")
    def _check_sources(self):
        if (self.synthetic is None) == (self.data is None):
            raise ValueError("give exactly one of a synthetic spec or dataset paths")
        if self.bounds_source == BoundsSource.FILE and self.bounds_path is None:
            raise ValueError("bounds_source=file needs bounds_path")
        if self.bounds_source == BoundsSource.VALIDATION and self.data is not None and self.data.labels is None:
            raise ValueError("bounds_source=validation needs training labels")
        return self

    def echo(self) -> dict:
        """Settings that determine results; run-location fields left out"""
        return self.model_dump(mode="json", exclude={"output", "workers"})


# ============================================================================
# METRICS
# ============================================================================

class TrialMetrics(BaseModel):
    """Outcome of one trial"""

    trial: int = Field(..., ge=0)
    data_seed: int
    data_fingerprint: str
    n_fit_examples: int = Field(..., ge=0)
    label_accuracy: Optional[float] = Field(None, description="On the fit subset; None without training labels")
    label_f1: Optional[float] = None
    test_accuracy: Optional[float] = Field(None, description="None when the end model is off")
    f1: Optional[float] = Field(None, description="Macro F1 of the end model on the test set")
    epochs: int = Field(0, ge=0)
    max_violation: Optional[float] = None
    converged: bool = False
    stalled: bool = False
    diagnostic: Optional[str] = None
    seconds: float = Field(0.0, ge=0.0, description="Wall-clock time")


def _mean_std(values: List[Optional[float]]):
    present = [value for value in values if value is not None]
    if not present:
        return None, None
    return float(np.mean(present)), float(np.std(present))


class MetricsReport(BaseModel):
    """Per-trial metrics with their mean and standard deviation"""

    name: str
    trials: List[TrialMetrics]
    label_accuracy_mean: Optional[float] = None
    label_accuracy_std: Optional[float] = Field(None, ge=0.0)
    label_f1_mean: Optional[float] = None
    label_f1_std: Optional[float] = Field(None, ge=0.0)
    test_accuracy_mean: Optional[float] = None
    test_accuracy_std: Optional[float] = Field(None, ge=0.0)
    f1_mean: Optional[float] = None
    f1_std: Optional[float] = Field(None, ge=0.0)
    epochs_mean: float = 0.0
    max_violation_mean: Optional[float] = None
    seconds: float = Field(0.0, ge=0.0)

    @classmethod
    def aggregate(cls, name: str, trials: List[TrialMetrics]) -> "MetricsReport":
        trials = sorted(trials, key=lambda metrics: metrics.trial)
        label_mean, label_std = _mean_std([t.label_accuracy for t in trials])
        label_f1_mean, label_f1_std = _mean_std([t.label_f1 for t in trials])
        test_mean, test_std = _mean_std([t.test_accuracy for t in trials])
        f1_mean, f1_std = _mean_std([t.f1 for t in trials])
        violation_mean, _ = _mean_std([t.max_violation for t in trials])
        return cls(
            name=name,
            trials=trials,
            label_accuracy_mean=label_mean,
            label_accuracy_std=label_std,
            label_f1_mean=label_f1_mean,
            label_f1_std=label_f1_std,
            test_accuracy_mean=test_mean,
            test_accuracy_std=test_std,
            f1_mean=f1_mean,
            f1_std=f1_std,
            epochs_mean=float(np.mean([t.epochs for t in trials])),
            max_violation_mean=violation_mean,
            seconds=float(sum(t.seconds for t in trials)),
        )
