"""
DCWS - Data Models
"""

from dcws.models.signals import ABSTAIN, FeatureMatrix, WeakSignalSet, SoftLabelMatrix, LabeledEval
from dcws.models.constraints import BoundVector, ConstraintSystem
from dcws.models.network import Architecture, OutputHead, Mode, LabelModelSpec, LabelModelParams, AdamState
from dcws.models.solver import PriorMode, SolverConfig, EpochRecord, TrainState
from dcws.models.synth import Benchmark, SyntheticSpec, SyntheticBundle
from dcws.models.experiment import (
    Method,
    BoundsSource,
    Representation,
    EndModelLoss,
    DatasetPaths,
    ExperimentConfig,
    TrialMetrics,
    MetricsReport,
)

__all__ = [
    "ABSTAIN",
    "FeatureMatrix",
    "WeakSignalSet",
    "SoftLabelMatrix",
    "LabeledEval",
    "BoundVector",
    "ConstraintSystem",
    "Architecture",
    "OutputHead",
    "Mode",
    "LabelModelSpec",
    "LabelModelParams",
    "AdamState",
    "PriorMode",
    "SolverConfig",
    "EpochRecord",
    "TrainState",
    "Benchmark",
    "SyntheticSpec",
    "SyntheticBundle",
    "Method",
    "BoundsSource",
    "Representation",
    "EndModelLoss",
    "DatasetPaths",
    "ExperimentConfig",
    "TrialMetrics",
    "MetricsReport",
]
