"""
DCWS - Label Model Network Models
"""

import enum
from typing import Callable, List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


# ============================================================================
# ENUMS
# ============================================================================

class Architecture(str, enum.Enum):
    LINEAR = "linear"
    TWO_LAYER = "two_layer"
    MLP = "mlp"


class OutputHead(str, enum.Enum):
    SIGMOID = "sigmoid"
    SOFTMAX = "softmax"


class Mode(str, enum.Enum):
    TRAIN = "train"
    EVAL = "eval"


# ============================================================================
# SPEC
# ============================================================================

class LabelModelSpec(BaseModel):
    """Architecture of the label model f_theta(X)"""

    model_config = ConfigDict(frozen=True)

    architecture: Architecture = Field(Architecture.TWO_LAYER, description="Network family")
    hidden_units: int = Field(512, ge=1, description="Width of each hidden layer")
    n_hidden_layers: int = Field(2, ge=1, description="Hidden layers of the mlp architecture")
    dropout_rate: float = Field(0.2, ge=0.0, lt=1.0, description="Inverted dropout on hidden activations")
    output_head: OutputHead = Field(OutputHead.SIGMOID, description="sigmoid for binary, softmax for multiclass")
    n_outputs: int = Field(1, ge=1, description="1 for binary, K for multiclass")

    @model_validator(mode="after")
    def _check_head(self):
        if self.output_head == OutputHead.SIGMOID and self.n_outputs != 1:
            raise ValueError("a sigmoid head has exactly one output")
        if self.output_head == OutputHead.SOFTMAX and self.n_outputs < 2:
            raise ValueError("a softmax head needs at least two outputs")
        return self

    @property
    def hidden_sizes(self) -> List[int]:
        if self.architecture == Architecture.LINEAR:
            return []
        if self.architecture == Architecture.TWO_LAYER:
            return [self.hidden_units]
        return [self.hidden_units] * self.n_hidden_layers

    def for_columns(self, n_columns: int) -> "LabelModelSpec":
        """Same network with the head matched to a labeling of n_columns columns"""
        head = OutputHead.SIGMOID if n_columns == 1 else OutputHead.SOFTMAX
        return self.model_copy(update={"output_head": head, "n_outputs": n_columns})

    @classmethod
    def end_model(cls, n_columns: int = 1) -> "LabelModelSpec":
        """The fixed two-stage evaluation network: two 512-unit ReLU layers"""
        return cls(
            architecture=Architecture.MLP,
            hidden_units=512,
            n_hidden_layers=2,
            dropout_rate=0.0,
        ).for_columns(n_columns)


# ============================================================================
# PARAMETERS
# ============================================================================

class LabelModelParams(BaseModel):
    """Weights and biases of every layer; also used as the container for gradients and moments"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spec: LabelModelSpec
    weights: List[np.ndarray] = Field(..., description="fan_in x fan_out matrix per layer")
    biases: List[np.ndarray] = Field(..., description="fan_out vector per layer")

    @field_validator("weights", "biases", mode="before")
    @classmethod
    def _as_float_arrays(cls, value):
        return [np.array(array, dtype=float) for array in value]

    @model_validator(mode="after")
    def _check_layers(self):
        expected_layers = len(self.spec.hidden_sizes) + 1
        if len(self.weights) != expected_layers or len(self.biases) != expected_layers:
            raise ValueError(f"{self.spec.architecture.value} network needs {expected_layers} layers")
        for index, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            if weight.ndim != 2 or bias.shape != (weight.shape[1],):
                raise ValueError(f"layer {index} has weight {weight.shape} and bias {bias.shape}")
            if index and weight.shape[0] != self.weights[index - 1].shape[1]:
                raise ValueError(f"layer {index} input does not match the previous layer's output")
            if not (np.all(np.isfinite(weight)) and np.all(np.isfinite(bias))):
                raise ValueError(f"layer {index} has non-finite parameters")
        if self.weights[-1].shape[1] != self.spec.n_outputs:
            raise ValueError("output layer width does not match spec.n_outputs")
        return self

    @property
    def n_features(self) -> int:
        return self.weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def arrays(self) -> List[np.ndarray]:
        """Every tensor, weights first then biases"""
        return [*self.weights, *self.biases]

    def with_arrays(self, arrays: List[np.ndarray]) -> "LabelModelParams":
        """Copy with tensors replaced, in the order returned by arrays()"""
        n_layers = self.n_layers
        return self.model_copy(update={"weights": list(arrays[:n_layers]), "biases": list(arrays[n_layers:])})

    def map(self, function: Callable[..., np.ndarray], *others: "LabelModelParams") -> "LabelModelParams":
        """Apply function tensor-wise across this and other same-shaped parameter sets"""
        columns = zip(self.arrays(), *(other.arrays() for other in others))
        return self.with_arrays([function(*tensors) for tensors in columns])

    def zeros_like(self) -> "LabelModelParams":
        return self.map(np.zeros_like)

    def size(self) -> int:
        return int(sum(array.size for array in self.arrays()))


class AdamState(BaseModel):
    """First and second moment accumulators of Adam"""

    model_config = ConfigDict(frozen=True)

    m: LabelModelParams
    v: LabelModelParams
    t: int = Field(0, ge=0, description="Steps taken")
    lr: float = Field(0.01, gt=0.0)
    beta1: float = Field(0.9, ge=0.0, lt=1.0)
    beta2: float = Field(0.999, ge=0.0, lt=1.0)
    eps: float = Field(1e-8, gt=0.0)

    @classmethod
    def initial(cls, params: LabelModelParams, lr: float = 0.01, **hyperparameters) -> "AdamState":
        zeros = params.zeros_like()
        return cls(m=zeros, v=zeros, t=0, lr=lr, **hyperparameters)
