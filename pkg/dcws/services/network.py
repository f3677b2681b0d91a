"""
DCWS - Label Model Forward/Backward Passes

Hand-written forward and backward passes for the linear, two-layer and
deeper ReLU networks, the Adam update, a central-difference gradient
oracle, and checkpoint files.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.special import expit, softmax

from dcws.errors import DataFileError, DimensionMismatchError, NonFiniteInputError
from dcws.models.network import AdamState, LabelModelParams, LabelModelSpec, Mode, OutputHead
from dcws.models.signals import FeatureMatrix, SoftLabelMatrix

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "dcws-checkpoint"
CHECKPOINT_VERSION = 1

Features = Union[FeatureMatrix, np.ndarray]


@dataclass
class ForwardCache:
    """Intermediates of one forward pass, consumed by backward"""

    inputs: List[np.ndarray]
    pre_activations: List[np.ndarray]
    dropout_masks: List[Optional[np.ndarray]]
    output: np.ndarray


def as_feature_array(X: Features) -> np.ndarray:
    if isinstance(X, FeatureMatrix):
        return X.values
    return np.asarray(X, dtype=float)


# ============================================================================
# INITIALISATION
# ============================================================================

def init_params(spec: LabelModelSpec, n_features: int, seed: int) -> LabelModelParams:
    """Weights ~ N(0, 1/fan_in), zero biases; deterministic per seed"""
    rng = np.random.default_rng(seed)
    sizes = [n_features, *spec.hidden_sizes, spec.n_outputs]
    weights = [
        rng.standard_normal((fan_in, fan_out)) / np.sqrt(fan_in)
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:])
    ]
    biases = [np.zeros(fan_out) for fan_out in sizes[1:]]
    return LabelModelParams(spec=spec, weights=weights, biases=biases)


# ============================================================================
# FORWARD / BACKWARD
# ============================================================================

def forward(
    params: LabelModelParams,
    X: Features,
    mode: Mode = Mode.EVAL,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[SoftLabelMatrix, ForwardCache]:
    """
    ReLU hidden layers, inverted dropout in train mode only, then the sigmoid
    or softmax head. Eval mode never touches rng.
    """
    features = as_feature_array(X)
    if features.ndim != 2 or features.shape[1] != params.n_features:
        raise DimensionMismatchError(
            f"features have shape {features.shape}, network expects {params.n_features} columns"
        )
    if not np.all(np.isfinite(features)):
        raise NonFiniteInputError("features contain NaN or infinite entries")

    rate = params.spec.dropout_rate
    dropping = Mode(mode) == Mode.TRAIN and rate > 0.0
    if dropping and rng is None:
        raise ValueError("train-mode dropout needs an rng")

    hidden = features
    inputs, pre_activations, masks = [], [], []
    for weight, bias in zip(params.weights[:-1], params.biases[:-1]):
        inputs.append(hidden)
        pre = hidden @ weight + bias
        pre_activations.append(pre)
        hidden = np.maximum(pre, 0.0)
        keep = None
        if dropping:
            keep = (rng.random(hidden.shape) >= rate) / (1.0 - rate)
            hidden = hidden * keep
        masks.append(keep)
    inputs.append(hidden)

    logits = hidden @ params.weights[-1] + params.biases[-1]
    if params.spec.output_head == OutputHead.SIGMOID:
        output = expit(logits)
    else:
        output = softmax(logits, axis=1)

    cache = ForwardCache(inputs=inputs, pre_activations=pre_activations, dropout_masks=masks, output=output)
    return SoftLabelMatrix(probs=output), cache


def backward(params: LabelModelParams, cache: ForwardCache, output_gradient: np.ndarray) -> LabelModelParams:
    """Gradients of a loss with dL/df = output_gradient, through the head and every layer"""
    grad = np.asarray(output_gradient, dtype=float)
    output = cache.output
    if grad.shape != output.shape:
        raise DimensionMismatchError(f"output gradient {grad.shape} does not match output {output.shape}")

    if params.spec.output_head == OutputHead.SIGMOID:
        delta = grad * output * (1.0 - output)
    else:
        # full softmax row Jacobian: J^T g = f * (g - <g, f>)
        delta = output * (grad - np.sum(grad * output, axis=1, keepdims=True))

    n_layers = params.n_layers
    weight_grads: List[np.ndarray] = [None] * n_layers
    bias_grads: List[np.ndarray] = [None] * n_layers
    for layer in reversed(range(n_layers)):
        weight_grads[layer] = cache.inputs[layer].T @ delta
        bias_grads[layer] = delta.sum(axis=0)
        if layer == 0:
            break
        delta = delta @ params.weights[layer].T
        keep = cache.dropout_masks[layer - 1]
        if keep is not None:
            delta = delta * keep
        delta = delta * (cache.pre_activations[layer - 1] > 0.0)

    return params.with_arrays([*weight_grads, *bias_grads])


# ============================================================================
# OPTIMISATION
# ============================================================================

def adam_step(
    state: AdamState,
    params: LabelModelParams,
    grads: LabelModelParams,
) -> Tuple[LabelModelParams, AdamState]:
    """One bias-corrected Adam update"""
    beta1, beta2 = state.beta1, state.beta2
    t = state.t + 1
    m = state.m.map(lambda moment, g: beta1 * moment + (1.0 - beta1) * g, grads)
    v = state.v.map(lambda moment, g: beta2 * moment + (1.0 - beta2) * g * g, grads)
    first_correction = 1.0 - beta1 ** t
    second_correction = 1.0 - beta2 ** t

    def update(value, first, second):
        return value - state.lr * (first / first_correction) / (np.sqrt(second / second_correction) + state.eps)

    updated = params.map(update, m, v)
    return updated, state.model_copy(update={"m": m, "v": v, "t": t})


def finite_diff_gradients(
    params: LabelModelParams,
    scalar_loss_fn: Callable[[LabelModelParams], float],
    epsilon: float = 1e-5,
) -> LabelModelParams:
    """Central-difference estimate of d loss / d theta for every parameter"""
    arrays = [array.copy() for array in params.arrays()]
    probe = params.with_arrays(arrays)
    estimates = []
    for array in arrays:
        estimate = np.zeros_like(array)
        for index in np.ndindex(array.shape):
            original = array[index]
            array[index] = original + epsilon
            upper = scalar_loss_fn(probe)
            array[index] = original - epsilon
            lower = scalar_loss_fn(probe)
            array[index] = original
            estimate[index] = (upper - lower) / (2.0 * epsilon)
        estimates.append(estimate)
    return params.with_arrays(estimates)


# ============================================================================
# CHECKPOINTS
# ============================================================================

def save_checkpoint(params: LabelModelParams, path: Path) -> Path:
    """Write spec and tensors to a versioned .npz file"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {f"weight_{index}": weight for index, weight in enumerate(params.weights)}
    tensors.update({f"bias_{index}": bias for index, bias in enumerate(params.biases)})
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "n_layers": params.n_layers,
        "spec": params.spec.model_dump(mode="json"),
    }
    with open(path, "wb") as handle:
        np.savez(handle, header=np.array(json.dumps(header, sort_keys=True)), **tensors)
    logger.info(f"Checkpoint written to {path}")
    return path


def load_checkpoint(path: Path) -> LabelModelParams:
    """Read a checkpoint written by save_checkpoint"""
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"Checkpoint not found: {path}")
    with np.load(path, allow_pickle=False) as archive:
        if "header" not in archive.files:
            raise DataFileError(f"{path} is not a checkpoint (no header)")
        header = json.loads(str(archive["header"]))
        if header.get("format") != CHECKPOINT_FORMAT or header.get("version") != CHECKPOINT_VERSION:
            raise DataFileError(f"Unsupported checkpoint format in {path}: {header.get('format')} v{header.get('version')}")
        n_layers = header["n_layers"]
        weights = [archive[f"weight_{index}"] for index in range(n_layers)]
        biases = [archive[f"bias_{index}"] for index in range(n_layers)]
    return LabelModelParams(spec=LabelModelSpec(**header["spec"]), weights=weights, biases=biases)
