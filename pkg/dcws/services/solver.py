"""
DCWS - Saddle-Point Solver

Minimises ||f_theta(X) - Y_r||^2 + C * sum(xi) subject to A f_theta(X) <= b + xi
through its Lagrangian: Adam descent on theta, projected ascent on the
multipliers lambda, projected descent on the slacks xi. The same loop with
the labels themselves as the free variable gives the direct solve used by
the "without data consistency" ablation.
"""

import logging
from collections import deque
from typing import Callable, Deque, Optional, Tuple, Union

import numpy as np

from dcws.errors import DimensionMismatchError
from dcws.models.constraints import BoundVector, ConstraintSystem
from dcws.models.network import AdamState, LabelModelParams, LabelModelSpec, Mode
from dcws.models.signals import SoftLabelMatrix, WeakSignalSet
from dcws.models.solver import EpochRecord, PriorMode, SolverConfig, TrainState
from dcws.services.constraints import build_constraint_system, violations
from dcws.services.core import majority_vote_prior, uniform_prior
from dcws.services.network import Features, adam_step, as_feature_array, backward, forward, init_params

logger = logging.getLogger(__name__)
training_logger = logging.getLogger("dcws.training")

# Stream id mixed into the seed for dropout draws, so they never reuse the init stream.
DROPOUT_STREAM = 1

Labels = Union[SoftLabelMatrix, np.ndarray]
# Called after every epoch with (epoch, lambdas, slacks).
EpochCallback = Callable[[int, np.ndarray, np.ndarray], None]


def _as_labels(labels: Optional[Labels]) -> Optional[np.ndarray]:
    if labels is None:
        return None
    if isinstance(labels, SoftLabelMatrix):
        return labels.probs
    labels = np.asarray(labels, dtype=float)
    return labels[:, None] if labels.ndim == 1 else labels


def build_prior(signals: WeakSignalSet, mode: PriorMode) -> Optional[SoftLabelMatrix]:
    """The labeling Y_r the model defaults to; None when regularisation is off"""
    mode = PriorMode(mode)
    if mode == PriorMode.MAJORITY:
        return majority_vote_prior(signals)
    if mode == PriorMode.UNIFORM:
        return uniform_prior(signals.n_examples, signals.n_columns)
    return None


# ============================================================================
# LAGRANGIAN
# ============================================================================

def lagrangian_value(
    f: Labels,
    prior: Optional[Labels],
    system: ConstraintSystem,
    lambdas: np.ndarray,
    slacks: np.ndarray,
    slack_penalty: float,
) -> float:
    """||f - Y_r||^2 + C sum(xi) + sum_i lambda_i (A_i f - b_i - xi_i); no first term without a prior"""
    f = _as_labels(f)
    prior = _as_labels(prior)
    lambdas = np.asarray(lambdas, dtype=float)
    slacks = np.asarray(slacks, dtype=float)
    if lambdas.shape != (system.n_signals,):
        raise DimensionMismatchError(f"{lambdas.shape[0]} multipliers for {system.n_signals} signals")
    if np.any(lambdas < 0.0):
        raise ValueError("multipliers must be non-negative")

    regularizer = 0.0
    if prior is not None:
        if prior.shape != f.shape:
            raise DimensionMismatchError(f"prior {prior.shape} does not match labels {f.shape}")
        regularizer = float(np.sum((f - prior) ** 2))
    residual = violations(system, f, slacks)
    return regularizer + slack_penalty * float(slacks.sum()) + float(lambdas @ residual)


def output_gradient(
    f: Labels,
    prior: Optional[Labels],
    system: ConstraintSystem,
    lambdas: np.ndarray,
) -> np.ndarray:
    """dL/df: 2(f - Y_r) plus lambda_i A_i added into column k_i of every signal i"""
    f = _as_labels(f)
    prior = _as_labels(prior)
    lambdas = np.asarray(lambdas, dtype=float)
    if np.any(lambdas < 0.0):
        raise ValueError("multipliers must be non-negative")
    if f.shape != (system.n_examples, system.n_columns):
        raise DimensionMismatchError(
            f"labels {f.shape} do not match the system ({system.n_examples}, {system.n_columns})"
        )
    grad = np.zeros_like(f) if prior is None else 2.0 * (f - prior)
    grad += (system.rows.T * lambdas) @ system.column_selector()
    return grad


def objective_value(
    f: Labels,
    prior: Optional[Labels],
    system: ConstraintSystem,
    slack_penalty: float,
) -> float:
    """The primal objective with each slack at its optimum, max(0, A_i f - b_i)"""
    f = _as_labels(f)
    prior = _as_labels(prior)
    regularizer = 0.0 if prior is None else float(np.sum((f - prior) ** 2))
    excess = np.maximum(violations(system, f), 0.0)
    return regularizer + slack_penalty * float(excess.sum())


# ============================================================================
# SADDLE-POINT LOOP
# ============================================================================

def _log_epoch(record: EpochRecord) -> None:
    if training_logger.isEnabledFor(logging.INFO):
        training_logger.info(
            f"{record.epoch}\t{record.lagrangian:.10g}\t{record.max_violation:.10g}\t{record.mean_slack:.10g}"
        )


def _settled(window: Deque[Tuple[float, np.ndarray, np.ndarray]], tol: float) -> bool:
    """Lagrangian, multipliers and slacks each stayed within a relative tol over the whole window"""
    values = np.array([entry[0] for entry in window])
    if np.ptp(values) > tol * max(float(np.abs(values).max()), 1.0):
        return False
    for column in (1, 2):
        stacked = np.array([entry[column] for entry in window])
        if np.ptp(stacked, axis=0).max() > tol * max(float(np.abs(stacked).max()), 1.0):
            return False
    return True


def _saddle_point(
    system: ConstraintSystem,
    prior: Optional[np.ndarray],
    config: SolverConfig,
    primal_step: Callable[[np.ndarray], np.ndarray],
    snapshot: Callable[[], object],
    callback: Optional[EpochCallback] = None,
) -> Tuple[object, TrainState]:
    """
    Run the multiplier/slack loop around a primal step.

    primal_step(lambdas) advances the primal variable one step and returns the
    labels it now produces, the same labels a snapshot taken right after would
    give. Every epoch is judged on those labels.

    With slack on, the multipliers are projected onto [0, C]: minimising
    (C - lambda_i) * xi_i over xi_i >= 0 is bounded only there. Each slack takes
    a projected step toward max(0, A_i f - b_i), the violation it absorbs.
    """
    n_signals = system.n_signals
    ceiling = config.slack_penalty if config.use_slack else np.inf
    lambdas = np.zeros(n_signals)
    slacks = np.zeros(n_signals)
    history = []
    window: Deque[Tuple[float, np.ndarray, np.ndarray]] = deque(maxlen=config.convergence_window + 1)
    best_violation = np.inf
    best = (snapshot(), lambdas.copy(), slacks.copy())
    since_best = 0
    converged = stalled = False
    diagnostic = None

    training_logger.info("epoch\tlagrangian\tmax_violation\tmean_slack")
    for epoch in range(1, config.max_epochs + 1):
        f = primal_step(lambdas)
        raw = violations(system, f)
        if config.use_constraints:
            lambdas = np.clip(lambdas + config.lr_lambda * raw, 0.0, ceiling)
        if config.use_slack:
            slacks = np.maximum(0.0, slacks + config.lr_xi * (np.maximum(raw, 0.0) - slacks))
        residual = raw - slacks
        value = lagrangian_value(f, prior, system, lambdas, slacks, config.slack_penalty)
        max_violation = float(residual.max())
        record = EpochRecord(
            epoch=epoch,
            lagrangian=value,
            max_violation=max_violation,
            mean_slack=float(slacks.mean()),
        )
        history.append(record)
        _log_epoch(record)
        if callback is not None:
            callback(epoch, lambdas, slacks)

        window.append((value, lambdas.copy(), slacks.copy()))
        feasible = (not config.use_constraints) or max_violation <= config.convergence_tol
        if feasible and len(window) == window.maxlen and _settled(window, config.convergence_tol):
            converged = True
            break

        if not config.use_constraints:
            continue
        excess = max(max_violation, 0.0)
        if excess < best_violation - 1e-9:
            best_violation = excess
            best = (snapshot(), lambdas.copy(), slacks.copy())
            since_best = 0
        else:
            since_best += 1
        if since_best >= config.stall_patience and best_violation > config.convergence_tol:
            stalled = True
            diagnostic = (
                f"max violation has not decreased for {config.stall_patience} epochs "
                f"(best {best_violation:.4g} > tol {config.convergence_tol:g}); "
                f"returning the lowest-violation state"
            )
            logger.warning(f"Stalled at epoch {epoch}: {diagnostic}")
            break

    if stalled:
        primal, lambdas, slacks = best
    else:
        primal = snapshot()
    state = TrainState(
        lambdas=lambdas,
        slacks=slacks,
        epoch=len(history),
        history=history,
        converged=converged,
        stalled=stalled,
        diagnostic=diagnostic,
    )
    if converged:
        logger.info(f"Converged after {state.epoch} epochs (max violation {history[-1].max_violation:.4g})")
    return primal, state


# ============================================================================
# FITTING
# ============================================================================

def fit_dcws(
    X: Features,
    signals: WeakSignalSet,
    bounds: Optional[BoundVector] = None,
    spec: Optional[LabelModelSpec] = None,
    config: Optional[SolverConfig] = None,
    callback: Optional[EpochCallback] = None,
) -> Tuple[SoftLabelMatrix, TrainState]:
    """Train the label model under the weak-supervision constraints; full batch"""
    config = config or SolverConfig()
    spec = (spec or LabelModelSpec()).for_columns(signals.n_columns)
    features = as_feature_array(X)
    if features.shape[0] != signals.n_examples:
        raise DimensionMismatchError(f"{features.shape[0]} feature rows for {signals.n_examples} signal rows")

    system = build_constraint_system(signals, bounds)
    prior = _as_labels(build_prior(signals, config.prior_mode))
    rng = np.random.default_rng([config.seed, DROPOUT_STREAM])
    params = init_params(spec, features.shape[1], config.seed)
    adam = AdamState.initial(params, lr=config.lr_theta)

    def primal_step(lambdas: np.ndarray) -> np.ndarray:
        nonlocal params, adam
        labels, cache = forward(params, features, Mode.TRAIN, rng)
        grad = output_gradient(labels.probs, prior, system, lambdas)
        params, adam = adam_step(adam, params, backward(params, cache, grad))
        return predict(params, None, features).probs

    logger.info(
        f"Fitting {spec.architecture.value} label model on {features.shape[0]} examples, "
        f"{signals.n_signals} signals, C={config.slack_penalty:g}, prior={config.prior_mode.value}"
    )
    fitted, state = _saddle_point(system, prior, config, primal_step, lambda: params, callback)
    state.params = fitted
    return predict(fitted, spec, features), state


def project_labels(labels: np.ndarray) -> np.ndarray:
    """Clip to [0, 1]; multiclass rows renormalised, all-zero rows made uniform"""
    projected = np.clip(labels, 0.0, 1.0)
    if projected.shape[1] == 1:
        return projected
    totals = projected.sum(axis=1, keepdims=True)
    uniform = np.full_like(projected, 1.0 / projected.shape[1])
    return np.divide(projected, totals, out=uniform, where=totals > 0.0)


def solve_direct(
    signals: WeakSignalSet,
    bounds: Optional[BoundVector],
    prior: Optional[Labels],
    config: Optional[SolverConfig] = None,
    callback: Optional[EpochCallback] = None,
) -> Tuple[SoftLabelMatrix, TrainState]:
    """Projected saddle-point solve with the labels themselves as the free variable"""
    config = config or SolverConfig()
    system = build_constraint_system(signals, bounds)
    prior = _as_labels(prior)
    if prior is not None and prior.shape != (signals.n_examples, signals.n_columns):
        raise DimensionMismatchError(f"prior {prior.shape} does not match the signals")
    start = prior if prior is not None else uniform_prior(signals.n_examples, signals.n_columns).probs
    labels = np.array(start, dtype=float)

    def primal_step(lambdas: np.ndarray) -> np.ndarray:
        nonlocal labels
        labels = project_labels(labels - config.lr_theta * output_gradient(labels, prior, system, lambdas))
        return labels

    logger.info(f"Solving labels directly for {signals.n_examples} examples, {signals.n_signals} signals")
    solved, state = _saddle_point(system, prior, config, primal_step, lambda: labels, callback)
    return SoftLabelMatrix(probs=solved), state


def fit_direct(
    signals: WeakSignalSet,
    bounds: Optional[BoundVector],
    prior: Optional[Labels],
    config: Optional[SolverConfig] = None,
) -> SoftLabelMatrix:
    """Labels from the direct solve, without a data-consistent model"""
    labels, _ = solve_direct(signals, bounds, prior, config)
    return labels


def predict(params: LabelModelParams, spec: Optional[LabelModelSpec], X: Features) -> SoftLabelMatrix:
    """Eval-mode forward pass of a trained label model"""
    if spec is not None and spec != params.spec:
        raise ValueError("spec does not match the trained parameters")
    labels, _ = forward(params, X, Mode.EVAL)
    return labels
