"""
DCWS - Experiment Pipeline

Two-stage evaluation: produce training labels (DCWS, majority vote or the
direct solve), measure them against the truth on the subset they were fit
on, then train the fixed end model on them and score it on held-out data.
Trials and ablation arms are independent and can run in worker processes.
"""

import hashlib
import json
import logging
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from dcws import __version__
from dcws.config import PACKAGE_DIR
from dcws.errors import DataFileError, DimensionMismatchError
from dcws.models.constraints import BoundVector
from dcws.models.experiment import (
    BoundsSource,
    EndModelLoss,
    ExperimentConfig,
    Method,
    MetricsReport,
    Representation,
    TrialMetrics,
)
from dcws.models.network import AdamState, LabelModelSpec, Mode
from dcws.models.signals import LabeledEval, SoftLabelMatrix, WeakSignalSet
from dcws.models.solver import PriorMode, TrainState
from dcws.services.constraints import estimate_bounds
from dcws.services.core import accuracy, coverage, f1_score, majority_vote_prior
from dcws.services.network import Features, adam_step, as_feature_array, backward, forward, init_params
from dcws.services.solver import build_prior, fit_dcws, solve_direct
from dcws.services.storage import load_dataset, read_bounds
from dcws.services.synth import generate, kmeans_features

logger = logging.getLogger(__name__)

METRICS_FILE = "metrics.json"
TIMING_FILE = "timing.json"
ABLATION_FILE = "ablation.json"

# Keeps cross-entropy finite at saturated outputs.
PROBABILITY_FLOOR = 1e-12


# ============================================================================
# END MODEL
# ============================================================================

def _end_model_gradient(output: np.ndarray, target: np.ndarray, loss: EndModelLoss) -> np.ndarray:
    n_examples = output.shape[0]
    if loss == EndModelLoss.SQUARED:
        return 2.0 * (output - target) / n_examples
    clipped = np.clip(output, PROBABILITY_FLOOR, 1.0 - PROBABILITY_FLOOR)
    if output.shape[1] == 1:
        return (clipped - target) / (clipped * (1.0 - clipped)) / n_examples
    return -target / clipped / n_examples


def train_end_model(
    train_X: Features,
    soft_labels: SoftLabelMatrix,
    test_X: Features,
    seed: int,
    epochs: int = 200,
    lr: float = 0.001,
    loss: EndModelLoss = EndModelLoss.SQUARED,
) -> SoftLabelMatrix:
    """Fit the two-layer 512-unit ReLU network to the soft labels, full batch; eval-mode test predictions"""
    features = as_feature_array(train_X)
    test_features = as_feature_array(test_X)
    target = soft_labels.probs
    if features.shape[0] != target.shape[0]:
        raise DimensionMismatchError(f"{features.shape[0]} training rows for {target.shape[0]} soft labels")
    if test_features.ndim != 2 or test_features.shape[1] != features.shape[1]:
        raise DimensionMismatchError(
            f"test features have {test_features.shape[-1]} columns, training features {features.shape[1]}"
        )

    spec = LabelModelSpec.end_model(soft_labels.n_columns)
    params = init_params(spec, features.shape[1], seed)
    adam = AdamState.initial(params, lr=lr)
    loss = EndModelLoss(loss)
    for _ in range(epochs):
        output, cache = forward(params, features, Mode.TRAIN)
        grad = _end_model_gradient(output.probs, target, loss)
        params, adam = adam_step(adam, params, backward(params, cache, grad))

    predictions, _ = forward(params, test_features, Mode.EVAL)
    return predictions


# ============================================================================
# TRIALS
# ============================================================================

class TrialData(BaseModel):
    """Inputs of one trial after loading or generation"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    train_X: np.ndarray
    signals: WeakSignalSet
    train_truth: Optional[LabeledEval] = None
    test_X: Optional[np.ndarray] = None
    test_truth: Optional[LabeledEval] = None
    fingerprint: str


def trial_seeds(master_seed: int, trials: int) -> List[Tuple[int, int, int]]:
    """(data, solver, end model) seeds per trial, spawned from the master seed"""
    seeds = []
    for child in np.random.SeedSequence(master_seed).spawn(trials):
        data_seed, solver_seed, end_seed = child.generate_state(3)
        seeds.append((int(data_seed), int(solver_seed), int(end_seed)))
    return seeds


def load_trial_data(config: ExperimentConfig, data_seed: int) -> TrialData:
    """Generate or read the trial's dataset"""
    if config.synthetic is not None:
        bundle = generate(config.synthetic.model_copy(update={"seed": data_seed}))
        return TrialData(
            train_X=bundle.train_X,
            signals=bundle.signals,
            train_truth=bundle.train_labels,
            test_X=bundle.test_X,
            test_truth=bundle.test_labels,
            fingerprint=bundle.fingerprint(),
        )

    dataset, error = load_dataset(config.data)
    if error:
        raise DataFileError(error)
    fingerprint = _fingerprint([dataset.features.values, dataset.signals.votes])
    return TrialData(
        train_X=dataset.features.values,
        signals=dataset.signals,
        train_truth=dataset.labels,
        test_X=None if dataset.test_features is None else dataset.test_features.values,
        test_truth=dataset.test_labels,
        fingerprint=fingerprint,
    )


def _fingerprint(arrays: List[np.ndarray]) -> str:
    digest = hashlib.sha256()
    for array in arrays:
        contiguous = np.ascontiguousarray(array)
        digest.update(str(contiguous.shape).encode())
        digest.update(contiguous.tobytes())
    return digest.hexdigest()


def _representation(config: ExperimentConfig, data: TrialData, seed: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    if config.representation == Representation.FEATURES:
        return data.train_X, data.test_X
    # train and test are clustered together so both get the same one-hot space
    stacked = data.train_X if data.test_X is None else np.vstack([data.train_X, data.test_X])
    clusters = kmeans_features(stacked, config.n_clusters, seed=seed, minibatch=config.minibatch_kmeans)
    n_train = data.train_X.shape[0]
    return clusters[:n_train], (None if data.test_X is None else clusters[n_train:])


def _bounds(config: ExperimentConfig, data: TrialData, seed: int) -> Optional[BoundVector]:
    if config.bounds_source == BoundsSource.ZERO:
        return None
    if config.bounds_source == BoundsSource.FILE:
        bounds, error = read_bounds(config.bounds_path, data.signals.n_signals)
        if error:
            raise DataFileError(error)
        return bounds
    if data.train_truth is None:
        raise DataFileError("validation bounds need training labels")
    n_examples = data.signals.n_examples
    n_validation = max(1, int(round(config.validation_fraction * n_examples)))
    rows = np.sort(np.random.default_rng(seed).permutation(n_examples)[:n_validation])
    bounds = estimate_bounds(data.signals, data.train_truth.subset(rows), rows)
    logger.info(f"Estimated bounds from {n_validation} validation rows: {np.round(bounds.bounds, 3).tolist()}")
    return bounds


def _produce_labels(
    config: ExperimentConfig,
    features: np.ndarray,
    signals: WeakSignalSet,
    bounds: Optional[BoundVector],
    solver_seed: int,
) -> Tuple[SoftLabelMatrix, Optional[TrainState]]:
    solver = config.solver.model_copy(update={"seed": solver_seed})
    if config.method == Method.MAJORITY_VOTE:
        return majority_vote_prior(signals), None
    if config.method == Method.DIRECT:
        return solve_direct(signals, bounds, build_prior(signals, solver.prior_mode), solver)
    return fit_dcws(features, signals, bounds, config.label_model, solver)


def run_trial(config: ExperimentConfig, trial: int, seeds: Tuple[int, int, int]) -> TrialMetrics:
    """One complete trial; owns its data, state and randomness"""
    data_seed, solver_seed, end_seed = seeds
    started = time.perf_counter()
    data = load_trial_data(config, data_seed)
    train_X, test_X = _representation(config, data, data_seed)
    bounds = _bounds(config, data, data_seed)

    covered = coverage(data.signals)
    if config.dcws_plus:
        fit_rows = np.arange(data.signals.n_examples)
    else:
        fit_rows = np.flatnonzero(covered)
    if fit_rows.size == 0:
        raise DataFileError("no weak signal covers any example")
    signals = data.signals.subset(fit_rows)
    labels, state = _produce_labels(config, train_X[fit_rows], signals, bounds, solver_seed)

    label_accuracy = label_f1 = None
    if data.train_truth is not None:
        fit_truth = data.train_truth.subset(fit_rows)
        label_accuracy = accuracy(labels, fit_truth)
        label_f1 = f1_score(labels, fit_truth)

    test_accuracy = test_f1 = None
    if config.end_model and test_X is not None and data.test_truth is not None:
        end_rows = np.arange(fit_rows.size)
        if config.dcws_plus and config.end_model_covered_only:
            end_rows = np.flatnonzero(covered[fit_rows])
        predictions = train_end_model(
            train_X[fit_rows][end_rows],
            labels.subset(end_rows),
            test_X,
            seed=end_seed,
            epochs=config.end_model_epochs,
            lr=config.end_model_lr,
            loss=config.end_model_loss,
        )
        test_accuracy = accuracy(predictions, data.test_truth)
        test_f1 = f1_score(predictions, data.test_truth)

    metrics = TrialMetrics(
        trial=trial,
        data_seed=data_seed,
        data_fingerprint=data.fingerprint,
        n_fit_examples=int(fit_rows.size),
        label_accuracy=label_accuracy,
        label_f1=label_f1,
        test_accuracy=test_accuracy,
        f1=test_f1,
        epochs=0 if state is None else state.epoch,
        max_violation=None if state is None else state.final_violation,
        converged=False if state is None else state.converged,
        stalled=False if state is None else state.stalled,
        diagnostic=None if state is None else state.diagnostic,
        seconds=time.perf_counter() - started,
    )
    logger.info(
        f"[{config.name}] trial {trial}: label accuracy {label_accuracy}, test accuracy {test_accuracy}, "
        f"{metrics.epochs} epochs"
    )
    return metrics


def _run_trial_star(arguments) -> TrialMetrics:
    return run_trial(*arguments)


def _map(function: Callable, jobs: List, workers: int) -> List:
    if workers <= 1 or len(jobs) <= 1:
        return [function(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(function, jobs))


# ============================================================================
# EXPERIMENTS AND ABLATIONS
# ============================================================================

def run_experiment(config: ExperimentConfig) -> MetricsReport:
    """Run every trial and aggregate mean and standard deviation"""
    logger.info(f"Starting experiment '{config.name}' with {config.trials} trial(s), method {config.method.value}")
    jobs = [(config, trial, seeds) for trial, seeds in enumerate(trial_seeds(config.seed, config.trials))]
    results = _map(_run_trial_star, jobs, config.workers)
    report = MetricsReport.aggregate(config.name, results)
    logger.info(
        f"Finished '{config.name}': label accuracy {report.label_accuracy_mean} +/- {report.label_accuracy_std}, "
        f"test accuracy {report.test_accuracy_mean} +/- {report.test_accuracy_std}"
    )
    return report


def _with_solver(config: ExperimentConfig, name: str, **solver) -> ExperimentConfig:
    return config.model_copy(update={"name": name, "solver": config.solver.model_copy(update=solver)})


def ablation_arms(config: ExperimentConfig) -> List[ExperimentConfig]:
    """The ablation variants of a base DCWS configuration, all on the same data"""
    arms = [
        _with_solver(config, "without_slack", use_slack=False),
        _with_solver(config, "uniform_regularization", prior_mode=PriorMode.UNIFORM),
        _with_solver(config, "without_regularization", prior_mode=PriorMode.NONE),
        _with_solver(config, "without_constraints", use_constraints=False),
        config.model_copy(update={"name": "without_data_consistency", "method": Method.DIRECT}),
        config.model_copy(
            update={
                "name": "without_dropout",
                "label_model": config.label_model.model_copy(update={"dropout_rate": 0.0}),
            }
        ),
    ]
    for penalty in (0.1, 1.0, 10.0, 100.0):
        arms.append(_with_solver(config, f"slack_penalty_{penalty:g}", slack_penalty=penalty))
    for k in (10, 100, 200):
        arms.append(
            config.model_copy(
                update={"name": f"clusters_{k}", "representation": Representation.CLUSTERS, "n_clusters": k}
            )
        )
    return arms


def _run_arm(config: ExperimentConfig) -> MetricsReport:
    return run_experiment(config)


def run_ablation(config: ExperimentConfig) -> Dict[str, MetricsReport]:
    """The base configuration followed by every ablation arm, keyed by arm name in run order"""
    base = config.model_copy(update={"name": "dcws", "method": Method.DCWS})
    arms = [base, *ablation_arms(base)]
    logger.info(f"Running {len(arms)} ablation arms")
    # arms fan out across workers; trials inside an arm then run in-process
    serial = [arm.model_copy(update={"workers": 1}) for arm in arms]
    reports = _map(_run_arm, serial, config.workers)
    return {report.name: report for report in reports}


# ============================================================================
# METRICS FILES
# ============================================================================

def version_string() -> str:
    """Package version with the git description of the source tree when available"""
    try:
        described = subprocess.run(
            ["git", "describe", "--tags", "--always"],
            cwd=PACKAGE_DIR,
            capture_output=True,
            text=True,
            timeout=5,
            check=False,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    tag = described.stdout.strip()
    if described.returncode != 0 or not tag:
        return __version__
    return f"{__version__}+{tag}"


def metrics_document(report: MetricsReport, config: Optional[ExperimentConfig] = None) -> dict:
    """The deterministic content of metrics.json; wall-clock fields left out"""
    document = report.model_dump(mode="json", exclude={"seconds": True, "trials": {"__all__": {"seconds": True}}})
    document["per_trial"] = document.pop("trials")
    document["config"] = None if config is None else config.echo()
    document["version"] = version_string()
    return document


def _write_json(document: dict, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n")
    return path


def emit_metrics(report: MetricsReport, path: Path, config: Optional[ExperimentConfig] = None) -> Path:
    """Write metrics.json (or the given .json path) plus a sibling timing.json"""
    path = Path(path)
    if path.suffix != ".json":
        path = path / METRICS_FILE
    _write_json(metrics_document(report, config), path)
    timing = {
        "seconds": report.seconds,
        "per_trial": [{"trial": trial.trial, "seconds": trial.seconds} for trial in report.trials],
    }
    _write_json(timing, path.with_name(TIMING_FILE))
    logger.info(f"Metrics written to {path}")
    return path


def emit_ablation(reports: Dict[str, MetricsReport], out_dir: Path, config: Optional[ExperimentConfig] = None) -> Path:
    """One metrics directory per arm and a summary table"""
    out_dir = Path(out_dir)
    arms = ablation_arms(config) if config is not None else []
    arm_configs = {arm.name: arm for arm in arms}
    if config is not None:
        arm_configs["dcws"] = config.model_copy(update={"name": "dcws", "method": Method.DCWS})
    summary = {}
    for name, report in reports.items():
        emit_metrics(report, out_dir / name, arm_configs.get(name))
        summary[name] = {
            "label_accuracy_mean": report.label_accuracy_mean,
            "label_accuracy_std": report.label_accuracy_std,
            "test_accuracy_mean": report.test_accuracy_mean,
            "test_accuracy_std": report.test_accuracy_std,
            "f1_mean": report.f1_mean,
            "f1_std": report.f1_std,
        }
    path = _write_json({"arms": list(reports), "summary": summary, "version": version_string()}, out_dir / ABLATION_FILE)
    logger.info(f"Ablation table written to {path}")
    return path
