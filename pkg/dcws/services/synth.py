"""
DCWS - Synthetic Benchmarks and Cluster Features

Seeded generators for the dependent-signal and independent-signal binary
benchmarks, plus the k-means one-hot representation used by the cluster
ablation.
"""

import logging
from typing import Callable, List, Tuple

import numpy as np
from sklearn.cluster import MiniBatchKMeans

from dcws.errors import InfeasibleSpecError
from dcws.models.signals import ABSTAIN, WeakSignalSet
from dcws.models.synth import Benchmark, SyntheticBundle, SyntheticSpec

logger = logging.getLogger(__name__)

# Resampling attempts before a signal family is declared infeasible.
MAX_ATTEMPTS = 100


# ============================================================================
# HELPERS
# ============================================================================

def _features(rng: np.random.Generator, truth: np.ndarray, spec: SyntheticSpec) -> np.ndarray:
    """Binary features, feature j agreeing with the label with probability p_j"""
    low, high = spec.feature_agreement_range
    agreement = rng.uniform(low, high, size=spec.n_features)
    agrees = rng.random((truth.shape[0], spec.n_features)) < agreement
    labels = truth[:, None].astype(float)
    return np.where(agrees, labels, 1.0 - labels)


def _coverage_rows(rng: np.random.Generator, n_examples: int, coverage: float) -> np.ndarray:
    """Exactly round(coverage * n) distinct covered rows, at least one"""
    n_covered = max(1, int(round(coverage * n_examples)))
    return np.sort(rng.permutation(n_examples)[:n_covered])


def _flip(rng: np.random.Generator, votes: np.ndarray, rate: float) -> np.ndarray:
    return np.where(rng.random(votes.shape[0]) < rate, 1.0 - votes, votes)


def _in_range(errors: List[float], error_range: Tuple[float, float]) -> bool:
    low, high = error_range
    return all(low <= error <= high for error in errors)


def _resample(
    draw: Callable[[], Tuple[List[np.ndarray], List[float]]],
    error_range: Tuple[float, float],
    what: str,
) -> Tuple[List[np.ndarray], List[float]]:
    """Redraw until every realised error falls inside error_range"""
    for attempt in range(1, MAX_ATTEMPTS + 1):
        votes, errors = draw()
        if _in_range(errors, error_range):
            if attempt > 1:
                logger.debug(f"{what} accepted after {attempt} draws")
            return votes, errors
    raise InfeasibleSpecError(
        f"Could not draw {what} with every error inside {error_range} after {MAX_ATTEMPTS} attempts"
    )


def _independent_signal(
    rng: np.random.Generator,
    truth: np.ndarray,
    spec: SyntheticSpec,
    index: int,
) -> Tuple[np.ndarray, float]:
    rows = _coverage_rows(rng, truth.shape[0], spec.coverage)
    reference = truth[rows].astype(float)

    def draw():
        target = rng.uniform(*spec.error_range)
        votes = _flip(rng, reference, target)
        return [votes], [float(np.mean(votes != reference))]

    (votes,), (error,) = _resample(draw, spec.error_range, f"independent signal {index}")
    column = np.full(truth.shape[0], ABSTAIN)
    column[rows] = votes
    return column, error


def _split(rng: np.random.Generator, spec: SyntheticSpec) -> Tuple[np.ndarray, ...]:
    train_truth = rng.integers(0, 2, size=spec.n_train)
    test_truth = rng.integers(0, 2, size=spec.n_test)
    train_X = _features(rng, train_truth, spec)
    test_X = _features(rng, test_truth, spec)
    return train_X, train_truth, test_X, test_truth


def _bundle(spec, train_X, train_truth, test_X, test_truth, columns, errors) -> SyntheticBundle:
    signals = WeakSignalSet(
        votes=np.column_stack(columns),
        signal_class=np.ones(len(columns), dtype=int),
        n_classes=2,
    )
    bundle = SyntheticBundle(
        spec=spec,
        train_X=train_X,
        train_truth=train_truth,
        test_X=test_X,
        test_truth=test_truth,
        signals=signals,
        error_rates=np.array(errors),
    )
    logger.info(
        f"Generated {spec.benchmark.value} benchmark: {spec.n_train} train / {spec.n_test} test, "
        f"{signals.n_signals} signals, errors {np.round(bundle.error_rates, 3).tolist()}, "
        f"global coverage {bundle.global_coverage():.3f}"
    )
    return bundle


# ============================================================================
# GENERATORS
# ============================================================================

def generate_dependent(spec: SyntheticSpec) -> SyntheticBundle:
    """
    One base signal plus n_copies noisy copies sharing its coverage mask.

    The base and its copies are drawn as a family: a copy drifts from the
    base error by roughly copy_flip_rate * (1 - 2e), so a base drawn near the
    top of error_range can push copies out of it. Families are redrawn until
    every member lands inside the range. Signals beyond 1 + n_copies are
    independent with their own masks.
    """
    rng = np.random.default_rng(spec.seed)
    train_X, train_truth, test_X, test_truth = _split(rng, spec)

    rows = _coverage_rows(rng, spec.n_train, spec.coverage)
    reference = train_truth[rows].astype(float)

    def draw_family():
        target = spec.base_error if spec.base_error is not None else rng.uniform(*spec.error_range)
        base = _flip(rng, reference, target)
        family = [base] + [_flip(rng, base, spec.copy_flip_rate) for _ in range(spec.n_copies)]
        return family, [float(np.mean(votes != reference)) for votes in family]

    family, errors = _resample(draw_family, spec.error_range, "base signal and copies")
    columns = []
    for votes in family:
        column = np.full(spec.n_train, ABSTAIN)
        column[rows] = votes
        columns.append(column)

    for index in range(1 + spec.n_copies, spec.n_signals):
        column, error = _independent_signal(rng, train_truth, spec, index)
        columns.append(column)
        errors.append(error)

    return _bundle(spec, train_X, train_truth, test_X, test_truth, columns, errors)


def generate_independent(spec: SyntheticSpec) -> SyntheticBundle:
    """n_signals signals, each with its own error draw and coverage mask"""
    if spec.n_copies:
        raise ValueError("the independent benchmark has no copies; set n_copies=0")
    rng = np.random.default_rng(spec.seed)
    train_X, train_truth, test_X, test_truth = _split(rng, spec)

    columns, errors = [], []
    for index in range(spec.n_signals):
        column, error = _independent_signal(rng, train_truth, spec, index)
        columns.append(column)
        errors.append(error)

    return _bundle(spec, train_X, train_truth, test_X, test_truth, columns, errors)


def generate(spec: SyntheticSpec) -> SyntheticBundle:
    """Dispatch on spec.benchmark"""
    if spec.benchmark == Benchmark.INDEPENDENT:
        return generate_independent(spec)
    return generate_dependent(spec)


# ============================================================================
# CLUSTER FEATURES
# ============================================================================

def _squared_distances(X: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    distances = (
        np.sum(X ** 2, axis=1)[:, None]
        - 2.0 * X @ centroids.T
        + np.sum(centroids ** 2, axis=1)[None, :]
    )
    return np.maximum(distances, 0.0)


def _kmeans_plus_plus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n_examples = X.shape[0]
    centroids = np.empty((k, X.shape[1]))
    centroids[0] = X[rng.integers(n_examples)]
    closest = _squared_distances(X, centroids[:1])[:, 0]
    for index in range(1, k):
        total = closest.sum()
        if total > 0.0:
            choice = rng.choice(n_examples, p=closest / total)
        else:
            choice = rng.integers(n_examples)
        centroids[index] = X[choice]
        closest = np.minimum(closest, _squared_distances(X, centroids[index:index + 1])[:, 0])
    return centroids


def _lloyd(X: np.ndarray, k: int, seed: int, max_iters: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    centroids = _kmeans_plus_plus(X, k, rng)
    assignment = None
    for iteration in range(max_iters):
        distances = _squared_distances(X, centroids)
        updated = np.argmin(distances, axis=1)
        if assignment is not None and np.array_equal(updated, assignment):
            logger.debug(f"k-means converged after {iteration} iterations")
            break
        assignment = updated

        counts = np.bincount(assignment, minlength=k)
        sums = np.zeros_like(centroids)
        np.add.at(sums, assignment, X)
        filled = counts > 0
        centroids[filled] = sums[filled] / counts[filled, None]

        empty = np.flatnonzero(~filled)
        if empty.size:
            # reseed each empty cluster at the points farthest from their centroid
            own = distances[np.arange(X.shape[0]), assignment]
            farthest = np.argsort(own)[::-1][:empty.size]
            centroids[empty] = X[farthest]
            assignment = None
    else:
        assignment = np.argmin(_squared_distances(X, centroids), axis=1)
    return assignment


def kmeans_features(
    X: np.ndarray,
    k: int,
    seed: int = 0,
    max_iters: int = 100,
    minibatch: bool = False,
    batch_size: int = 1024,
) -> np.ndarray:
    """One-hot cluster membership from k-means++ seeded Lloyd iterations, or sklearn mini-batch k-means"""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"features must be a non-empty 2-d matrix, got shape {X.shape}")
    if not 1 <= k <= X.shape[0]:
        raise ValueError(f"k={k} must lie in [1, {X.shape[0]}]")

    if minibatch:
        model = MiniBatchKMeans(
            n_clusters=k,
            random_state=seed,
            batch_size=batch_size,
            max_iter=max_iters,
            n_init=3,
        )
        assignment = model.fit_predict(X)
    else:
        assignment = _lloyd(X, k, seed, max_iters)

    logger.info(f"Clustered {X.shape[0]} examples into {k} clusters ({np.unique(assignment).size} occupied)")
    return np.eye(k)[assignment]
