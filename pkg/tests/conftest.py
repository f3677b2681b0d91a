"""
DCWS - Shared Test Fixtures
"""

import itertools
import logging

import numpy as np
import pytest

from dcws.config import reset_settings
from dcws.models.constraints import BoundVector
from dcws.models.signals import ABSTAIN, WeakSignalSet
from dcws.services.constraints import build_constraint_system
from dcws.services.solver import objective_value


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run benchmark-scale tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(autouse=True)
def fresh_settings(monkeypatch, tmp_path):
    """Isolate every test from the caller's DCWS_* environment and .env file"""
    for name in ("DCWS_LOG_LEVEL", "DCWS_TRAINING_LOG", "DCWS_OUTPUT_DIR", "DCWS_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    monkeypatch.chdir(tmp_path)
    reset_settings()
    yield
    reset_settings()


@pytest.fixture(autouse=True)
def training_logger():
    """Undo the handlers and propagation the CLI installs on the training logger"""
    logger = logging.getLogger("dcws.training")
    yield logger
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()
    logger.propagate = True
    logger.setLevel(logging.NOTSET)
    logging.getLogger("dcws").setLevel(logging.NOTSET)


# ============================================================================
# TOY INSTANCES
# ============================================================================

@pytest.fixture
def tiny_signals():
    """
    Four examples, two signals.

    Signal 0 votes 1 on examples 0-1 with bound 0.3, so y0 + y1 >= 1.4.
    Signal 1 votes 0 on examples 2-3 with bound 0.2, so y2 + y3 <= 0.4.
    """
    votes = np.array(
        [
            [1.0, ABSTAIN],
            [1.0, ABSTAIN],
            [ABSTAIN, 0.0],
            [ABSTAIN, 0.0],
        ]
    )
    signals = WeakSignalSet(votes=votes, signal_class=[1, 1], n_classes=2)
    bounds = BoundVector(bounds=[0.3, 0.2])
    return signals, bounds


@pytest.fixture
def random_signals():
    """Factory for random binary signal sets with abstentions"""

    def make(n_examples=30, n_signals=4, seed=0, abstain_rate=0.3):
        rng = np.random.default_rng(seed)
        votes = rng.random((n_examples, n_signals))
        votes[rng.random((n_examples, n_signals)) < abstain_rate] = ABSTAIN
        # every signal votes somewhere
        votes[0] = rng.random(n_signals)
        return WeakSignalSet(votes=votes, signal_class=np.ones(n_signals, dtype=int), n_classes=2)

    return make


def grid_minimum(signals, bounds, prior, slack_penalty, step=0.05):
    """Brute-force minimum of the primal objective over labelings on a grid"""
    system = build_constraint_system(signals, bounds)
    grid = np.round(np.arange(0.0, 1.0 + step / 2, step), 10)
    best_value, best_labels = np.inf, None
    for point in itertools.product(grid, repeat=signals.n_examples):
        labels = np.array(point)[:, None]
        value = objective_value(labels, prior, system, slack_penalty)
        if value < best_value:
            best_value, best_labels = value, labels
    return best_value, best_labels


@pytest.fixture
def grid_oracle():
    return grid_minimum
