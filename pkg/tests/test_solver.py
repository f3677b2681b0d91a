"""
Tests for the Lagrangian, its gradient and the saddle-point fits.
"""

import logging

import numpy as np
import pytest
from numpy.testing import assert_allclose
from pydantic import ValidationError

from dcws.errors import DimensionMismatchError
from dcws.models.constraints import BoundVector
from dcws.models.network import Architecture, LabelModelSpec
from dcws.models.signals import ABSTAIN, WeakSignalSet
from dcws.models.solver import PriorMode, SolverConfig, TrainState
from dcws.models.synth import SyntheticSpec
from dcws.services.constraints import build_constraint_system, violations
from dcws.services.core import majority_vote_prior, uniform_prior
from dcws.services.solver import (
    build_prior,
    fit_dcws,
    fit_direct,
    lagrangian_value,
    objective_value,
    output_gradient,
    predict,
    solve_direct,
)
from dcws.services.synth import generate

LINEAR = LabelModelSpec(architecture=Architecture.LINEAR, dropout_rate=0.0)


def _numeric_output_gradient(f, prior, system, lambdas, slacks, penalty, epsilon=1e-6):
    grad = np.zeros_like(f)
    for index in np.ndindex(f.shape):
        upper, lower = f.copy(), f.copy()
        upper[index] += epsilon
        lower[index] -= epsilon
        grad[index] = (
            lagrangian_value(upper, prior, system, lambdas, slacks, penalty)
            - lagrangian_value(lower, prior, system, lambdas, slacks, penalty)
        ) / (2.0 * epsilon)
    return grad


class TestConfig:
    def test_defaults(self):
        config = SolverConfig()
        assert config.slack_penalty == 10.0
        assert config.prior_mode == PriorMode.MAJORITY
        assert config.use_slack and config.use_constraints

    def test_rates_positive(self):
        with pytest.raises(ValidationError):
            SolverConfig(lr_lambda=0.0)

    def test_slack_rate_at_most_one(self):
        assert SolverConfig().lr_xi == 1.0
        with pytest.raises(ValidationError):
            SolverConfig(lr_xi=1.5)

    def test_state_rejects_negative_multipliers(self):
        with pytest.raises(ValidationError):
            TrainState(lambdas=[-0.1], slacks=[0.0])


class TestLagrangian:
    def test_value_at_prior_is_multiplier_term(self, tiny_signals):
        signals, bounds = tiny_signals
        system = build_constraint_system(signals, bounds)
        prior = uniform_prior(4, 1)
        value = lagrangian_value(prior, prior, system, np.array([1.0, 2.0]), np.array([0.1, 0.0]), 10.0)
        # 10 * 0.1 + 1 * (0.4 - 0.1) + 2 * 0.6
        assert value == pytest.approx(2.5)

    def test_no_prior_drops_regulariser(self, tiny_signals):
        signals, bounds = tiny_signals
        system = build_constraint_system(signals, bounds)
        f = np.full((4, 1), 0.5)
        assert lagrangian_value(f, None, system, np.zeros(2), np.zeros(2), 10.0) == 0.0

    def test_negative_multipliers_rejected(self, tiny_signals):
        signals, bounds = tiny_signals
        system = build_constraint_system(signals, bounds)
        with pytest.raises(ValueError):
            lagrangian_value(np.full(4, 0.5), None, system, np.array([-1.0, 0.0]), np.zeros(2), 1.0)

    def test_prior_shape_mismatch(self, tiny_signals):
        signals, bounds = tiny_signals
        system = build_constraint_system(signals, bounds)
        with pytest.raises(DimensionMismatchError):
            lagrangian_value(np.full(4, 0.5), np.full(3, 0.5), system, np.zeros(2), np.zeros(2), 1.0)

    def test_gradient_at_prior_without_multipliers_is_zero(self, random_signals):
        signals = random_signals(seed=2)
        system = build_constraint_system(signals)
        prior = majority_vote_prior(signals)
        grad = output_gradient(prior, prior, system, np.zeros(signals.n_signals))
        assert_allclose(grad, 0.0)

    @pytest.mark.parametrize("seed", range(10))
    def test_output_gradient_matches_finite_differences(self, random_signals, seed):
        signals = random_signals(n_examples=12, n_signals=3, seed=seed)
        system = build_constraint_system(signals, BoundVector(bounds=[0.1, 0.2, 0.3]))
        rng = np.random.default_rng(seed)
        f = rng.random((12, 1))
        prior = majority_vote_prior(signals).probs
        lambdas = rng.random(3) * 5.0
        slacks = rng.random(3)
        analytic = output_gradient(f, prior, system, lambdas)
        numeric = _numeric_output_gradient(f, prior, system, lambdas, slacks, 10.0)
        error = np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), 1e-12)
        assert error <= 1e-6

    def test_multiclass_output_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(7)
        votes = rng.random((8, 4))
        votes[rng.random(votes.shape) < 0.3] = ABSTAIN
        votes[0] = rng.random(4)
        signals = WeakSignalSet(votes=votes, signal_class=[0, 1, 2, 1], n_classes=3)
        system = build_constraint_system(signals)
        f = rng.dirichlet(np.ones(3), size=8)
        prior = majority_vote_prior(signals).probs
        lambdas = rng.random(4)
        analytic = output_gradient(f, prior, system, lambdas)
        numeric = _numeric_output_gradient(f, prior, system, lambdas, np.zeros(4), 10.0)
        assert_allclose(analytic, numeric, atol=1e-6)


class TestFitDCWS:
    def test_multipliers_and_slacks_stay_non_negative(self, random_signals):
        signals = random_signals(n_examples=25, n_signals=4, seed=1)
        X = np.random.default_rng(1).standard_normal((25, 3))
        seen = []

        def check(epoch, lambdas, slacks):
            assert np.all(lambdas >= 0.0) and np.all(slacks >= 0.0)
            seen.append(epoch)

        config = SolverConfig(max_epochs=150, lr_lambda=0.5, lr_xi=0.5, slack_penalty=1.0)
        spec = LabelModelSpec(hidden_units=8)
        _, state = fit_dcws(X, signals, None, spec, config, callback=check)
        assert seen == list(range(1, state.epoch + 1))
        assert [record.epoch for record in state.history] == seen

    def test_multipliers_capped_by_slack_penalty(self, random_signals):
        # soft votes with zero bounds leave every constraint violated, so each multiplier rises to C
        signals = random_signals(n_examples=25, n_signals=4, seed=2)
        X = np.random.default_rng(2).standard_normal((25, 3))
        peaks = []

        def record(epoch, lambdas, slacks):
            peaks.append(lambdas.max())

        config = SolverConfig(max_epochs=60, lr_lambda=1.0, slack_penalty=2.0)
        _, state = fit_dcws(X, signals, None, LabelModelSpec(hidden_units=8), config, callback=record)
        assert max(peaks) <= 2.0
        assert_allclose(state.lambdas, 2.0)
        assert np.all(state.slacks > 0.0)
        assert state.history[-1].max_violation == pytest.approx(0.0, abs=1e-9)

    def test_slacks_stay_bounded_on_benchmark_data(self):
        bundle = generate(SyntheticSpec.pinned_preset(n_train=400, n_test=50, n_features=10, seed=3))
        covered = np.flatnonzero(bundle.signals.mask.any(axis=1))
        signals = bundle.signals.subset(covered)
        config = SolverConfig(max_epochs=100)
        _, state = fit_dcws(bundle.train_X[covered], signals, None, LabelModelSpec(hidden_units=16), config)
        assert np.all(state.lambdas <= config.slack_penalty)
        # a slack never needs to exceed the number of examples its signal covers
        assert np.all(state.slacks <= signals.mask.sum(axis=0))

    def test_converges_with_inactive_constraints(self, tiny_signals):
        signals, _ = tiny_signals
        loose = BoundVector(bounds=[1.0, 1.0])
        config = SolverConfig(prior_mode=PriorMode.UNIFORM, lr_theta=0.05, max_epochs=3000)
        labels, state = fit_dcws(np.eye(4), signals, loose, LINEAR, config)
        system = build_constraint_system(signals, loose)
        assert state.converged and state.epoch < 3000
        assert_allclose(state.lambdas, 0.0)
        assert violations(system, labels, state.slacks).max() <= config.convergence_tol
        assert_allclose(labels.probs, 0.5, atol=0.05)

    def test_last_record_describes_returned_labels(self, random_signals):
        signals = random_signals(n_examples=20, n_signals=3, seed=14)
        X = np.random.default_rng(14).standard_normal((20, 3))
        config = SolverConfig(max_epochs=30, lr_xi=0.3)
        spec = LabelModelSpec(hidden_units=8, dropout_rate=0.2)
        labels, state = fit_dcws(X, signals, None, spec, config)
        residual = violations(build_constraint_system(signals), labels, state.slacks)
        assert not state.stalled
        assert state.history[-1].max_violation == pytest.approx(residual.max(), rel=1e-12, abs=1e-12)
        assert state.history[-1].mean_slack == pytest.approx(state.slacks.mean())

    def test_grid_oracle(self, tiny_signals, grid_oracle):
        signals, bounds = tiny_signals
        config = SolverConfig(
            prior_mode=PriorMode.UNIFORM,
            slack_penalty=1.0,
            max_epochs=4000,
            convergence_tol=1e-12,
            stall_patience=5000,
            lr_theta=0.02,
            lr_lambda=0.05,
            lr_xi=0.05,
        )
        labels, state = fit_dcws(np.eye(4), signals, bounds, LINEAR, config)
        system = build_constraint_system(signals, bounds)
        prior = uniform_prior(4, 1)
        best, best_labels = grid_oracle(signals, bounds, prior, config.slack_penalty)
        assert best == pytest.approx(0.26)
        assert_allclose(best_labels[:, 0], [0.7, 0.7, 0.2, 0.2])
        assert objective_value(labels, prior, system, config.slack_penalty) == pytest.approx(best, abs=1e-2)
        assert not state.stalled

    def test_unconstrained_regresses_to_prior(self, random_signals):
        signals = random_signals(n_examples=8, n_signals=3, seed=4)
        config = SolverConfig(use_constraints=False, max_epochs=3000, convergence_tol=1e-12, lr_theta=0.1)
        labels, state = fit_dcws(np.eye(8), signals, None, LINEAR, config)
        prior = majority_vote_prior(signals).probs
        assert np.mean((labels.probs - prior) ** 2) <= 1e-3
        assert_allclose(state.lambdas, 0.0)

    def test_perfect_signal_is_reproduced(self):
        signals = WeakSignalSet(votes=[[1.0], [0.0], [1.0], [0.0]], signal_class=[1])
        config = SolverConfig(max_epochs=1000, lr_theta=0.05)
        labels, _ = fit_dcws(np.eye(4), signals, None, LINEAR, config)
        assert_allclose(labels.probs[:, 0], [1.0, 0.0, 1.0, 0.0], atol=0.05)

    def test_identical_rows_receive_identical_labels(self, random_signals):
        signals = random_signals(n_examples=10, n_signals=3, seed=6)
        X = np.random.default_rng(6).standard_normal((10, 4))
        X[7] = X[2]
        labels, _ = fit_dcws(X, signals, None, LabelModelSpec(hidden_units=8), SolverConfig(max_epochs=50))
        assert labels.probs[7, 0] == pytest.approx(labels.probs[2, 0], rel=1e-12)

    def test_same_seed_is_reproducible(self, random_signals):
        signals = random_signals(n_examples=15, seed=8)
        X = np.random.default_rng(8).standard_normal((15, 3))
        spec = LabelModelSpec(hidden_units=8, dropout_rate=0.3)
        config = SolverConfig(max_epochs=40, seed=3)
        first, first_state = fit_dcws(X, signals, None, spec, config)
        second, second_state = fit_dcws(X, signals, None, spec, config)
        assert np.array_equal(first.probs, second.probs)
        assert first_state.history == second_state.history

    def test_training_log_lines(self, random_signals, caplog):
        signals = random_signals(n_examples=10, seed=9)
        with caplog.at_level(logging.INFO, logger="dcws.training"):
            _, state = fit_dcws(np.eye(10), signals, None, LINEAR, SolverConfig(max_epochs=5))
        lines = [record.getMessage() for record in caplog.records if record.name == "dcws.training"]
        assert lines[0] == "epoch\tlagrangian\tmax_violation\tmean_slack"
        assert len(lines) == state.epoch + 1
        assert all(len(line.split("\t")) == 4 for line in lines)

    def test_feature_row_mismatch(self, tiny_signals):
        signals, bounds = tiny_signals
        with pytest.raises(DimensionMismatchError):
            fit_dcws(np.eye(3), signals, bounds, LINEAR)

    def test_predict_checks_spec(self, tiny_signals):
        signals, bounds = tiny_signals
        _, state = fit_dcws(np.eye(4), signals, bounds, LINEAR, SolverConfig(max_epochs=3))
        with pytest.raises(ValueError):
            predict(state.params, LabelModelSpec(), np.eye(4))

    def test_multiclass_fit_produces_distributions(self):
        rng = np.random.default_rng(12)
        votes = rng.random((12, 3))
        signals = WeakSignalSet(votes=votes, signal_class=[0, 1, 2], n_classes=3)
        labels, state = fit_dcws(
            rng.standard_normal((12, 4)), signals, None, LabelModelSpec(hidden_units=6), SolverConfig(max_epochs=20)
        )
        assert labels.probs.shape == (12, 3)
        assert_allclose(labels.probs.sum(axis=1), 1.0)
        assert state.params.spec.n_outputs == 3


class TestDirect:
    def test_grid_oracle(self, tiny_signals, grid_oracle):
        signals, bounds = tiny_signals
        prior = uniform_prior(4, 1)
        config = SolverConfig(max_epochs=3000, convergence_tol=1e-12, stall_patience=5000, lr_theta=0.05, lr_lambda=0.05)
        labels = fit_direct(signals, bounds, prior, config)
        system = build_constraint_system(signals, bounds)
        best, _ = grid_oracle(signals, bounds, prior, config.slack_penalty)
        assert objective_value(labels, prior, system, config.slack_penalty) == pytest.approx(best, abs=1e-2)

    def test_loose_bounds_return_prior(self, random_signals):
        signals = random_signals(seed=5)
        prior = majority_vote_prior(signals)
        labels = fit_direct(signals, BoundVector(bounds=np.ones(signals.n_signals)), prior, SolverConfig(max_epochs=50))
        assert_allclose(labels.probs, prior.probs)

    def test_single_hard_signal_is_its_prior(self):
        signals = WeakSignalSet(votes=[[1.0], [0.0], [ABSTAIN]], signal_class=[1])
        prior = majority_vote_prior(signals)
        labels = fit_direct(signals, None, prior, SolverConfig(max_epochs=100))
        assert_allclose(labels.probs[:, 0], [1.0, 0.0, 0.5])

    def test_labels_stay_in_unit_interval(self, random_signals):
        signals = random_signals(seed=10)
        labels, state = solve_direct(signals, None, None, SolverConfig(max_epochs=200, lr_theta=0.5))
        assert labels.probs.min() >= 0.0 and labels.probs.max() <= 1.0
        assert state.params is None

    def test_build_prior_modes(self, random_signals):
        signals = random_signals(seed=1)
        assert build_prior(signals, PriorMode.NONE) is None
        assert_allclose(build_prior(signals, PriorMode.UNIFORM).probs, 0.5)
        assert_allclose(build_prior(signals, "majority").probs, majority_vote_prior(signals).probs)

    def test_violations_of_solution_are_small(self, tiny_signals):
        signals, bounds = tiny_signals
        config = SolverConfig(max_epochs=3000, convergence_tol=1e-12, stall_patience=5000, lr_theta=0.05, lr_lambda=0.05)
        labels = fit_direct(signals, bounds, uniform_prior(4, 1), config)
        system = build_constraint_system(signals, bounds)
        assert violations(system, labels).max() <= 1e-2

    def test_reports_convergence_on_returned_labels(self, tiny_signals):
        signals, bounds = tiny_signals
        config = SolverConfig(slack_penalty=1.0, lr_theta=0.05, lr_lambda=0.05, max_epochs=3000)
        labels, state = solve_direct(signals, bounds, uniform_prior(4, 1), config)
        system = build_constraint_system(signals, bounds)
        assert state.converged and state.epoch < 3000
        assert violations(system, labels, state.slacks).max() <= config.convergence_tol
        assert_allclose(labels.probs[:, 0], [0.7, 0.7, 0.2, 0.2], atol=0.01)
        assert_allclose(state.lambdas, [0.4, 0.6], atol=0.01)

    def test_contradictory_signals_stall_at_lowest_violation(self, caplog):
        # with zero bounds and no slack these ask for y0 + y1 >= 2 and y0 + y1 <= 0
        signals = WeakSignalSet(votes=[[1.0, 0.0], [1.0, 0.0]], signal_class=[1, 1])
        config = SolverConfig(use_slack=False, max_epochs=2000, stall_patience=50)
        with caplog.at_level(logging.WARNING):
            labels, state = solve_direct(signals, None, majority_vote_prior(signals), config)
        assert state.stalled and not state.converged
        assert state.epoch == 51
        assert "max violation has not decreased" in state.diagnostic
        assert_allclose(labels.probs[:, 0], [0.5, 0.5])
        assert "Stalled" in caplog.text
