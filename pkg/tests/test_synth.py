"""
Tests for the synthetic benchmarks and cluster features.
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from pydantic import ValidationError

from dcws.errors import InfeasibleSpecError
from dcws.models.synth import Benchmark, SyntheticSpec
from dcws.services.core import accuracy, majority_vote_prior
from dcws.services.synth import generate, generate_dependent, generate_independent, kmeans_features

SMALL = {"n_train": 2000, "n_test": 400, "n_features": 20}


@pytest.fixture(scope="module")
def dependent():
    return generate_dependent(SyntheticSpec.dependent_preset(seed=1, **SMALL))


@pytest.fixture(scope="module")
def independent():
    return generate_independent(SyntheticSpec.independent_preset(seed=2, **SMALL))


class TestSpec:
    def test_range_from_text(self):
        spec = SyntheticSpec(error_range="0.3, 0.4", feature_agreement_range="(0.6,0.7)")
        assert spec.error_range == (0.3, 0.4)
        assert spec.feature_agreement_range == (0.6, 0.7)

    def test_reversed_range_rejected(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(error_range=(0.45, 0.35))

    def test_agreement_must_beat_chance(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(feature_agreement_range=(0.4, 0.6))

    def test_copies_leave_room_for_base(self):
        with pytest.raises(ValidationError):
            SyntheticSpec(n_signals=5, n_copies=5)

    def test_presets(self):
        assert SyntheticSpec.dependent_preset().n_train == 32000
        independent = SyntheticSpec.from_preset("independent")
        assert independent.benchmark == Benchmark.INDEPENDENT
        assert (independent.n_signals, independent.n_copies, independent.coverage) == (20, 0, 1.0)
        assert SyntheticSpec.from_preset("pinned").base_error == 0.375
        with pytest.raises(ValueError):
            SyntheticSpec.from_preset("unknown")

    def test_base_error_text_none(self):
        assert SyntheticSpec(base_error="none").base_error is None


class TestDependent:
    def test_shapes(self, dependent):
        assert dependent.train_X.shape == (2000, 20)
        assert dependent.test_X.shape == (400, 20)
        assert dependent.signals.n_signals == 10
        assert set(np.unique(dependent.train_X)) <= {0.0, 1.0}

    def test_realised_errors_in_range(self, dependent):
        assert np.all((dependent.error_rates >= 0.35) & (dependent.error_rates <= 0.45))
        votes = dependent.signals.votes
        for index in range(10):
            covered = votes[:, index] != -1.0
            measured = np.mean(votes[covered, index] != dependent.train_truth[covered])
            assert measured == pytest.approx(dependent.error_rates[index])

    def test_copies_share_mask_and_mostly_agree(self, dependent):
        mask = dependent.signals.mask
        assert_array_equal(mask, np.repeat(mask[:, :1], 10, axis=1))
        assert mask[:, 0].mean() == pytest.approx(0.5, abs=0.02)
        base = dependent.signals.votes[mask[:, 0], 0]
        for copy in range(1, 10):
            agreement = np.mean(dependent.signals.votes[mask[:, 0], copy] == base)
            assert agreement == pytest.approx(0.95, abs=0.03)

    def test_features_agree_with_label_at_spec_rate(self, dependent):
        agreement = np.mean(dependent.train_X == dependent.train_truth[:, None])
        assert 0.55 <= agreement <= 0.65

    def test_same_seed_same_bundle(self, dependent):
        again = generate(SyntheticSpec.dependent_preset(seed=1, **SMALL))
        assert again.fingerprint() == dependent.fingerprint()
        other = generate(SyntheticSpec.dependent_preset(seed=3, **SMALL))
        assert other.fingerprint() != dependent.fingerprint()

    def test_extra_signals_are_independent(self):
        bundle = generate_dependent(SyntheticSpec(n_signals=6, n_copies=3, seed=4, **SMALL))
        mask = bundle.signals.mask
        assert_array_equal(mask[:, 1:4], np.repeat(mask[:, :1], 3, axis=1))
        assert not np.array_equal(mask[:, 4], mask[:, 0])
        assert bundle.global_coverage() > mask[:, 0].mean()

    def test_majority_vote_tracks_base_error(self):
        bundle = generate(SyntheticSpec.pinned_preset(seed=5, **SMALL))
        covered = bundle.signals.mask.any(axis=1)
        signals = bundle.signals.subset(np.flatnonzero(covered))
        score = accuracy(majority_vote_prior(signals), bundle.train_truth[covered])
        assert score == pytest.approx(1.0 - bundle.error_rates[0], abs=0.01)
        assert score == pytest.approx(0.625, abs=0.03)

    def test_unreachable_error_range(self):
        spec = SyntheticSpec(base_error=0.1, seed=0, **SMALL)
        with pytest.raises(InfeasibleSpecError):
            generate_dependent(spec)


class TestIndependent:
    def test_full_coverage_and_errors(self, independent):
        assert independent.signals.n_signals == 20
        assert independent.signals.mask.all()
        assert np.all((independent.error_rates >= 0.35) & (independent.error_rates <= 0.45))

    def test_signals_are_not_copies(self, independent):
        votes = independent.signals.votes
        agreement = np.mean(votes[:, 0] == votes[:, 1])
        assert agreement < 0.8

    def test_copies_rejected(self):
        spec = SyntheticSpec(benchmark=Benchmark.INDEPENDENT, **SMALL)
        with pytest.raises(ValueError):
            generate_independent(spec)


class TestKMeans:
    def test_two_blobs(self):
        rng = np.random.default_rng(0)
        X = np.vstack([rng.normal(0.0, 0.1, (30, 2)), rng.normal(5.0, 0.1, (30, 2))])
        onehot = kmeans_features(X, 2, seed=0)
        assert onehot.shape == (60, 2)
        assert_allclose(onehot.sum(axis=1), 1.0)
        clusters = onehot.argmax(axis=1)
        assert len(set(clusters[:30])) == 1 and len(set(clusters[30:])) == 1
        assert clusters[0] != clusters[30]

    def test_deterministic_per_seed(self):
        X = np.random.default_rng(1).random((50, 3))
        assert_array_equal(kmeans_features(X, 4, seed=7), kmeans_features(X, 4, seed=7))

    def test_single_cluster(self):
        X = np.random.default_rng(2).random((10, 2))
        assert_array_equal(kmeans_features(X, 1), np.ones((10, 1)))

    def test_more_clusters_than_distinct_points(self):
        X = np.ones((10, 2))
        onehot = kmeans_features(X, 3, seed=0, max_iters=20)
        assert onehot.shape == (10, 3)
        assert_allclose(onehot.sum(axis=1), 1.0)

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            kmeans_features(np.ones((3, 2)), 4)

    def test_minibatch(self):
        rng = np.random.default_rng(3)
        X = np.vstack([rng.normal(0.0, 0.1, (40, 2)), rng.normal(5.0, 0.1, (40, 2))])
        onehot = kmeans_features(X, 2, seed=0, minibatch=True, batch_size=32)
        clusters = onehot.argmax(axis=1)
        assert clusters[0] != clusters[40]
        assert len(set(clusters[:40])) == 1
