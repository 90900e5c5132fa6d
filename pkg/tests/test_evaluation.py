import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from riskrank.errors import DataError
from riskrank.evaluation import (
    ClusterModel,
    ambiguity_score,
    fit_cluster_model,
    kmeans_fit,
    roc_auroc,
    select_active_batch,
    trust_risk,
    trust_risk_scores,
    uncertainty_score,
)


def mann_whitney_auroc(scores, labels):
    """O(P*N) pair-counting oracle with ties worth one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (len(pos) * len(neg))


class TestRocAuroc:
    def test_constant_scores_exactly_half(self):
        curve = roc_auroc([0.3] * 10, [1, 0] * 5)
        assert curve.auroc == 0.5

    def test_perfect_separation(self):
        assert roc_auroc([3, 2, 1, 0], [1, 1, 0, 0]).auroc == 1.0

    def test_hand_counted_case(self):
        assert roc_auroc([0.9, 0.8, 0.7, 0.6], [1, 0, 1, 0]).auroc == 0.75

    def test_single_class_rejected(self):
        with pytest.raises(DataError):
            roc_auroc([1.0, 2.0], [1, 1])

    def test_curve_anchors_and_monotonicity(self):
        rng = np.random.default_rng(1)
        s = rng.random(200)
        y = rng.integers(0, 2, 200)
        y[0], y[1] = 0, 1
        curve = roc_auroc(s, y)
        assert (curve.fpr[0], curve.tpr[0]) == (0.0, 0.0)
        assert (curve.fpr[-1], curve.tpr[-1]) == (1.0, 1.0)
        assert (np.diff(curve.fpr) >= 0).all()
        assert (np.diff(curve.tpr) >= 0).all()
        assert curve.thresholds[0] == np.inf

    def test_matches_oracle_on_random_inputs(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            n = int(rng.integers(2, 120))
            scores = np.round(rng.random(n), 2)  # roundings force ties
            labels = rng.integers(0, 2, n)
            labels[0], labels[1] = 1, 0
            want = mann_whitney_auroc(scores, labels)
            assert roc_auroc(scores, labels).auroc == pytest.approx(
                want, abs=1e-12)

    @given(st.integers(3, 60), st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_invariant_under_increasing_transform(self, n, seed):
        rng = np.random.default_rng(seed)
        scores = rng.random(n)
        labels = rng.integers(0, 2, n)
        labels[:2] = (0, 1)
        a = roc_auroc(scores, labels).auroc
        b = roc_auroc(np.exp(3.0 * scores) + 5.0, labels).auroc
        assert a == pytest.approx(b, abs=1e-12)


class TestSimpleScorers:
    def test_ambiguity_anchors(self):
        assert ambiguity_score(0.5) == 0.5
        assert ambiguity_score(0.0) == 0.0
        assert ambiguity_score(1.0) == 0.0
        assert ambiguity_score(0.8) == pytest.approx(0.2)

    def test_uncertainty_anchors(self):
        assert uncertainty_score([0.5, 0.5, 0.5]) == pytest.approx(0.25)
        assert uncertainty_score([1.0, 1.0]) == pytest.approx(0.0)
        assert uncertainty_score([0.2, 0.4]) == pytest.approx(0.21)

    def test_uncertainty_matrix_shape(self):
        out = uncertainty_score(np.array([[0.2, 0.4], [0.5, 0.5]]))
        np.testing.assert_allclose(out, [0.21, 0.25])

    def test_uncertainty_empty_rejected(self):
        with pytest.raises(DataError):
            uncertainty_score([])


class TestTrustRisk:
    def _clusters(self):
        return ClusterModel(
            equivalent_centroids=np.array([[0.0]]),
            inequivalent_centroids=np.array([[10.0]]),
        )

    def test_on_centroid_is_riskless(self):
        assert trust_risk(np.array([0.0]), True, self._clusters()) == 0.0

    def test_equidistant_is_one(self):
        assert trust_risk(np.array([5.0]), True, self._clusters()) == 1.0

    def test_one_dimensional_example(self):
        assert trust_risk(np.array([2.0]), True, self._clusters()) == \
            pytest.approx(0.25)

    def test_scaling_invariance(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=(40, 3))
        truth = rng.integers(0, 2, 40)
        truth[:2] = (0, 1)
        clusters = fit_cluster_model(x, truth, k=3, seed=5)
        matching = rng.integers(0, 2, 40).astype(bool)
        base = trust_risk_scores(x, matching, clusters)
        scaled = ClusterModel(
            equivalent_centroids=7.5 * clusters.equivalent_centroids,
            inequivalent_centroids=7.5 * clusters.inequivalent_centroids)
        rescored = trust_risk_scores(7.5 * x, matching, scaled)
        assert np.argsort(base).tolist() == np.argsort(rescored).tolist()

    def test_kmeans_deterministic(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(50, 4))
        a = kmeans_fit(x, 5, seed=9)
        b = kmeans_fit(x, 5, seed=9)
        np.testing.assert_array_equal(a, b)

    def test_cluster_model_needs_both_classes(self):
        with pytest.raises(DataError):
            fit_cluster_model(np.ones((4, 2)), np.ones(4), k=2, seed=0)


class TestActiveBatch:
    def test_zero_k(self):
        assert select_active_batch([("a", 1.0)], 0) == []

    def test_k_exceeds_remaining(self):
        ranking = [("a", 0.9), ("b", 0.5), ("c", 0.7)]
        assert select_active_batch(ranking, 10, exclude={"b"}) == ["a", "c"]

    def test_tie_break_by_id(self):
        ranking = [("b", 0.9), ("a", 0.9), ("c", 0.1)]
        assert select_active_batch(ranking, 2) == ["a", "b"]

    def test_negative_k_rejected(self):
        with pytest.raises(DataError):
            select_active_batch([], -1)
