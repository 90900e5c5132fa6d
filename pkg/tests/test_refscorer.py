import dataclasses

import numpy as np
import pytest

from riskrank.data import EQUIVALENT
from riskrank.errors import DataError, DegenerateTrainingError
from riskrank.metrics import build_metric_matrix, default_descriptors
from riskrank.refscorer import (
    LinearScorer,
    ScorerConfig,
    bootstrap_ensemble,
    fit_reference,
    logistic_loss_and_grad,
    score_reference,
)
from tests.conftest import column_workload


def separable_workload(n=60, seed=0):
    """Equivalents share the year, inequivalents never do."""
    rng = np.random.default_rng(seed)
    years, truth = [], []
    for i in range(n):
        eq = i % 2 == 0
        y = int(rng.integers(1990, 2010))
        years.append((y, y if eq else y + 1 + int(rng.integers(0, 3))))
        truth.append(1 if eq else 0)
    w = column_workload({"year": years}, truth, schema={"year": "number"})
    matrix = build_metric_matrix(w, default_descriptors(w.schema))
    return w, matrix


class TestFit:
    def test_separable_data_fits_perfectly(self):
        w, matrix = separable_workload()
        scorer = fit_reference(w, matrix)
        probs = score_reference(scorer, matrix)
        truth = w.ground_truth_array()
        assert ((probs >= 0.5).astype(int) == truth).all()

    def test_zero_epochs_gives_class_prior(self):
        w, matrix = separable_workload()
        scorer = fit_reference(w, matrix, ScorerConfig(epochs=0))
        probs = score_reference(scorer, matrix)
        prior = w.ground_truth_array().mean()
        np.testing.assert_allclose(probs, prior, atol=1e-12)

    def test_deterministic(self):
        w, matrix = separable_workload()
        a = fit_reference(w, matrix, ScorerConfig(seed=4))
        b = fit_reference(w, matrix, ScorerConfig(seed=4))
        np.testing.assert_array_equal(a.coef, b.coef)
        assert a.intercept == b.intercept

    def test_single_class_rejected(self):
        w, matrix = separable_workload()
        pairs = tuple(dataclasses.replace(p, ground_truth=EQUIVALENT,
                                          risk_label=None) for p in w.pairs)
        w = dataclasses.replace(w, pairs=pairs)
        with pytest.raises(DegenerateTrainingError):
            fit_reference(w, matrix)

    def test_held_out_separable_pair(self):
        w, matrix = separable_workload()
        scorer = fit_reference(w, matrix)
        held = column_workload({"year": [(1993, 1993), (1993, 1999)]}, [1, 0],
                               schema={"year": "number"})
        held_matrix = build_metric_matrix(held, default_descriptors(held.schema))
        probs = score_reference(scorer, held_matrix)
        assert probs[0] > 0.5 > probs[1]


class TestScore:
    def test_all_zero_scorer_gives_half(self):
        w, matrix = separable_workload(n=10)
        scorer = LinearScorer(coef=np.zeros(2), intercept=0.0,
                              column_mean=np.zeros(2), column_scale=np.ones(2))
        np.testing.assert_allclose(score_reference(scorer, matrix), 0.5)

    def test_coefficient_sign_flip_mirrors_probability(self):
        w, matrix = separable_workload()
        scorer = fit_reference(w, matrix)
        flipped = LinearScorer(coef=-scorer.coef, intercept=-scorer.intercept,
                               column_mean=scorer.column_mean,
                               column_scale=scorer.column_scale)
        p = score_reference(scorer, matrix)
        q = score_reference(flipped, matrix)
        np.testing.assert_allclose(q, 1.0 - p, atol=1e-12)

    def test_column_mismatch_rejected(self):
        w, matrix = separable_workload()
        scorer = LinearScorer(coef=np.zeros(5), intercept=0.0,
                              column_mean=np.zeros(5), column_scale=np.ones(5))
        with pytest.raises(DataError):
            score_reference(scorer, matrix)

    def test_scores_invariant_to_pair_order(self):
        w, matrix = separable_workload()
        scorer = fit_reference(w, matrix)
        probs = score_reference(scorer, matrix)
        perm = np.random.default_rng(0).permutation(len(w.pairs))
        shuffled = matrix.take_rows(perm)
        np.testing.assert_allclose(score_reference(scorer, shuffled),
                                   probs[perm])


class TestGradient:
    def test_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(30, 4))
        y = rng.integers(0, 2, 30).astype(float)
        coef = rng.normal(size=4)
        b = 0.3
        _, g_coef, g_b = logistic_loss_and_grad(coef, b, x, y, l2=1e-3)
        h = 1e-6
        for k in range(4):
            up, dn = coef.copy(), coef.copy()
            up[k] += h
            dn[k] -= h
            fd = (logistic_loss_and_grad(up, b, x, y, 1e-3)[0]
                  - logistic_loss_and_grad(dn, b, x, y, 1e-3)[0]) / (2 * h)
            assert g_coef[k] == pytest.approx(fd, rel=1e-4, abs=1e-8)
        fd_b = (logistic_loss_and_grad(coef, b + h, x, y, 1e-3)[0]
                - logistic_loss_and_grad(coef, b - h, x, y, 1e-3)[0]) / (2 * h)
        assert g_b == pytest.approx(fd_b, rel=1e-4, abs=1e-8)


class TestEnsemble:
    def test_bootstrap_shape_and_determinism(self):
        w, matrix = separable_workload(n=30)
        a = bootstrap_ensemble(w, matrix, matrix, 4, seed=2)
        b = bootstrap_ensemble(w, matrix, matrix, 4, seed=2)
        assert a.shape == (30, 4)
        np.testing.assert_array_equal(a, b)
        assert ((a > 0) & (a < 1)).all()
