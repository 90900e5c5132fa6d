"""Reference classifier: a regularized logistic model over the metric
matrix.

This exists so the pipeline runs end-to-end without an external
classifier.  It is deliberately weak and simple; the pairs it gets
confidently wrong are exactly what the risk pipeline is meant to
surface.  Probabilities land in the standard pair-file column, so
downstream stages cannot tell an internal from an external classifier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Workload
from .errors import DataError, DegenerateTrainingError
from .metrics import MetricMatrix


@dataclass(frozen=True)
class ScorerConfig:
    learning_rate: float = 1.0
    epochs: int = 400
    l2: float = 1e-2
    seed: int = 0


@dataclass(frozen=True)
class LinearScorer:
    """Logistic model plus the column standardization fitted with it."""

    coef: np.ndarray
    intercept: float
    column_mean: np.ndarray
    column_scale: np.ndarray

    @property
    def n_columns(self) -> int:
        return self.coef.shape[0]


def _sigmoid(z):
    t = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + t), t / (1.0 + t))


def _standardize(dense: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    return (dense - mean) / scale


def logistic_loss_and_grad(coef: np.ndarray, intercept: float, x: np.ndarray,
                           y: np.ndarray, l2: float):
    """Mean log-loss with an L2 penalty on the coefficients (not the
    intercept), and its gradient; used by fitting and the gradient test."""
    z = x @ coef + intercept
    p = _sigmoid(z)
    eps = 1e-12
    ll = -(y * np.log(np.clip(p, eps, None))
           + (1.0 - y) * np.log(np.clip(1.0 - p, eps, None))).mean()
    loss = float(ll + l2 * (coef @ coef))
    resid = p - y
    g_coef = x.T @ resid / x.shape[0] + 2.0 * l2 * coef
    g_b = float(resid.mean())
    return loss, g_coef, g_b


def fit_reference(train: Workload, matrix: MetricMatrix,
                  cfg: ScorerConfig = ScorerConfig()) -> LinearScorer:
    """Gradient-descent logistic fit on the training split.

    Columns are standardized with the training statistics (constant
    columns collapse to zero); flagged cells contribute zero.  The
    intercept starts at the prior log-odds, so zero epochs yield the
    class prior everywhere.
    """
    y = train.ground_truth_array().astype(np.float64)
    if y.sum() == 0 or y.sum() == y.size:
        raise DegenerateTrainingError("reference scorer needs both classes")
    dense = matrix.dense(0.0)
    mean = dense.mean(axis=0)
    std = dense.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    x = _standardize(dense, mean, scale)

    coef = np.zeros(x.shape[1], dtype=np.float64)
    base = float(y.mean())
    intercept = float(np.log(base / (1.0 - base)))
    for _ in range(cfg.epochs):
        _, g_coef, g_b = logistic_loss_and_grad(coef, intercept, x, y, cfg.l2)
        coef = coef - cfg.learning_rate * g_coef
        intercept = intercept - cfg.learning_rate * g_b
    return LinearScorer(coef=coef, intercept=intercept,
                        column_mean=mean, column_scale=scale)


def score_reference(scorer: LinearScorer, matrix: MetricMatrix) -> np.ndarray:
    """Equivalence probabilities for every pair of the matrix."""
    if matrix.values.shape[1] != scorer.n_columns:
        raise DataError(
            f"matrix has {matrix.values.shape[1]} columns, scorer was fitted "
            f"on {scorer.n_columns}")
    x = _standardize(matrix.dense(0.0), scorer.column_mean, scorer.column_scale)
    p = _sigmoid(x @ scorer.coef + scorer.intercept)
    return np.clip(p, 1e-12, 1.0 - 1e-12)


def bootstrap_ensemble(train: Workload, train_matrix: MetricMatrix,
                       score_matrix: MetricMatrix, n_members: int,
                       cfg: ScorerConfig = ScorerConfig(),
                       seed: int = 0) -> np.ndarray:
    """(pairs, members) probabilities from scorers fitted on bootstrap
    resamples of the training split; feeds the uncertainty baseline."""
    rng = np.random.default_rng(seed)
    n = len(train.pairs)
    out = np.empty((score_matrix.n_pairs, n_members), dtype=np.float64)
    for b in range(n_members):
        for _ in range(100):
            rows = rng.integers(0, n, size=n)
            sub = train.subset(rows.tolist())
            truth = sub.ground_truth_array()
            if 0 < truth.sum() < truth.size:
                break
        scorer = fit_reference(sub, train_matrix.take_rows(rows))
        out[:, b] = score_reference(scorer, score_matrix)
    return out
