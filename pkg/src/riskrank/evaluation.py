"""Ranking-quality measurement and the non-learnable baseline scorers.

Risk labels are the positive class: a mislabeled pair counts as a
positive, a correctly labeled pair as a negative.  Every scorer in this
module emits "higher = riskier" so the ROC code is shared.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Hashable, Iterable

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep of (fpr, tpr) plus the area under it.

    ``points`` start at (0, 0) (threshold +inf) and end at (1, 1); the
    area equals the Mann-Whitney statistic with ties counted 0.5.
    """

    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auroc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def roc_auroc(scores, risk_labels) -> RocCurve:
    """ROC curve and AUROC of risk scores against mislabel indicators.

    Scores are swept at every distinct value (descending); tied scores
    form one group, which makes the trapezoid area exactly the tie-aware
    pair-ordering probability.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(risk_labels)
    if s.shape != y.shape or s.ndim != 1:
        raise DataError("scores and risk labels must be aligned 1-d arrays")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUROC undefined for single-class input")

    order = np.argsort(-s, kind="stable")
    ss, yy = s[order], y[order]
    # one point per distinct score: cumulative counts at group ends
    group_end = np.nonzero(np.concatenate((ss[1:] != ss[:-1], [True])))[0]
    cum_tp = np.cumsum(yy == 1)[group_end]
    cum_fp = np.cumsum(yy == 0)[group_end]
    tpr = np.concatenate(([0.0], cum_tp / n_pos))
    fpr = np.concatenate(([0.0], cum_fp / n_neg))
    thresholds = np.concatenate(([np.inf], ss[group_end]))
    auroc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) * 0.5))
    return RocCurve(thresholds=thresholds, fpr=fpr, tpr=tpr, auroc=auroc)


def save_roc(curve: RocCurve, path) -> None:
    """Plot-ready delimited text: threshold, fpr, tpr per sweep point."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "fpr", "tpr"])
        for t, f, r in zip(curve.thresholds, curve.fpr, curve.tpr):
            writer.writerow([repr(float(t)), repr(float(f)), repr(float(r))])


def ambiguity_score(p):
    """Closeness of the classifier output to 0.5 (0.5 = maximal risk)."""
    p = np.asarray(p, dtype=np.float64)
    out = 0.5 - np.abs(p - 0.5)
    return float(out) if out.ndim == 0 else out


def uncertainty_score(ensemble_probs):
    """p(1-p) of the ensemble-mean probability.

    Accepts one pair's member probabilities (1-d) or a (pairs, members)
    matrix.
    """
    probs = np.asarray(ensemble_probs, dtype=np.float64)
    if probs.size == 0:
        raise DataError("uncertainty needs at least one ensemble member")
    mean = probs.mean(axis=-1)
    out = mean * (1.0 - mean)
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# cluster-distance baseline


def kmeans_fit(x: np.ndarray, k: int, seed: int, max_iter: int = 100) -> np.ndarray:
    """Plain seeded Lloyd iteration; deterministic for a given seed.

    Returns (k', d) centroids with k' = min(k, n_rows).  Empty clusters
    keep their previous centroid.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise DataError("k-means needs a nonempty 2-d matrix")
    k = min(k, x.shape[0])
    rng = np.random.default_rng(seed)
    centroids = x[rng.choice(x.shape[0], size=k, replace=False)].copy()
    assign = np.full(x.shape[0], -1)
    for _ in range(max_iter):
        d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = np.argmin(d2, axis=1)
        if (new_assign == assign).all():
            break
        assign = new_assign
        for c in range(k):
            members = x[assign == c]
            if members.shape[0] > 0:
                centroids[c] = members.mean(axis=0)
    return centroids


@dataclass(frozen=True)
class ClusterModel:
    """Per-class centroids over pair feature vectors, fitted on
    classifier-training data only."""

    equivalent_centroids: np.ndarray
    inequivalent_centroids: np.ndarray

    def centroids_for(self, equivalent_side: bool) -> np.ndarray:
        return self.equivalent_centroids if equivalent_side \
            else self.inequivalent_centroids


def fit_cluster_model(x: np.ndarray, truth: np.ndarray, k: int = 5,
                      seed: int = 0) -> ClusterModel:
    """Cluster each ground-truth class of the training vectors."""
    truth = np.asarray(truth)
    eq = x[truth == 1]
    ineq = x[truth == 0]
    if eq.shape[0] == 0 or ineq.shape[0] == 0:
        raise DataError("cluster model needs examples of both classes")
    return ClusterModel(
        equivalent_centroids=kmeans_fit(eq, k, seed),
        inequivalent_centroids=kmeans_fit(ineq, k, seed + 1),
    )


def _nearest_distance(v: np.ndarray, centroids: np.ndarray) -> float:
    return float(np.sqrt(((centroids - v) ** 2).sum(axis=1)).min())


def trust_risk(v: np.ndarray, predicted_matching: bool,
               clusters: ClusterModel) -> float:
    """Cluster-distance risk: rho_same / rho_other.

    This is the reciprocal of the trust score so that higher means
    riskier; a vector sitting on a same-label centroid scores 0, an
    equidistant one scores 1.
    """
    v = np.asarray(v, dtype=np.float64)
    rho_same = _nearest_distance(v, clusters.centroids_for(predicted_matching))
    rho_other = _nearest_distance(v, clusters.centroids_for(not predicted_matching))
    if rho_other == 0.0:
        return 1.0 if rho_same == 0.0 else np.inf
    return rho_same / rho_other


def trust_risk_scores(x: np.ndarray, matching: np.ndarray,
                      clusters: ClusterModel) -> np.ndarray:
    return np.array([
        trust_risk(x[i], bool(matching[i]), clusters)
        for i in range(x.shape[0])
    ])


# ---------------------------------------------------------------------------
# active batch selection


def select_active_batch(ranking: Iterable[tuple[Hashable, float]], k: int,
                        exclude: set | frozenset = frozenset()) -> list:
    """Top-k item ids by score, skipping ``exclude``; ties break by id."""
    if k < 0:
        raise DataError("batch size must be nonnegative")
    items = [(item_id, score) for item_id, score in ranking
             if item_id not in exclude]
    items.sort(key=lambda t: (-t[1], t[0]))
    return [item_id for item_id, _ in items[:k]]
