"""Pairwise ranking trainer for the risk model.

Training data are risk-labeled pairs (1 = mislabeled).  Each comparison
(i, j) carries a target probability 0.5 * (1 + g_i - g_j); the model's
posterior that i outranks j is the logistic of the risk difference, and
the objective is the cross-entropy between the two plus L1/L2 penalties
on the materialized parameters.  Minimizing it pushes mislabeled pairs
above correctly labeled ones, which is exactly the pair-ordering form of
AUROC.

All parameters live in log space (TrainableParams), so weights, RSDs,
alpha and beta stay strictly positive at every step.  Rule expectations
are prior knowledge estimated on classifier-training data and stay
frozen here.

Gradients are analytic; the test suite checks every partial against
central finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Workload
from .errors import DegenerateTrainingError
from .metrics import MetricMatrix
from .riskmodel import (
    FeaturizedPairs,
    RiskModel,
    featurize_workload,
    pair_distributions,
    var_risk_grad,
    with_params,
)

_TINY_SIGMA = 1e-150


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings; sampling kicks in above ``batch`` comparisons."""

    learning_rate: float = 0.001
    epochs: int = 1000
    l1: float = 1e-4
    l2: float = 1e-4
    batch: int = 100_000
    seed: int = 0


@dataclass(frozen=True)
class TrainableParams:
    """Free (log-space) parameters; exp() of each is the working value."""

    log_weight: np.ndarray
    log_rsd: np.ndarray
    log_bin_rsd: np.ndarray
    log_alpha: float
    log_beta: float

    @classmethod
    def from_model(cls, model: RiskModel) -> "TrainableParams":
        return cls(
            log_weight=np.log(model.rule_weight),
            log_rsd=np.log(model.rule_rsd),
            log_bin_rsd=np.log(model.bin_rsd),
            log_alpha=float(np.log(model.alpha)),
            log_beta=float(np.log(model.beta)),
        )

    def materialize(self, template: RiskModel) -> RiskModel:
        return with_params(
            template,
            rule_weight=np.exp(self.log_weight),
            rule_rsd=np.exp(self.log_rsd),
            bin_rsd=np.exp(self.log_bin_rsd),
            alpha=float(np.exp(self.log_alpha)),
            beta=float(np.exp(self.log_beta)),
        )

    def step(self, grads: "TrainableParams", lr: float) -> "TrainableParams":
        return TrainableParams(
            log_weight=self.log_weight - lr * grads.log_weight,
            log_rsd=self.log_rsd - lr * grads.log_rsd,
            log_bin_rsd=self.log_bin_rsd - lr * grads.log_bin_rsd,
            log_alpha=self.log_alpha - lr * grads.log_alpha,
            log_beta=self.log_beta - lr * grads.log_beta,
        )

    def all_finite(self) -> bool:
        return bool(np.isfinite(self.log_weight).all()
                    and np.isfinite(self.log_rsd).all()
                    and np.isfinite(self.log_bin_rsd).all()
                    and np.isfinite(self.log_alpha)
                    and np.isfinite(self.log_beta))


def posterior_prob(gamma_i, gamma_j):
    """Logistic map from a risk difference to the outranking probability.

    Computed in the overflow-safe form; saturates cleanly for large
    differences.
    """
    d = np.asarray(gamma_i, dtype=np.float64) - np.asarray(gamma_j, dtype=np.float64)
    t = np.exp(-np.abs(d))
    out = np.where(d >= 0, 1.0 / (1.0 + t), t / (1.0 + t))
    return float(out) if out.ndim == 0 else out


def target_prob(g_i, g_j):
    """Desired posterior from risk labels: 0.5 * (1 + g_i - g_j)."""
    return 0.5 * (1.0 + np.asarray(g_i, dtype=np.float64)
                  - np.asarray(g_j, dtype=np.float64))


def _softplus(x):
    return np.log1p(np.exp(-np.abs(x))) + np.maximum(x, 0.0)


@dataclass(frozen=True)
class ComparisonSet:
    """Ordered comparisons (i, j) with their target posteriors."""

    i: np.ndarray
    j: np.ndarray
    target: np.ndarray

    @property
    def size(self) -> int:
        return self.i.shape[0]


def full_cross_comparisons(risk_labels: np.ndarray) -> ComparisonSet:
    """Every (mislabeled, correct) ordered pair, target 1."""
    mis = np.nonzero(risk_labels == 1)[0]
    cor = np.nonzero(risk_labels == 0)[0]
    i = np.repeat(mis, cor.size)
    j = np.tile(cor, mis.size)
    return ComparisonSet(i=i, j=j, target=np.ones(i.size, dtype=np.float64))


def _regularization(model: RiskModel, l1: float, l2: float) -> float:
    theta = np.concatenate((model.rule_weight, model.rule_rsd, model.bin_rsd,
                            [model.alpha, model.beta]))
    return float(l1 * theta.sum() + l2 * (theta * theta).sum())


def loss_and_gradient(params: TrainableParams, template: RiskModel,
                      fp: FeaturizedPairs, comps: ComparisonSet,
                      l1: float = 0.0, l2: float = 0.0,
                      ) -> tuple[float, TrainableParams]:
    """Regularized comparison loss and its gradient in log space."""
    model = params.materialize(template)
    n = fp.n_pairs
    k = model.n_rules

    mu_r = model.rule_mu
    sig_r = model.rule_rsd * mu_r
    w_r = model.rule_weight
    x = fp.probs

    dist = pair_distributions(model, fp)
    mu, var, sigma = dist.mu, dist.var, dist.sigma
    S, w_c, sig_c, bins_ = dist.weight_sum, dist.cls_weight, dist.cls_sigma, dist.bins
    c = (x - 0.5) * (x - 0.5)
    expo = np.exp(-c / (2.0 * model.alpha * model.alpha))

    gamma, dg_dmu, dg_dsigma = var_risk_grad(mu, sigma, fp.matching, model.theta)

    delta = gamma[comps.i] - gamma[comps.j]
    ce = comps.target * _softplus(-delta) + (1.0 - comps.target) * _softplus(delta)
    loss = float(ce.sum()) + _regularization(model, l1, l2)

    # backward
    p = posterior_prob(gamma[comps.i], gamma[comps.j])
    dldd = np.asarray(p) - comps.target
    g_gamma = (np.bincount(comps.i, weights=dldd, minlength=n)
               - np.bincount(comps.j, weights=dldd, minlength=n))
    g_mu = g_gamma * dg_dmu
    g_sigma = g_gamma * dg_dsigma
    safe_sigma = np.where(sigma > _TINY_SIGMA, sigma, 1.0)
    g_var = np.where(sigma > _TINY_SIGMA, g_sigma / (2.0 * safe_sigma), 0.0)

    # rule features: scatter the per-pair terms onto fired slots
    po, ri = fp.pair_of, fp.rule_idx
    inv_S = 1.0 / S
    slot_w = (g_mu * inv_S)[po] * (mu_r[ri] - mu[po]) \
        + g_var[po] * (2.0 * w_r[ri] * (sig_r * sig_r)[ri] * (inv_S * inv_S)[po]
                       - 2.0 * var[po] * inv_S[po])
    d_w = np.bincount(ri, weights=slot_w, minlength=k)
    slot_sig = g_var[po] * 2.0 * (w_r * w_r)[ri] * sig_r[ri] * (inv_S * inv_S)[po]
    d_sig_r = np.bincount(ri, weights=slot_sig, minlength=k)
    d_rsd = d_sig_r * mu_r

    # classifier-output feature
    d_wc = g_mu * inv_S * (x - mu) \
        + g_var * (2.0 * w_c * sig_c * sig_c * inv_S * inv_S - 2.0 * var * inv_S)
    dwc_dalpha = -expo * c / (model.alpha ** 3)
    d_alpha = float((d_wc * dwc_dalpha).sum())
    d_beta = float(d_wc.sum())
    d_sig_c = g_var * 2.0 * w_c * w_c * sig_c * inv_S * inv_S
    d_bin_rsd = np.bincount(bins_, weights=d_sig_c * x,
                            minlength=model.bin_rsd.shape[0])

    # regularization on the materialized values
    d_w += l1 + 2.0 * l2 * w_r
    d_rsd += l1 + 2.0 * l2 * model.rule_rsd
    d_bin_rsd += l1 + 2.0 * l2 * model.bin_rsd
    d_alpha += l1 + 2.0 * l2 * model.alpha
    d_beta += l1 + 2.0 * l2 * model.beta

    # chain through the exp reparameterization
    grads = TrainableParams(
        log_weight=d_w * w_r,
        log_rsd=d_rsd * model.rule_rsd,
        log_bin_rsd=d_bin_rsd * model.bin_rsd,
        log_alpha=d_alpha * model.alpha,
        log_beta=d_beta * model.beta,
    )
    return loss, grads


def loss(params: TrainableParams, template: RiskModel, fp: FeaturizedPairs,
         comps: ComparisonSet, l1: float = 0.0, l2: float = 0.0) -> float:
    """Regularized comparison loss at the given parameters."""
    if comps.size == 0:
        raise DegenerateTrainingError("empty comparison set")
    value, _ = loss_and_gradient(params, template, fp, comps, l1, l2)
    return value


def gradient_step(params: TrainableParams, template: RiskModel,
                  fp: FeaturizedPairs, comps: ComparisonSet, lr: float,
                  l1: float = 0.0, l2: float = 0.0) -> TrainableParams:
    """One full-batch descent step on the given comparisons."""
    _, grads = loss_and_gradient(params, template, fp, comps, l1, l2)
    if not grads.all_finite():
        raise DegenerateTrainingError("non-finite gradient encountered")
    return params.step(grads, lr)


def train(model: RiskModel, risk_train: Workload, matrix: MetricMatrix,
          cfg: TrainConfig) -> tuple[RiskModel, list[float]]:
    """Fit weights, RSDs, alpha and beta on risk-labeled pairs.

    Each epoch uses the full (mislabeled x correct) comparison cross
    product when it fits in ``cfg.batch``, otherwise ``cfg.batch``
    comparisons sampled uniformly with the seeded generator.  Returns the
    trained model and the per-epoch loss trace (loss at the parameters
    entering the epoch); fully deterministic given the seed.
    """
    fp = featurize_workload(risk_train, matrix, model.rules)
    y = risk_train.risk_label_array()
    mis = np.nonzero(y == 1)[0]
    cor = np.nonzero(y == 0)[0]
    if mis.size == 0 or cor.size == 0:
        raise DegenerateTrainingError(
            "risk training needs at least one mislabeled and one correctly "
            f"labeled pair (got {mis.size} mislabeled, {cor.size} correct)")

    total = mis.size * cor.size
    full = total <= cfg.batch
    if full:
        comps = full_cross_comparisons(y)
    rng = np.random.default_rng(cfg.seed)

    params = TrainableParams.from_model(model)
    trace: list[float] = []
    for _ in range(cfg.epochs):
        if not full:
            ii = mis[rng.integers(0, mis.size, size=cfg.batch)]
            jj = cor[rng.integers(0, cor.size, size=cfg.batch)]
            comps = ComparisonSet(i=ii, j=jj,
                                  target=np.ones(cfg.batch, dtype=np.float64))
        value, grads = loss_and_gradient(params, model, fp, comps, cfg.l1, cfg.l2)
        trace.append(value)
        if not grads.all_finite():
            raise DegenerateTrainingError("non-finite gradient encountered")
        params = params.step(grads, cfg.learning_rate)
    return params.materialize(model), trace
