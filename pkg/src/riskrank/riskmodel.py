"""Distribution-based risk scoring.

Every fired rule contributes a normal belief about a pair's equivalence
probability; the classifier output is one more, always-active feature
whose weight follows a learnable bell-shaped influence curve (extreme
outputs weigh more than ambiguous ones).  Per pair, the active features'
weights are renormalized to sum to one and the beliefs are aggregated:

    mu_i     = sum_j w~_j * mu_j
    sigma_i^2 = sum_j w~_j^2 * sigma_j^2

The pair's mislabel risk is the Value-at-Risk of its equivalence
distribution truncated to [0, 1]: for an unmatching label the theta
quantile, for a matching label one minus the (1 - theta) quantile.

Weight renormalization is a deliberate choice: with raw weights the
aggregated expectation can leave [0, 1], while normalized weights keep
the portfolio reading (allocations summing to one) and mu_i a valid
probability.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .data import Workload
from .errors import DataError
from .forest import RiskRule, rule_matrix
from .metrics import MetricMatrix

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def _phi(z):
    return np.exp(-0.5 * z * z) / _SQRT_2PI


def influence_weight(x, alpha: float, beta: float):
    """Weight of the classifier-output feature: -exp(-(x-0.5)^2/(2 a^2)) + b + 1.

    Equals beta at the ambiguous center x = 0.5 and rises toward beta + 1
    as the output gets extreme.
    """
    x = np.asarray(x, dtype=np.float64)
    d = x - 0.5
    out = -np.exp(-(d * d) / (2.0 * alpha * alpha)) + beta + 1.0
    return out if out.ndim else float(out)


def aggregate_distribution(weights: Sequence[float], mus: Sequence[float],
                           sigmas: Sequence[float]) -> tuple[float, float]:
    """Aggregate active features into one (mu, sigma^2) pair.

    Raw weights are renormalized to sum to one, so the result is invariant
    under positive rescaling of the weight vector.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.size == 0:
        raise DataError("aggregation needs at least one active feature")
    if (w <= 0).any():
        raise DataError("feature weights must be positive")
    wn = w / w.sum()
    mu = float(wn @ np.asarray(mus, dtype=np.float64))
    var = float((wn * wn) @ (np.asarray(sigmas, dtype=np.float64) ** 2))
    return mu, var


def truncated_quantile(p: float, mu, sigma):
    """Quantile of Normal(mu, sigma^2) truncated to [0, 1].

    sigma may be zero (degenerate distribution: returns mu clamped).
    Accepts scalars or arrays for mu/sigma; p is a scalar in (0, 1).
    """
    if not (0.0 < p < 1.0):
        raise ValueError(f"quantile level {p} outside (0, 1)")
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    scalar = mu.ndim == 0 and sigma.ndim == 0
    mu, sigma = np.atleast_1d(mu), np.atleast_1d(sigma)
    mu, sigma = np.broadcast_arrays(mu, sigma)
    out = np.clip(mu, 0.0, 1.0).astype(np.float64)
    pos = sigma > 0.0
    if pos.any():
        m, s = mu[pos], sigma[pos]
        fa = ndtr((0.0 - m) / s)
        fb = ndtr((1.0 - m) / s)
        z = ndtri(fa + p * (fb - fa))
        out[pos] = np.clip(m + s * z, 0.0, 1.0)
    return float(out[0]) if scalar else out


def truncated_quantile_grad(p: float, mu, sigma):
    """(q, dq/dmu, dq/dsigma) of the truncated-normal quantile.

    At sigma = 0 the analytic limits are used: dq/dmu = 1 inside the unit
    interval (0 at the clamp boundaries) and dq/dsigma = ndtri(p).
    """
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    mu, sigma = np.broadcast_arrays(mu, sigma)
    q = np.clip(mu, 0.0, 1.0).astype(np.float64)
    dmu = ((mu > 0.0) & (mu < 1.0)).astype(np.float64)
    dsig = np.where((mu > 0.0) & (mu < 1.0), ndtri(p), 0.0)
    pos = sigma > 0.0
    if pos.any():
        m, s = mu[pos], sigma[pos]
        a = (0.0 - m) / s
        b = (1.0 - m) / s
        fa, fb = ndtr(a), ndtr(b)
        u = fa + p * (fb - fa)
        z = ndtri(u)
        pa, pb, pz = _phi(a), _phi(b), _phi(z)
        mix = (1.0 - p) * pa + p * pb
        mix_ab = (1.0 - p) * a * pa + p * b * pb
        q[pos] = np.clip(m + s * z, 0.0, 1.0)
        dmu[pos] = 1.0 - mix / pz
        dsig[pos] = z - mix_ab / pz
    return q, dmu, dsig


def var_risk(mu, sigma, matching, theta: float):
    """VaR of a pair distribution given its machine label.

    unmatching -> theta quantile of the equivalence probability;
    matching   -> 1 - (1-theta) quantile.
    """
    if not (0.5 < theta < 1.0):
        raise ValueError(f"confidence level {theta} outside (0.5, 1)")
    scalar = np.ndim(mu) == 0 and np.ndim(sigma) == 0 and np.ndim(matching) == 0
    mu = np.atleast_1d(np.asarray(mu, dtype=np.float64))
    sigma = np.atleast_1d(np.asarray(sigma, dtype=np.float64))
    matching = np.atleast_1d(np.asarray(matching, dtype=bool))
    mu, sigma, matching = np.broadcast_arrays(mu, sigma, matching)
    out = np.empty(mu.shape, dtype=np.float64)
    if matching.any():
        out[matching] = 1.0 - truncated_quantile(
            1.0 - theta, mu[matching], sigma[matching])
    um = ~matching
    if um.any():
        out[um] = truncated_quantile(theta, mu[um], sigma[um])
    return float(out[0]) if scalar else out


def var_risk_grad(mu, sigma, matching, theta: float):
    """(gamma, dgamma/dmu, dgamma/dsigma) per pair."""
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    matching = np.asarray(matching, dtype=bool)
    gamma = np.empty(mu.shape, dtype=np.float64)
    dmu = np.empty_like(gamma)
    dsig = np.empty_like(gamma)
    if matching.any():
        q, qm, qs = truncated_quantile_grad(1.0 - theta, mu[matching], sigma[matching])
        gamma[matching] = 1.0 - q
        dmu[matching] = -qm
        dsig[matching] = -qs
    um = ~matching
    if um.any():
        q, qm, qs = truncated_quantile_grad(theta, mu[um], sigma[um])
        gamma[um] = q
        dmu[um] = qm
        dsig[um] = qs
    return gamma, dmu, dsig


# ---------------------------------------------------------------------------
# the model


def equal_width_bins(n_bins: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, n_bins + 1)


def bin_index(x, edges: np.ndarray) -> np.ndarray:
    """Bin of each probability; bins are [e_k, e_{k+1}), last bin closed."""
    x = np.asarray(x, dtype=np.float64)
    idx = np.searchsorted(edges, x, side="right") - 1
    return np.clip(idx, 0, len(edges) - 2)


@dataclass(frozen=True)
class RiskModel:
    """Scoring parameters: per-rule weight/expectation/RSD, the influence
    shape (alpha, beta), and per-bin RSDs for the classifier output."""

    rules: tuple[RiskRule, ...]
    rule_weight: np.ndarray
    rule_rsd: np.ndarray
    alpha: float
    beta: float
    bin_edges: np.ndarray
    bin_rsd: np.ndarray
    theta: float = 0.9
    rules_digest: str | None = None

    @property
    def rule_mu(self) -> np.ndarray:
        return np.array([r.expectation_mu for r in self.rules], dtype=np.float64)

    @property
    def n_rules(self) -> int:
        return len(self.rules)

    def validate(self) -> None:
        k = len(self.rules)
        if self.rule_weight.shape != (k,) or self.rule_rsd.shape != (k,):
            raise DataError("model parameter arrays do not match rule count")
        if (self.rule_weight <= 0).any() or self.alpha <= 0 or self.beta <= 0:
            raise DataError("weights, alpha and beta must stay positive")
        if (self.rule_rsd < 0).any() or (self.bin_rsd < 0).any():
            raise DataError("RSDs must be nonnegative")


def initial_model(rules: Sequence[RiskRule], theta: float = 0.9,
                  n_bins: int = 10, init_rsd: float = 0.3,
                  alpha: float = 0.2, beta: float = 10.0,
                  rules_digest: str | None = None) -> RiskModel:
    """Untrained model: uniform rule weights, one shared starting RSD."""
    k = len(rules)
    return RiskModel(
        rules=tuple(rules),
        rule_weight=np.ones(k, dtype=np.float64),
        rule_rsd=np.full(k, init_rsd, dtype=np.float64),
        alpha=alpha,
        beta=beta,
        bin_edges=equal_width_bins(n_bins),
        bin_rsd=np.full(n_bins, init_rsd, dtype=np.float64),
        theta=theta,
        rules_digest=rules_digest,
    )


@dataclass(frozen=True)
class FeaturizedPairs:
    """Sparse fired-rule structure for a workload, fixed during training.

    ``rule_idx[pair_ptr[i]:pair_ptr[i+1]]`` are the rules fired by pair i;
    ``pair_of`` maps each slot back to its pair for scatter-adds.
    """

    rule_idx: np.ndarray
    pair_of: np.ndarray
    pair_ptr: np.ndarray
    probs: np.ndarray
    matching: np.ndarray

    @property
    def n_pairs(self) -> int:
        return self.probs.shape[0]

    def fired_for(self, i: int) -> np.ndarray:
        return self.rule_idx[self.pair_ptr[i]:self.pair_ptr[i + 1]]


def featurize_workload(w: Workload, matrix: MetricMatrix,
                       rules: Sequence[RiskRule]) -> FeaturizedPairs:
    fired = rule_matrix(rules, matrix)
    pair_of, rule_idx = np.nonzero(fired)
    counts = np.bincount(pair_of, minlength=len(w.pairs))
    ptr = np.concatenate(([0], np.cumsum(counts)))
    return FeaturizedPairs(
        rule_idx=rule_idx.astype(np.int64),
        pair_of=pair_of.astype(np.int64),
        pair_ptr=ptr.astype(np.int64),
        probs=w.probabilities(),
        matching=w.machine_label_array().astype(bool),
    )


@dataclass(frozen=True)
class PairDistributions:
    """Aggregated per-pair state plus the intermediates gradients need."""

    mu: np.ndarray
    var: np.ndarray
    sigma: np.ndarray
    weight_sum: np.ndarray
    cls_weight: np.ndarray
    cls_sigma: np.ndarray
    bins: np.ndarray


def pair_distributions(model: RiskModel, fp: FeaturizedPairs) -> PairDistributions:
    """Aggregate rule and classifier-output features for every pair."""
    n = fp.n_pairs
    mu_r = model.rule_mu
    sig_r = model.rule_rsd * mu_r
    w_r = model.rule_weight

    bins = bin_index(fp.probs, model.bin_edges)
    w_c = influence_weight(fp.probs, model.alpha, model.beta)
    sig_c = model.bin_rsd[bins] * fp.probs

    S = np.bincount(fp.pair_of, weights=w_r[fp.rule_idx], minlength=n) + w_c
    N = np.bincount(fp.pair_of, weights=(w_r * mu_r)[fp.rule_idx], minlength=n) \
        + w_c * fp.probs
    M = np.bincount(fp.pair_of, weights=(w_r * w_r * sig_r * sig_r)[fp.rule_idx],
                    minlength=n) + w_c * w_c * sig_c * sig_c
    mu = N / S
    var = M / (S * S)
    return PairDistributions(mu=mu, var=var, sigma=np.sqrt(var), weight_sum=S,
                             cls_weight=np.asarray(w_c), cls_sigma=sig_c, bins=bins)


def pair_risks(model: RiskModel, fp: FeaturizedPairs) -> np.ndarray:
    dist = pair_distributions(model, fp)
    return var_risk(dist.mu, dist.sigma, fp.matching, model.theta)


@dataclass(frozen=True)
class RiskScore:
    """One ranked pair: its VaR at confidence theta, the aggregated
    distribution, and the ids of the rules that fired (the explanation)."""

    left: str
    right: str
    var: float
    theta: float
    mu: float
    sigma: float
    fired: tuple[str, ...]


def score_workload(w: Workload, matrix: MetricMatrix,
                   model: RiskModel) -> list[RiskScore]:
    """Score every pair and rank by descending VaR (ties: pair id order)."""
    fp = featurize_workload(w, matrix, model.rules)
    dist = pair_distributions(model, fp)
    risks = var_risk(dist.mu, dist.sigma, fp.matching, model.theta)
    risks = np.atleast_1d(risks)
    scores = []
    for i, pair in enumerate(w.pairs):
        fired = tuple(f"r{j + 1:04d}" for j in fp.fired_for(i))
        scores.append(RiskScore(
            left=pair.left, right=pair.right, var=float(risks[i]),
            theta=model.theta, mu=float(dist.mu[i]), sigma=float(dist.sigma[i]),
            fired=fired))
    scores.sort(key=lambda s: (-s.var, s.left, s.right))
    return scores


# ---------------------------------------------------------------------------
# persistence

_MODEL_HEADER = "# riskrank model v1"


def digest_file(path) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def save_model(model: RiskModel, path) -> None:
    """Line-oriented text dump; floats use repr so reload is bit-exact."""
    lines = [
        _MODEL_HEADER,
        f"theta {float(model.theta)!r}",
        f"rules_digest {model.rules_digest or '-'}",
        f"alpha {float(model.alpha)!r}",
        f"beta {float(model.beta)!r}",
        "bin_edges " + " ".join(repr(float(e)) for e in model.bin_edges),
        "bin_rsd " + " ".join(repr(float(r)) for r in model.bin_rsd),
        f"rules {model.n_rules}",
    ]
    for i in range(model.n_rules):
        lines.append(f"r{i + 1:04d} {float(model.rule_weight[i])!r} "
                     f"{float(model.rules[i].expectation_mu)!r} "
                     f"{float(model.rule_rsd[i])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path, rules: Sequence[RiskRule]) -> RiskModel:
    """Reload a model against the rule list it was trained with."""
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or lines[0] != _MODEL_HEADER:
        raise DataError(f"{path}: not a riskrank model file")

    def take(prefix: str, line: str) -> str:
        if not line.startswith(prefix + " "):
            raise DataError(f"{path}: expected {prefix!r} line, got {line!r}")
        return line[len(prefix) + 1:]

    theta = float(take("theta", lines[1]))
    digest = take("rules_digest", lines[2])
    alpha = float(take("alpha", lines[3]))
    beta = float(take("beta", lines[4]))
    edges = np.array([float(t) for t in take("bin_edges", lines[5]).split()])
    bin_rsd = np.array([float(t) for t in take("bin_rsd", lines[6]).split()])
    k = int(take("rules", lines[7]))
    if k != len(rules):
        raise DataError(
            f"{path}: model holds {k} rule features but {len(rules)} rules were "
            "supplied")
    weight = np.empty(k, dtype=np.float64)
    rsd = np.empty(k, dtype=np.float64)
    mus = np.empty(k, dtype=np.float64)
    for i, line in enumerate(lines[8:8 + k]):
        parts = line.split()
        if len(parts) != 4:
            raise DataError(f"{path}: malformed feature line {line!r}")
        weight[i], mus[i], rsd[i] = float(parts[1]), float(parts[2]), float(parts[3])
        if abs(mus[i] - rules[i].expectation_mu) > 1e-12:
            raise DataError(
                f"{path}: feature {parts[0]} expectation disagrees with the "
                "rule file (mismatched rule set?)")
    model = RiskModel(rules=tuple(rules), rule_weight=weight, rule_rsd=rsd,
                      alpha=alpha, beta=beta, bin_edges=edges, bin_rsd=bin_rsd,
                      theta=theta, rules_digest=None if digest == "-" else digest)
    model.validate()
    return model


def with_params(model: RiskModel, rule_weight=None, rule_rsd=None, alpha=None,
                beta=None, bin_rsd=None) -> RiskModel:
    """Copy of the model with some parameter blocks replaced."""
    return replace(
        model,
        rule_weight=model.rule_weight if rule_weight is None else rule_weight,
        rule_rsd=model.rule_rsd if rule_rsd is None else rule_rsd,
        alpha=model.alpha if alpha is None else alpha,
        beta=model.beta if beta is None else beta,
        bin_rsd=model.bin_rsd if bin_rsd is None else bin_rsd,
    )
