"""One-sided decision forest: mining conjunctive risk rules.

A split candidate is scored by the one-sided index

    min over sides of  lam/|side| + (1 - lam) * gini(side)

which prefers splits that peel off one small-but-pure subset regardless
of what the other side looks like.  Growing a branch always continues
into the *impurer* side, so every finished path is a chain of peeled
leaves; leaves whose unweighted purity reaches 1 - tau (and whose size
reaches min_leaf) are emitted as rules.

To surface rules implying the minority (equivalent) class, every branch
point is tried both unweighted and with the match class weight; weighted
counts drive split selection and branch control only, the final purity
filter is always unweighted.

Each distinct chain of (descriptor, class-weight) choices is one tree of
the forest.  The number of trees is capped (breadth-first, deterministic)
because the full recursion is exponential in the depth limit.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .data import EQUIVALENT, INEQUIVALENT, Workload
from .errors import DataError, RiskrankError
from .metrics import BOOLEAN, COUNT, MetricMatrix


class NoValidSplitError(RiskrankError):
    """No candidate threshold satisfies the split preconditions."""


@dataclass(frozen=True)
class ForestConfig:
    """Knobs for rule mining; defaults follow standard usage."""

    lam: float = 0.2
    tau: float = 0.1
    max_depth: int = 4
    min_leaf: int = 5
    match_class_weight: float = 1000.0
    max_trees: int = 5000


@dataclass(frozen=True)
class SplitOperation:
    """One predicate of a rule: column ``descriptor`` compared to a value.

    ``comparator`` is directly evaluable ("<=", ">", "=", "!=");
    ``chosen_side`` records which half of the originating partition this
    predicate describes (left = "<=" or "=").
    """

    descriptor: int
    comparator: str
    threshold: float
    chosen_side: str

    def satisfied(self, values: np.ndarray, flags: np.ndarray) -> np.ndarray:
        """Boolean mask of rows satisfying the predicate; flagged cells never do."""
        ok = ~flags
        out = np.zeros(values.shape[0], dtype=bool)
        v = values[ok]
        if self.comparator == "<=":
            hit = v <= self.threshold
        elif self.comparator == ">":
            hit = v > self.threshold
        elif self.comparator == "=":
            hit = v == self.threshold
        else:
            hit = v != self.threshold
        out[np.nonzero(ok)[0][hit]] = True
        return out

    def render(self, descriptors) -> str:
        return (f"{descriptors[self.descriptor].name} {self.comparator} "
                f"{float(self.threshold)!r}")


@dataclass(frozen=True)
class RiskRule:
    """A conjunctive one-sided rule with its training statistics.

    ``expectation_mu`` is the smoothed equivalence fraction of the
    covered training pairs, (m + 1) / (n + 2).
    """

    predicates: tuple[SplitOperation, ...]
    consequent: str
    purity: float
    support: int
    expectation_mu: float
    source_tree: int = field(default=0, compare=False)

    def mask(self, matrix: MetricMatrix) -> np.ndarray:
        """Rows of the matrix satisfying every predicate."""
        out = np.ones(matrix.n_pairs, dtype=bool)
        for p in self.predicates:
            values, flags = matrix.column(p.descriptor)
            out &= p.satisfied(values, flags)
        return out

    def render(self, descriptors) -> str:
        cond = " AND ".join(p.render(descriptors) for p in self.predicates)
        return (f"IF {cond} THEN {self.consequent} | "
                f"{float(self.purity)!r} {self.support} "
                f"{float(self.expectation_mu)!r}")


# ---------------------------------------------------------------------------
# impurity measures


def gini(match_count: float, unmatch_count: float, class_weight: float = 1.0) -> float:
    """Gini value 1 - t_M^2 - t_U^2 with the match count scaled by
    ``class_weight`` before proportions are formed."""
    if match_count < 0 or unmatch_count < 0:
        raise ValueError("negative class count")
    if match_count + unmatch_count == 0:
        raise ValueError("gini of an empty set")
    wm = class_weight * match_count
    tot = wm + unmatch_count
    tm = wm / tot
    tu = unmatch_count / tot
    return 1.0 - tm * tm - tu * tu


def _side_score(match_count, unmatch_count, lam, class_weight):
    # Same operation order as the scan kernels so scores compare bit-equal.
    wm = class_weight * match_count
    tot = wm + unmatch_count
    tm = wm / tot
    tu = unmatch_count / tot
    g = 1.0 - tm * tm - tu * tu
    return lam / (match_count + unmatch_count) + (1.0 - lam) * g


def one_sided_gini(left_counts: tuple[float, float], right_counts: tuple[float, float],
                   lam: float, class_weight: float = 1.0) -> float:
    """min over the two sides of lam/|side| + (1 - lam) * gini(side)."""
    ml, ul = left_counts
    mr, ur = right_counts
    if ml + ul == 0 or mr + ur == 0:
        raise ValueError("one-sided gini of an empty side")
    return min(_side_score(ml, ul, lam, class_weight),
               _side_score(mr, ur, lam, class_weight))


def leaf_impurity(match_count: int, unmatch_count: int,
                  class_weight: float = 1.0) -> float:
    """1 - purity: the (optionally weighted) minority proportion."""
    wm = class_weight * match_count
    tot = wm + unmatch_count
    if tot == 0:
        raise ValueError("impurity of an empty set")
    return min(wm, unmatch_count) / tot


# ---------------------------------------------------------------------------
# split search


def best_split(values: np.ndarray, flags: np.ndarray, labels: np.ndarray,
               value_class: str, lam: float, class_weight: float = 1.0,
               min_leaf: int = 1, descriptor: int = 0,
               ) -> tuple[SplitOperation, np.ndarray, np.ndarray]:
    """Best split of one column, minimizing the one-sided index.

    Real columns get midpoint thresholds between consecutive distinct
    values; boolean and count columns get equality candidates.  Ties take
    the smaller threshold.  Flagged cells belong to neither side.

    Returns the operation (``chosen_side`` = the minimizing side) and the
    row indices of both sides.  Raises NoValidSplitError when no
    candidate has min_leaf pairs on each side.
    """
    ok = ~flags
    v = values[ok]
    y = labels[ok].astype(np.uint8, copy=False)
    order = np.argsort(v, kind="stable")
    vs = np.ascontiguousarray(v[order], dtype=np.float64)
    ys = np.ascontiguousarray(y[order])
    res = _scan_sorted(vs, ys, value_class, lam, class_weight, min_leaf)
    if res is None:
        raise NoValidSplitError("no valid candidate threshold")
    _, thr, left_is_min = res
    comparator = "=" if value_class in (BOOLEAN, COUNT) else "<="
    op = SplitOperation(descriptor=descriptor, comparator=comparator,
                        threshold=thr, chosen_side="left" if left_is_min else "right")
    rows = np.nonzero(ok)[0]
    in_left = (v == thr) if comparator == "=" else (v <= thr)
    return op, rows[in_left], rows[~in_left]


def _scan_sorted(vs, ys, value_class, lam, class_weight, min_leaf):
    if value_class in (BOOLEAN, COUNT):
        return _kernels.scan_equality(vs, ys, lam, class_weight, min_leaf)
    return _kernels.scan_threshold(vs, ys, lam, class_weight, min_leaf)


def _complement(op: SplitOperation) -> SplitOperation:
    flipped = {"<=": ">", ">": "<=", "=": "!=", "!=": "="}[op.comparator]
    side = "right" if op.chosen_side == "left" else "left"
    return SplitOperation(op.descriptor, flipped, op.threshold, side)


def _left_pred(op: SplitOperation) -> SplitOperation:
    # Predicate describing the left side regardless of which side minimized.
    if op.comparator in ("<=", "="):
        base = op
    else:
        base = _complement(op)
    if base.chosen_side != "left":
        base = SplitOperation(base.descriptor, base.comparator, base.threshold, "left")
    return base


# ---------------------------------------------------------------------------
# forest growth


@dataclass
class _Branch:
    indices: np.ndarray
    depth: int
    predicates: tuple[SplitOperation, ...]
    leaves: tuple[tuple[tuple[SplitOperation, ...], np.ndarray], ...]


def generate_risk_features(train: Workload, matrix: MetricMatrix,
                           cfg: ForestConfig) -> list[RiskRule]:
    """Mine risk rules from ground-truth-labeled training pairs."""
    if len(train.pairs) == 0:
        raise DataError("rule mining needs a nonempty training workload")
    truth = train.ground_truth_array()
    return grow_forest(matrix, truth, cfg)


def grow_forest(matrix: MetricMatrix, truth: np.ndarray,
                cfg: ForestConfig) -> list[RiskRule]:
    """Breadth-first growth of the one-sided forest over a metric matrix.

    ``truth`` holds 1 for equivalent pairs.  Output order is canonical
    (sorted by predicate tuple), so identical inputs give identical rule
    lists regardless of traversal details.
    """
    if matrix.n_pairs != truth.shape[0]:
        raise DataError("matrix and label vector disagree on pair count")
    truth = truth.astype(np.uint8, copy=False)
    weights = [1.0]
    if cfg.match_class_weight != 1.0:
        weights.append(float(cfg.match_class_weight))

    harvested: dict[tuple, RiskRule] = {}
    trees_finalized = 0
    tree_budget_used = 1  # the root counts as one (trivial) tree

    def counts(idx: np.ndarray) -> tuple[int, int]:
        m = int(truth[idx].sum())
        return m, idx.size - m

    def harvest(leaves, tree_id: int) -> None:
        for preds, idx in leaves:
            if not preds or idx.size < cfg.min_leaf:
                continue
            m, u = counts(idx)
            if leaf_impurity(m, u) > cfg.tau:
                continue
            consequent = EQUIVALENT if m > u else INEQUIVALENT
            key = (preds, consequent)
            if key in harvested:
                continue
            n = idx.size
            harvested[key] = RiskRule(
                predicates=preds,
                consequent=consequent,
                purity=max(m, u) / n,
                support=n,
                expectation_mu=(m + 1) / (n + 2),
                source_tree=tree_id,
            )

    root = _Branch(indices=np.arange(matrix.n_pairs, dtype=np.intp), depth=0,
                   predicates=(), leaves=())
    queue: deque[_Branch] = deque([root])

    while queue:
        node = queue.popleft()
        terminal_leaves = node.leaves + ((node.predicates, node.indices),)
        if node.depth >= cfg.max_depth or node.indices.size < 2 * cfg.min_leaf:
            trees_finalized += 1
            harvest(terminal_leaves, trees_finalized)
            continue

        # evaluate all (descriptor, class weight) branch choices
        branches = []
        for j, desc in enumerate(matrix.descriptors):
            col, flg = matrix.column(j)
            sub_vals = col[node.indices]
            sub_flags = flg[node.indices]
            ok = ~sub_flags
            v = sub_vals[ok]
            if v.size < 2 * cfg.min_leaf:
                continue
            y = truth[node.indices][ok]
            order = np.argsort(v, kind="stable")
            vs = np.ascontiguousarray(v[order], dtype=np.float64)
            ys = np.ascontiguousarray(y[order], dtype=np.uint8)
            value_class = desc.value_class
            rows = node.indices[ok]
            for w in weights:
                res = _scan_sorted(vs, ys, value_class, cfg.lam, w, cfg.min_leaf)
                if res is None:
                    continue
                _, thr, left_is_min = res
                comparator = "=" if value_class in (BOOLEAN, COUNT) else "<="
                in_left = (v == thr) if comparator == "=" else (v <= thr)
                left_idx = rows[in_left]
                right_idx = rows[~in_left]
                op = SplitOperation(j, comparator, thr,
                                    "left" if left_is_min else "right")
                branches.append((op, w, left_idx, right_idx))

        if not branches:
            trees_finalized += 1
            harvest(terminal_leaves, trees_finalized)
            continue

        extra = len(branches) - 1
        if tree_budget_used + extra > cfg.max_trees:
            trees_finalized += 1
            harvest(terminal_leaves, trees_finalized)
            continue
        tree_budget_used += extra

        for op, w, left_idx, right_idx in branches:
            left_op = _left_pred(op)
            right_op = _complement(left_op)
            ml, ul = counts(left_idx)
            mr, ur = counts(right_idx)
            imp_l = leaf_impurity(ml, ul, w)
            imp_r = leaf_impurity(mr, ur, w)
            side_preds = (node.predicates + (left_op,),
                          node.predicates + (right_op,))
            if min(imp_l, imp_r) >= cfg.tau or max(imp_l, imp_r) < cfg.tau:
                trees_finalized += 1
                harvest(node.leaves + ((side_preds[0], left_idx),
                                       (side_preds[1], right_idx)),
                        trees_finalized)
                continue
            if imp_l > imp_r:
                recurse, peeled = 0, 1
                recurse_idx, peeled_idx = left_idx, right_idx
            else:
                recurse, peeled = 1, 0
                recurse_idx, peeled_idx = right_idx, left_idx
            queue.append(_Branch(
                indices=recurse_idx,
                depth=node.depth + 1,
                predicates=side_preds[recurse],
                leaves=node.leaves + ((side_preds[peeled], peeled_idx),),
            ))

    rules = sorted(
        harvested.values(),
        key=lambda r: (
            tuple((p.descriptor, p.comparator, p.threshold, p.chosen_side)
                  for p in r.predicates),
            r.consequent,
        ),
    )
    return rules


# ---------------------------------------------------------------------------
# applying rules


def rule_matrix(rules: Sequence[RiskRule], matrix: MetricMatrix) -> np.ndarray:
    """Boolean (n_pairs, n_rules) indicator of which rules fire per pair."""
    out = np.zeros((matrix.n_pairs, len(rules)), dtype=bool)
    for j, rule in enumerate(rules):
        out[:, j] = rule.mask(matrix)
    return out


def featurize(pair_index: int, rules: Sequence[RiskRule], matrix: MetricMatrix,
              classifier_prob: float) -> np.ndarray:
    """Feature vector of one pair: rule indicators plus the always-active
    classifier-output feature carrying the raw probability (last slot)."""
    row = matrix.take_rows([pair_index])
    vec = np.empty(len(rules) + 1, dtype=np.float64)
    for j, rule in enumerate(rules):
        vec[j] = 1.0 if rule.mask(row)[0] else 0.0
    vec[-1] = classifier_prob
    return vec


def estimate_feature_expectation(rule: RiskRule, matrix: MetricMatrix,
                                 truth: np.ndarray) -> float:
    """Smoothed equivalence fraction (m + 1) / (n + 2) over covered pairs."""
    mask = rule.mask(matrix)
    n = int(mask.sum())
    m = int(truth[mask].sum())
    return (m + 1) / (n + 2)


# ---------------------------------------------------------------------------
# serialization (one human-readable rule per line)

_RULES_HEADER = "# riskrank rules v1"


def save_rules(rules: Sequence[RiskRule], descriptors, path) -> None:
    lines = [_RULES_HEADER]
    for i, rule in enumerate(rules, start=1):
        lines.append(f"r{i:04d} {rule.render(descriptors)}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_rules(path, descriptors) -> list[RiskRule]:
    """Parse a rule file back; descriptor names resolve against ``descriptors``."""
    by_name = {d.name: j for j, d in enumerate(descriptors)}
    rules: list[RiskRule] = []
    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != _RULES_HEADER:
        raise DataError(f"{path}: not a riskrank rule file")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            _rid, rest = line.split(" ", 1)
            cond_part, tail = rest.split(" THEN ", 1)
            consequent, stats = tail.split(" | ", 1)
            purity_s, support_s, mu_s = stats.split()
            preds = []
            for clause in cond_part[len("IF "):].split(" AND "):
                name, cmp_, thr_s = clause.split(" ")
                if name not in by_name:
                    raise DataError(f"{path}:{lineno}: unknown metric {name!r}")
                side = "left" if cmp_ in ("<=", "=") else "right"
                preds.append(SplitOperation(by_name[name], cmp_, float(thr_s), side))
            rules.append(RiskRule(
                predicates=tuple(preds),
                consequent=consequent,
                purity=float(purity_s),
                support=int(support_s),
                expectation_mu=float(mu_s),
            ))
        except DataError:
            raise
        except ValueError as exc:
            raise DataError(f"{path}:{lineno}: malformed rule line ({exc})") from None
    return rules
