import numpy as np
import pytest

from riskrank.data import EQUIVALENT, INEQUIVALENT
from riskrank.errors import DataError
from riskrank.forest import (
    ForestConfig,
    NoValidSplitError,
    RiskRule,
    SplitOperation,
    best_split,
    estimate_feature_expectation,
    featurize,
    generate_risk_features,
    gini,
    grow_forest,
    leaf_impurity,
    load_rules,
    one_sided_gini,
    rule_matrix,
    save_rules,
)
from riskrank.metrics import (
    BOOLEAN,
    COUNT,
    REAL,
    MetricDescriptor,
    MetricMatrix,
    build_metric_matrix,
    default_descriptors,
)
from tests.conftest import column_workload


def brute_force_best_split(values, labels, value_class, lam, weight, min_leaf):
    """Exhaustive minimizer over all candidate partitions of one column.

    Independent of the scan kernels: enumerates every midpoint (or
    distinct value), scores both sides with one_sided_gini, and applies
    the smaller-threshold tie rule.
    """
    distinct = np.unique(values)
    best = None
    if value_class in (BOOLEAN, COUNT):
        candidates = [(v, values == v) for v in distinct] if len(distinct) > 1 else []
    else:
        mids = (distinct[:-1] + distinct[1:]) * 0.5
        candidates = [(t, values <= t) for t in mids]
    for thr, in_left in candidates:
        nl, nr = int(in_left.sum()), int((~in_left).sum())
        if nl < min_leaf or nr < min_leaf:
            continue
        ml = int(labels[in_left].sum())
        mr = int(labels[~in_left].sum())
        score = one_sided_gini((ml, nl - ml), (mr, nr - mr), lam, weight)
        if best is None or score < best[0]:
            best = (score, thr)
    return best


class TestGini:
    def test_pure_set(self):
        assert gini(0, 10) == 0.0

    def test_maximal_impurity(self):
        assert gini(5, 5) == 0.5

    def test_hand_value(self):
        assert gini(3, 1) == pytest.approx(0.375)

    def test_class_weight_scales_matches(self):
        # 1 match weighted 1000 against 1 unmatch behaves like 1000 vs 1
        assert gini(1, 1, class_weight=1000.0) == pytest.approx(
            gini(1000, 1), abs=1e-12)

    def test_empty_set_rejected(self):
        with pytest.raises(ValueError):
            gini(0, 0)


class TestOneSidedGini:
    def test_lambda_zero_reduces_to_min_gini(self):
        assert one_sided_gini((1, 9), (5, 5), lam=0.0) == pytest.approx(
            min(gini(1, 9), gini(5, 5)))

    def test_lambda_one_reduces_to_min_inverse_size(self):
        assert one_sided_gini((1, 9), (5, 5), lam=1.0) == pytest.approx(
            min(1 / 10, 1 / 10))
        assert one_sided_gini((1, 2), (5, 5), lam=1.0) == pytest.approx(1 / 10)

    def test_hand_value(self):
        # lam/|L| + (1-lam) G(L) = 0.02 + 0.8 * 0.18 = 0.164 beats the
        # right side at 0.42
        assert one_sided_gini((1, 9), (5, 5), lam=0.2) == pytest.approx(0.164)

    def test_empty_side_rejected(self):
        with pytest.raises(ValueError):
            one_sided_gini((0, 0), (1, 1), lam=0.2)

    def test_leaf_impurity_is_one_minus_purity(self):
        assert leaf_impurity(9, 1) == pytest.approx(0.1)
        assert leaf_impurity(1, 9) == pytest.approx(0.1)
        assert leaf_impurity(1, 1, class_weight=1000.0) == pytest.approx(
            1 / 1001)


class TestBestSplit:
    def test_planted_boolean_separator(self):
        values = np.array([1.0] * 6 + [0.0] * 14)
        flags = np.zeros(20, dtype=bool)
        labels = np.array([1] * 6 + [0] * 14, dtype=np.uint8)
        op, left, right = best_split(values, flags, labels, BOOLEAN,
                                     lam=0.2, class_weight=1.0)
        # the pure side is {== 0}: all unmatch; score lam/|side|
        assert op.comparator == "="
        assert op.threshold == 0.0
        assert op.chosen_side == "left"
        assert left.size == 14 and right.size == 6
        score = one_sided_gini((0, 14), (6, 0), 0.2)
        assert score == pytest.approx(0.2 / 14)

    def test_constant_column_no_candidate(self):
        values = np.ones(10)
        flags = np.zeros(10, dtype=bool)
        labels = np.array([0, 1] * 5, dtype=np.uint8)
        with pytest.raises(NoValidSplitError):
            best_split(values, flags, labels, REAL, lam=0.2)

    def test_tie_takes_smaller_threshold(self):
        # mirrored equality candidates score identically; 0 must win
        values = np.array([0.0, 0.0, 1.0, 1.0])
        flags = np.zeros(4, dtype=bool)
        labels = np.array([1, 0, 1, 0], dtype=np.uint8)
        op, _, _ = best_split(values, flags, labels, BOOLEAN, lam=0.2)
        assert op.threshold == 0.0

    def test_flagged_cells_in_neither_side(self):
        values = np.array([0.0, 1.0, np.nan, 1.0])
        flags = np.array([False, False, True, False])
        labels = np.array([0, 1, 1, 1], dtype=np.uint8)
        op, left, right = best_split(values, flags, labels, BOOLEAN, lam=0.2)
        assert 2 not in set(left) | set(right)

    @pytest.mark.parametrize("lam", [0.0, 0.2, 1.0])
    @pytest.mark.parametrize("value_class", [BOOLEAN, COUNT, REAL])
    def test_matches_brute_force(self, lam, value_class):
        rng = np.random.default_rng(7)
        for _ in range(60):
            n = int(rng.integers(4, 120))
            if value_class == BOOLEAN:
                values = rng.integers(0, 2, n).astype(np.float64)
            elif value_class == COUNT:
                values = rng.integers(0, 6, n).astype(np.float64)
            else:
                values = np.round(rng.random(n), 2)
            labels = rng.integers(0, 2, n).astype(np.uint8)
            flags = np.zeros(n, dtype=bool)
            weight = float(rng.choice([1.0, 1000.0]))
            expected = brute_force_best_split(values, labels, value_class,
                                              lam, weight, 1)
            if expected is None:
                with pytest.raises(NoValidSplitError):
                    best_split(values, flags, labels, value_class, lam, weight)
                continue
            op, _, _ = best_split(values, flags, labels, value_class, lam,
                                  weight)
            assert op.threshold == expected[1]


def planted_year_workload(n=200, support=20, seed=3):
    """Pairs where year inequality implies inequivalence (purity 1)."""
    rng = np.random.default_rng(seed)
    years, sims, truth = [], [], []
    for i in range(n):
        if i < support:
            years.append((2000, 2001 + int(rng.integers(0, 3))))
            truth.append(0)
        else:
            equivalent = bool(rng.integers(0, 2))
            years.append((2000, 2000))
            truth.append(1 if equivalent else 0)
        sims.append((float(np.round(rng.random(), 2)), 0.0))
    return column_workload(
        {"year": years, "noise": sims}, truth,
        schema={"year": "number", "noise": "number"})


class TestForest:
    def setup_method(self):
        self.workload = planted_year_workload()
        self.descs = default_descriptors(self.workload.schema)
        self.matrix = build_metric_matrix(self.workload, self.descs)
        self.names = [d.name for d in self.descs]
        self.cfg = ForestConfig()
        self.rules = generate_risk_features(self.workload, self.matrix, self.cfg)

    def _planted(self):
        j = self.names.index("year_number_equality")
        return [r for r in self.rules
                if len(r.predicates) == 1
                and r.predicates[0].descriptor == j
                and r.predicates[0].comparator == "="
                and r.predicates[0].threshold == 0.0
                and r.consequent == INEQUIVALENT]

    def test_emits_planted_rule(self):
        hits = self._planted()
        assert len(hits) == 1
        assert hits[0].support == 20
        assert hits[0].purity == 1.0

    def test_rule_stats_audit(self):
        truth = self.workload.ground_truth_array()
        for rule in self.rules:
            mask = rule.mask(self.matrix)
            n = int(mask.sum())
            m = int(truth[mask].sum())
            assert n == rule.support
            assert n >= self.cfg.min_leaf
            assert len(rule.predicates) <= self.cfg.max_depth
            purity = max(m, n - m) / n
            assert purity == pytest.approx(rule.purity)
            assert purity >= 1.0 - self.cfg.tau
            expected_class = EQUIVALENT if m > n - m else INEQUIVALENT
            assert rule.consequent == expected_class
            assert rule.expectation_mu == pytest.approx((m + 1) / (n + 2))

    def test_no_duplicate_rules(self):
        keys = {(r.predicates, r.consequent) for r in self.rules}
        assert len(keys) == len(self.rules)

    def test_deterministic(self):
        again = generate_risk_features(self.workload, self.matrix, self.cfg)
        assert again == self.rules

    def test_zero_tau_on_noisy_data_gives_no_rules(self):
        # alternating labels along a single real column: every threshold
        # side of min_leaf size is mixed, so no perfectly pure leaf exists
        n = 60
        vals = [(float(i), 0.0) for i in range(n)]
        truth = [i % 2 for i in range(n)]
        w = column_workload({"x": vals}, truth, schema={"x": "number"})
        m = build_metric_matrix(w, default_descriptors(w.schema))
        rules = grow_forest(m, w.ground_truth_array(), ForestConfig(tau=0.0))
        assert rules == []

    def test_mixed_constant_metrics_give_no_rules(self):
        n = 40
        const = [(1.0, 1.0)] * n
        truth = [1, 0] * (n // 2)
        w = column_workload({"x": const}, truth, schema={"x": "number"})
        m = build_metric_matrix(w, default_descriptors(w.schema))
        assert grow_forest(m, w.ground_truth_array(), self.cfg) == []

    def test_empty_training_set_rejected(self):
        w = column_workload({"x": []}, [], schema={"x": "number"})
        m = build_metric_matrix(w, default_descriptors(w.schema))
        with pytest.raises(DataError):
            generate_risk_features(w, m, self.cfg)

    def test_tree_budget_caps_output(self):
        small = ForestConfig(max_trees=10)
        rules = generate_risk_features(self.workload, self.matrix, small)
        assert len(rules) <= len(self.rules)
        names = [d.name for d in self.descs]
        j = names.index("year_number_equality")
        # the depth-1 planted rule survives even a tight tree budget
        assert any(len(r.predicates) == 1 and r.predicates[0].descriptor == j
                   and r.predicates[0].threshold == 0.0
                   and r.consequent == INEQUIVALENT for r in rules)


class TestFeaturize:
    def setup_method(self):
        self.workload = planted_year_workload()
        self.descs = default_descriptors(self.workload.schema)
        self.matrix = build_metric_matrix(self.workload, self.descs)
        self.rules = generate_risk_features(self.workload, self.matrix,
                                            ForestConfig())

    def test_pair_with_no_rule_gets_classifier_feature_only(self):
        names = [d.name for d in self.descs]
        j = names.index("year_number_equality")
        values = np.full((1, len(self.descs)), np.nan)
        flags = np.ones((1, len(self.descs)), dtype=bool)
        matrix = MetricMatrix(self.descs, values, flags)
        vec = featurize(0, self.rules, matrix, classifier_prob=0.42)
        assert vec[-1] == 0.42
        assert not vec[:-1].any()  # flagged cells satisfy nothing

    def test_planted_rule_fires_on_year_mismatch(self):
        fired = rule_matrix(self.rules, self.matrix)
        names = [d.name for d in self.descs]
        j = names.index("year_number_equality")
        planted = [i for i, r in enumerate(self.rules)
                   if len(r.predicates) == 1 and r.predicates[0].descriptor == j
                   and r.predicates[0].threshold == 0.0
                   and r.consequent == INEQUIVALENT]
        mism = self.matrix.values[:, j] == 0.0
        np.testing.assert_array_equal(fired[:, planted[0]], mism)

    def test_monotone_under_extension(self):
        # adding pairs never changes existing pairs' feature vectors
        sub = self.matrix.take_rows(range(50))
        sub_fired = rule_matrix(self.rules, sub)
        full_fired = rule_matrix(self.rules, self.matrix)
        np.testing.assert_array_equal(sub_fired, full_fired[:50])


class TestExpectation:
    def _matrix(self, n, m_count):
        desc = MetricDescriptor("flag", "x", "number_equality")
        values = np.ones((max(n, 1), 1))
        flags = np.zeros_like(values, dtype=bool)
        if n == 0:
            values[:] = 0.0  # rule will not fire anywhere
        truth = np.zeros(max(n, 1), dtype=np.uint8)
        truth[:m_count] = 1
        rule = RiskRule(predicates=(SplitOperation(0, "=", 1.0, "left"),),
                        consequent=EQUIVALENT, purity=1.0, support=n,
                        expectation_mu=0.5)
        return rule, MetricMatrix((desc,), values, flags), truth

    def test_smoothed_ratio(self):
        rule, matrix, truth = self._matrix(50, 2)
        assert estimate_feature_expectation(rule, matrix, truth) == \
            pytest.approx(3 / 52)

    def test_empty_coverage_falls_back_to_half(self):
        rule, matrix, truth = self._matrix(0, 0)
        assert estimate_feature_expectation(rule, matrix, truth) == 0.5

    def test_all_match_leaf(self):
        rule, matrix, truth = self._matrix(10, 10)
        assert estimate_feature_expectation(rule, matrix, truth) == \
            pytest.approx(11 / 12)


class TestRuleSerialization:
    def test_round_trip(self, tmp_path):
        w = planted_year_workload()
        descs = default_descriptors(w.schema)
        matrix = build_metric_matrix(w, descs)
        rules = generate_risk_features(w, matrix, ForestConfig())
        path = tmp_path / "rules.txt"
        save_rules(rules, descs, path)
        loaded = load_rules(path, descs)
        assert loaded == rules

    def test_rejects_foreign_file(self, tmp_path):
        path = tmp_path / "nope.txt"
        path.write_text("something else\n")
        with pytest.raises(DataError):
            load_rules(path, [])

    def test_rejects_unknown_metric_name(self, tmp_path):
        path = tmp_path / "rules.txt"
        path.write_text("# riskrank rules v1\n"
                        "r0001 IF ghost = 1.0 THEN equivalent | 1.0 5 0.5\n")
        with pytest.raises(DataError):
            load_rules(path, [])
