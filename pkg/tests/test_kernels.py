"""Backend parity: the compiled and pure kernels must agree bit-for-bit."""

import numpy as np
import pytest

from riskrank._kernels import _scan_py

try:
    from riskrank._kernels import _scan_cy
except ImportError:
    _scan_cy = None

needs_compiled = pytest.mark.skipif(_scan_cy is None,
                                    reason="compiled kernels unavailable")


def random_column(rng, n, kind):
    if kind == "boolean":
        v = rng.integers(0, 2, n).astype(np.float64)
    elif kind == "count":
        v = rng.integers(0, 5, n).astype(np.float64)
    else:
        v = np.round(rng.random(n), 3)
    y = rng.integers(0, 2, n).astype(np.uint8)
    order = np.argsort(v, kind="stable")
    return np.ascontiguousarray(v[order]), np.ascontiguousarray(y[order])


@needs_compiled
class TestParity:
    @pytest.mark.parametrize("kind", ["boolean", "count", "real"])
    def test_scan_parity_random(self, kind):
        rng = np.random.default_rng(99)
        for trial in range(200):
            n = int(rng.integers(2, 60))
            v, y = random_column(rng, n, kind)
            lam = float(rng.choice([0.0, 0.2, 1.0]))
            w = float(rng.choice([1.0, 1000.0]))
            min_leaf = int(rng.choice([1, 2, 5]))
            if kind == "real":
                a = _scan_py.scan_threshold(v, y, lam, w, min_leaf)
                b = _scan_cy.scan_threshold(v, y, lam, w, min_leaf)
            else:
                a = _scan_py.scan_equality(v, y, lam, w, min_leaf)
                b = _scan_cy.scan_equality(v, y, lam, w, min_leaf)
            assert a == b  # bit-exact scores, thresholds, and side flags

    def test_levenshtein_parity(self):
        rng = np.random.default_rng(5)
        alphabet = "abcdef"
        for _ in range(300):
            a = "".join(rng.choice(list(alphabet), rng.integers(0, 12)))
            b = "".join(rng.choice(list(alphabet), rng.integers(0, 12)))
            assert _scan_py.levenshtein(a, b) == _scan_cy.levenshtein(a, b)


class TestPureKernels:
    def test_no_candidate_on_constant_column(self):
        v = np.zeros(8)
        y = np.array([0, 1] * 4, dtype=np.uint8)
        assert _scan_py.scan_threshold(v, y, 0.2, 1.0, 1) is None
        assert _scan_py.scan_equality(v, y, 0.2, 1.0, 1) is None

    def test_min_leaf_filters_candidates(self):
        v = np.array([0.0, 1.0, 1.0, 1.0, 1.0, 1.0])
        y = np.array([1, 0, 0, 0, 0, 0], dtype=np.uint8)
        assert _scan_py.scan_threshold(v, y, 0.2, 1.0, 2) is None

    def test_first_minimum_wins_ties(self):
        # a fully mixed boolean column: both equality candidates score the
        # same, the smaller value must win
        v = np.array([0.0, 0.0, 1.0, 1.0])
        y = np.array([1, 0, 1, 0], dtype=np.uint8)
        score, value, _ = _scan_py.scan_equality(v, y, 0.2, 1.0, 1)
        assert value == 0.0

    def test_levenshtein_basics(self):
        assert _scan_py.levenshtein("", "") == 0
        assert _scan_py.levenshtein("abc", "") == 3
        assert _scan_py.levenshtein("kitten", "sitting") == 3
