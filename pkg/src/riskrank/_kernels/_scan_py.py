"""Pure-numpy fallback for the hot inner loops.

The compiled twin (_scan_cy) implements the same three functions with C
loops.  Both backends must return bit-identical results: every candidate
score is computed with the same sequence of IEEE-754 double operations,
and ties are resolved by the first (smallest threshold) candidate, which
is what ``np.argmin`` and a strictly-less C comparison both yield.
"""

import numpy as np

BACKEND_NAME = "pure"


def _side_scores(n_match, n_unmatch, lam, class_weight):
    # One side of the size/impurity trade-off: lam/|side| + (1-lam)*gini.
    # Match counts are multiplied by the class weight before proportions
    # are formed; the expression order must match the compiled backend.
    wm = class_weight * n_match
    tot = wm + n_unmatch
    tm = wm / tot
    tu = n_unmatch / tot
    g = 1.0 - tm * tm - tu * tu
    return lam / (n_match + n_unmatch) + (1.0 - lam) * g


def scan_threshold(values, labels, lam, class_weight, min_leaf):
    """Best midpoint split of a column sorted ascending.

    Parameters
    ----------
    values : float64 array, sorted ascending, no NaN
    labels : uint8 array aligned with values, 1 = equivalent pair
    lam, class_weight : scoring parameters
    min_leaf : both sides of a candidate must have at least this many pairs

    Returns
    -------
    (score, threshold, left_is_chosen) or None when no candidate is valid.
    """
    n = values.shape[0]
    if n < 2:
        return None
    cuts = np.nonzero(values[1:] != values[:-1])[0]
    if cuts.size == 0:
        return None
    n_left = (cuts + 1).astype(np.float64)
    cum_m = np.cumsum(labels, dtype=np.int64)
    m_total = float(cum_m[-1])
    m_left = cum_m[cuts].astype(np.float64)
    u_left = n_left - m_left
    n_right = float(n) - n_left
    m_right = m_total - m_left
    u_right = n_right - m_right

    left = _side_scores(m_left, u_left, lam, class_weight)
    right = _side_scores(m_right, u_right, lam, class_weight)
    score = np.minimum(left, right)
    invalid = (n_left < min_leaf) | (n_right < min_leaf)
    score[invalid] = np.inf
    best = int(np.argmin(score))
    if not np.isfinite(score[best]):
        return None
    thr = 0.5 * (values[cuts[best]] + values[cuts[best] + 1])
    return float(score[best]), float(thr), bool(left[best] <= right[best])


def scan_equality(values, labels, lam, class_weight, min_leaf):
    """Best single-value equality split of a column sorted ascending.

    Candidates are the distinct values v, partitioning into {x == v} (the
    left side) and {x != v}.  Same return convention as scan_threshold.
    """
    n = values.shape[0]
    if n < 2:
        return None
    starts = np.nonzero(np.concatenate(([True], values[1:] != values[:-1])))[0]
    if starts.size < 2:
        return None
    ends = np.concatenate((starts[1:], [n]))
    cum_m = np.concatenate(([0], np.cumsum(labels, dtype=np.int64)))
    m_total = float(cum_m[-1])
    n_eq = (ends - starts).astype(np.float64)
    m_eq = (cum_m[ends] - cum_m[starts]).astype(np.float64)
    u_eq = n_eq - m_eq
    n_ne = float(n) - n_eq
    m_ne = m_total - m_eq
    u_ne = n_ne - m_ne

    left = _side_scores(m_eq, u_eq, lam, class_weight)
    right = _side_scores(m_ne, u_ne, lam, class_weight)
    score = np.minimum(left, right)
    invalid = (n_eq < min_leaf) | (n_ne < min_leaf)
    score[invalid] = np.inf
    best = int(np.argmin(score))
    if not np.isfinite(score[best]):
        return None
    return float(score[best]), float(values[starts[best]]), bool(left[best] <= right[best])


def levenshtein(a, b):
    """Edit distance between two strings (insert/delete/substitute, cost 1)."""
    if a == b:
        return 0
    la, lb = len(a), len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    prev = list(range(lb + 1))
    cur = [0] * (lb + 1)
    for i in range(1, la + 1):
        cur[0] = i
        ca = a[i - 1]
        for j in range(1, lb + 1):
            cost = 0 if ca == b[j - 1] else 1
            d = prev[j] + 1
            ins = cur[j - 1] + 1
            if ins < d:
                d = ins
            sub = prev[j - 1] + cost
            if sub < d:
                d = sub
            cur[j] = d
        prev, cur = cur, prev
    return prev[lb]
