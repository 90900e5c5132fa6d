# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: split scans and edit distance.

Mirrors _scan_py exactly.  Candidate scores use the same IEEE-754
operation sequence as the numpy fallback so both backends return
bit-identical results, including tie resolution (first candidate wins).
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

ctypedef cnp.float64_t f64
ctypedef cnp.uint8_t u8


cdef inline double _side_score(double nm, double nu, double lam, double w) nogil:
    cdef double wm = w * nm
    cdef double tot = wm + nu
    cdef double tm = wm / tot
    cdef double tu = nu / tot
    cdef double g = 1.0 - tm * tm - tu * tu
    return lam / (nm + nu) + (1.0 - lam) * g


def scan_threshold(cnp.ndarray[f64, ndim=1] values,
                   cnp.ndarray[u8, ndim=1] labels,
                   double lam, double class_weight, long min_leaf):
    """Best midpoint split of a column sorted ascending; see _scan_py."""
    cdef Py_ssize_t n = values.shape[0]
    if n < 2:
        return None
    cdef long m_total = 0
    cdef Py_ssize_t i
    for i in range(n):
        m_total += labels[i]

    cdef double best_score = 0.0
    cdef double best_thr = 0.0
    cdef double best_left = 0.0
    cdef double best_right = 0.0
    cdef bint found = False
    cdef long cum_m = 0
    cdef long n_left, m_left
    cdef double nm_l, nu_l, nm_r, nu_r, sl, sr, s

    for i in range(n - 1):
        cum_m += labels[i]
        if values[i + 1] == values[i]:
            continue
        n_left = i + 1
        if n_left < min_leaf or (n - n_left) < min_leaf:
            continue
        m_left = cum_m
        nm_l = <double> m_left
        nu_l = <double> (n_left - m_left)
        nm_r = <double> (m_total - m_left)
        nu_r = <double> ((n - n_left) - (m_total - m_left))
        sl = _side_score(nm_l, nu_l, lam, class_weight)
        sr = _side_score(nm_r, nu_r, lam, class_weight)
        s = sl if sl <= sr else sr
        if not found or s < best_score:
            found = True
            best_score = s
            best_thr = 0.5 * (values[i] + values[i + 1])
            best_left = sl
            best_right = sr
    if not found:
        return None
    return best_score, best_thr, bool(best_left <= best_right)


def scan_equality(cnp.ndarray[f64, ndim=1] values,
                  cnp.ndarray[u8, ndim=1] labels,
                  double lam, double class_weight, long min_leaf):
    """Best single-value equality split of a column sorted ascending."""
    cdef Py_ssize_t n = values.shape[0]
    if n < 2:
        return None
    cdef long m_total = 0
    cdef Py_ssize_t i
    for i in range(n):
        m_total += labels[i]

    cdef double best_score = 0.0
    cdef double best_val = 0.0
    cdef double best_left = 0.0
    cdef double best_right = 0.0
    cdef bint found = False
    cdef bint multiple = False
    cdef Py_ssize_t start = 0
    cdef long m_eq = 0
    cdef long n_eq
    cdef double nm_l, nu_l, nm_r, nu_r, sl, sr, s

    for i in range(n):
        m_eq += labels[i]
        if i + 1 < n and values[i + 1] == values[i]:
            continue
        # group [start, i] holds one distinct value
        if start > 0 or i + 1 < n:
            multiple = True
        n_eq = i + 1 - start
        if n_eq >= min_leaf and (n - n_eq) >= min_leaf and n_eq < n:
            nm_l = <double> m_eq
            nu_l = <double> (n_eq - m_eq)
            nm_r = <double> (m_total - m_eq)
            nu_r = <double> ((n - n_eq) - (m_total - m_eq))
            sl = _side_score(nm_l, nu_l, lam, class_weight)
            sr = _side_score(nm_r, nu_r, lam, class_weight)
            s = sl if sl <= sr else sr
            if not found or s < best_score:
                found = True
                best_score = s
                best_val = values[start]
                best_left = sl
                best_right = sr
        start = i + 1
        m_eq = 0
    if not found or not multiple:
        return None
    return best_score, best_val, bool(best_left <= best_right)


def levenshtein(str a, str b):
    """Edit distance between two strings (insert/delete/substitute, cost 1)."""
    if a == b:
        return 0
    cdef Py_ssize_t la = len(a)
    cdef Py_ssize_t lb = len(b)
    if la == 0:
        return lb
    if lb == 0:
        return la
    cdef cnp.ndarray[cnp.int32_t, ndim=1] ca = np.empty(la, dtype=np.int32)
    cdef cnp.ndarray[cnp.int32_t, ndim=1] cb = np.empty(lb, dtype=np.int32)
    cdef Py_ssize_t i, j
    for i in range(la):
        ca[i] = ord(a[i])
    for j in range(lb):
        cb[j] = ord(b[j])
    cdef cnp.ndarray[cnp.int64_t, ndim=1] prev = np.arange(lb + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cur = np.zeros(lb + 1, dtype=np.int64)
    cdef long d, ins, sub, cost
    for i in range(1, la + 1):
        cur[0] = i
        for j in range(1, lb + 1):
            cost = 0 if ca[i - 1] == cb[j - 1] else 1
            d = prev[j] + 1
            ins = cur[j - 1] + 1
            if ins < d:
                d = ins
            sub = prev[j - 1] + cost
            if sub < d:
                d = sub
            cur[j] = d
        prev, cur = cur, prev
    return int(prev[lb])
