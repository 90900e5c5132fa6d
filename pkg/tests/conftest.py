import numpy as np
import pytest

from riskrank.data import EQUIVALENT, INEQUIVALENT, Record, Workload, make_pair


@pytest.fixture
def toy_schema():
    return {"name": "entity-name", "title": "text", "authors": "entity-set",
            "year": "number"}


def make_workload(rows, schema, probs=None, truths=None):
    """Workload from (left_values, right_values) dicts, one pair per row."""
    left, right, pairs = {}, {}, []
    for i, (lv, rv) in enumerate(rows):
        lid, rid = f"l{i}", f"r{i}"
        left[lid] = Record(id=lid, values=lv)
        right[rid] = Record(id=rid, values=rv)
        prob = 0.5 if probs is None else probs[i]
        truth = None if truths is None else truths[i]
        pairs.append(make_pair(lid, rid, prob, truth))
    return Workload(pairs=tuple(pairs), schema=schema,
                    records_left=left, records_right=right)


@pytest.fixture
def workload_factory():
    return make_workload


def column_workload(columns, truth, schema=None):
    """Single-attribute-per-column workload for forest tests.

    ``columns`` maps attribute name -> per-pair raw values; ``truth`` is a
    0/1 equivalence sequence.
    """
    n = len(truth)
    schema = schema or {a: "number" for a in columns}
    rows = []
    for i in range(n):
        lv = {a: str(columns[a][i][0]) for a in columns}
        rv = {a: str(columns[a][i][1]) for a in columns}
        rows.append((lv, rv))
    truths = [EQUIVALENT if t else INEQUIVALENT for t in truth]
    return make_workload(rows, schema, truths=truths)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
