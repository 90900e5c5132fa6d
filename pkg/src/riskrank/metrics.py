"""Per-attribute similarity and difference metrics.

Every metric normalizes its string inputs the same way (lowercase, trim,
collapse internal whitespace; tokens are maximal alphanumeric runs), so
metric values are invariant to case and surrounding whitespace.  Nulls
never reach a metric: the matrix builder flags those cells instead.

Value classes drive how rule mining proposes split candidates:
``boolean`` and ``count`` columns get equality candidates, ``real``
columns get midpoint thresholds.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .data import Workload
from .errors import ConfigError, DataError

SIMILARITY = "similarity"
DIFFERENCE = "difference"

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def normalize_text(s: str) -> str:
    """Lowercase, trim, and collapse internal whitespace runs."""
    return " ".join(s.lower().split())


def tokenize(s: str) -> tuple[str, ...]:
    """Maximal alphanumeric runs of the normalized text, in order."""
    return tuple(_TOKEN_RE.findall(normalize_text(s)))


def first_letter_abbreviation(s: str) -> str:
    """First letter of every token, concatenated ("journal of the acm" -> "jota")."""
    return "".join(t[0] for t in tokenize(s))


def parse_entity_set(s: str | Iterable[str], splitter: str = ",") -> frozenset[str]:
    """Entity names split on ``splitter``, normalized, empties dropped."""
    if isinstance(s, str):
        parts = s.split(splitter)
    else:
        parts = list(s)
    return frozenset(filter(None, (normalize_text(p) for p in parts)))


def parse_number(v: object) -> float | None:
    """Float value of ``v``, or None when it cannot be parsed."""
    if v is None:
        return None
    if isinstance(v, (int, float)):
        return float(v)
    try:
        x = float(str(v).strip())
    except ValueError:
        return None
    return x if math.isfinite(x) else None


# ---------------------------------------------------------------------------
# difference metrics on entity names


def _contains(part: str, whole: str, mode: str) -> bool:
    if mode == "substring":
        return part in whole
    if mode == "prefix":
        return whole.startswith(part)
    if mode == "suffix":
        return whole.endswith(part)
    raise ConfigError(f"unknown containment mode {mode!r}")


def name_difference(a: str, b: str, mode: str = "substring",
                    abbreviated: bool = False) -> int:
    """0 when one entity name contains the other under ``mode``, else 1.

    With ``abbreviated`` the containment test runs between the
    first-letter abbreviation of one value and the other value, in both
    directions.  A result of 1 signals that the names likely denote
    different entities.
    """
    na, nb = normalize_text(a), normalize_text(b)
    if abbreviated:
        aa, ab = first_letter_abbreviation(a), first_letter_abbreviation(b)
        hit = (_contains(aa, nb, mode) or _contains(nb, aa, mode)
               or _contains(ab, na, mode) or _contains(na, ab, mode))
    else:
        hit = _contains(na, nb, mode) or _contains(nb, na, mode)
    return 0 if hit else 1


# ---------------------------------------------------------------------------
# difference metrics on entity sets


def diff_cardinality(a: str | Iterable[str], b: str | Iterable[str],
                     splitter: str = ",") -> int:
    """1 when the two sets hold different numbers of entity names."""
    sa, sb = parse_entity_set(a, splitter), parse_entity_set(b, splitter)
    return int(len(sa) != len(sb))


def distinct_entity(a: str | Iterable[str], b: str | Iterable[str],
                    splitter: str = ",") -> int:
    """Number of entity names present in exactly one of the two sets."""
    sa, sb = parse_entity_set(a, splitter), parse_entity_set(b, splitter)
    return len(sa ^ sb)


def entity_jaccard(a: str | Iterable[str], b: str | Iterable[str],
                   splitter: str = ",") -> float:
    """|A ∩ B| / |A ∪ B| over entity names; 1.0 when both sets are empty."""
    sa, sb = parse_entity_set(a, splitter), parse_entity_set(b, splitter)
    union = len(sa | sb)
    if union == 0:
        return 1.0
    return len(sa & sb) / union


# ---------------------------------------------------------------------------
# difference metric on text: rare-token mismatch count


@dataclass(frozen=True)
class IdfIndex:
    """Inverse document frequencies for one text attribute.

    ``idf[t] = ln(n_docs / df(t))``.  Tokens above ``key_threshold`` are
    discriminating ("key") tokens; the default threshold ln(n_docs / 2)
    admits tokens occurring in at most two documents.  Tokens never seen
    in the corpus count as maximally rare (df treated as 1).
    """

    idf: Mapping[str, float]
    n_docs: int
    key_threshold: float

    def token_idf(self, token: str) -> float:
        got = self.idf.get(token)
        if got is None:
            return math.log(max(self.n_docs, 1))
        return got

    def is_key(self, token: str) -> bool:
        return self.token_idf(token) >= self.key_threshold


def build_idf_index(documents: Iterable[str | None],
                    key_threshold: float | None = None) -> IdfIndex:
    """Build an IdfIndex from raw attribute values (nulls skipped)."""
    df: dict[str, int] = {}
    n_docs = 0
    for doc in documents:
        if doc is None:
            continue
        n_docs += 1
        for tok in set(tokenize(str(doc))):
            df[tok] = df.get(tok, 0) + 1
    if key_threshold is None:
        key_threshold = math.log(n_docs / 2.0) if n_docs >= 2 else 0.0
    idf = {t: math.log(n_docs / c) for t, c in df.items()}
    return IdfIndex(idf=idf, n_docs=n_docs, key_threshold=key_threshold)


def diff_key_token(a: str | Iterable[str], b: str | Iterable[str],
                   idx: IdfIndex) -> int:
    """Number of key tokens appearing in exactly one of the two texts."""
    if idx is None:
        raise DataError("diff_key_token requires an idf index")
    ta = frozenset(tokenize(a)) if isinstance(a, str) else frozenset(a)
    tb = frozenset(tokenize(b)) if isinstance(b, str) else frozenset(b)
    return sum(1 for t in ta ^ tb if idx.is_key(t))


# ---------------------------------------------------------------------------
# similarity metrics


def token_jaccard(a: str | Iterable[str], b: str | Iterable[str]) -> float:
    """Jaccard similarity of the two token sets; 1.0 when both are empty."""
    ta = frozenset(tokenize(a)) if isinstance(a, str) else frozenset(a)
    tb = frozenset(tokenize(b)) if isinstance(b, str) else frozenset(b)
    union = len(ta | tb)
    if union == 0:
        return 1.0
    return len(ta & tb) / union


def edit_similarity(a: str, b: str) -> float:
    """1 - levenshtein / max-length over normalized strings, in [0, 1]."""
    na, nb = normalize_text(a), normalize_text(b)
    longest = max(len(na), len(nb))
    if longest == 0:
        return 1.0
    return 1.0 - _kernels.levenshtein(na, nb) / longest


def number_equality(a: object, b: object) -> int:
    """1 when the two numeric values are equal, else 0."""
    xa, xb = parse_number(a), parse_number(b)
    if xa is None or xb is None:
        raise DataError("number_equality requires parseable numbers")
    return int(xa == xb)


def number_difference(a: object, b: object) -> float:
    """Signed difference left - right."""
    xa, xb = parse_number(a), parse_number(b)
    if xa is None or xb is None:
        raise DataError("number_difference requires parseable numbers")
    return xa - xb


# ---------------------------------------------------------------------------
# descriptors and the pair-by-metric matrix

BOOLEAN = "boolean"
COUNT = "count"
REAL = "real"

# metric id -> (kind, allowed families, value class)
METRIC_SPECS: dict[str, tuple[str, tuple[str, ...], str]] = {
    "non_substring": (DIFFERENCE, ("entity-name",), BOOLEAN),
    "abbr_non_substring": (DIFFERENCE, ("entity-name",), BOOLEAN),
    "non_prefix": (DIFFERENCE, ("entity-name",), BOOLEAN),
    "abbr_non_prefix": (DIFFERENCE, ("entity-name",), BOOLEAN),
    "non_suffix": (DIFFERENCE, ("entity-name",), BOOLEAN),
    "abbr_non_suffix": (DIFFERENCE, ("entity-name",), BOOLEAN),
    "diff_cardinality": (DIFFERENCE, ("entity-set",), BOOLEAN),
    "distinct_entity": (DIFFERENCE, ("entity-set",), COUNT),
    "diff_key_token": (DIFFERENCE, ("text",), COUNT),
    "token_jaccard": (SIMILARITY, ("text", "entity-name"), REAL),
    "edit_similarity": (SIMILARITY, ("text", "entity-name"), REAL),
    "entity_jaccard": (SIMILARITY, ("entity-set",), REAL),
    "number_equality": (SIMILARITY, ("number",), BOOLEAN),
    "number_difference": (DIFFERENCE, ("number",), REAL),
}

_NAME_DIFF_MODES = {
    "non_substring": ("substring", False),
    "abbr_non_substring": ("substring", True),
    "non_prefix": ("prefix", False),
    "abbr_non_prefix": ("prefix", True),
    "non_suffix": ("suffix", False),
    "abbr_non_suffix": ("suffix", True),
}


@dataclass(frozen=True)
class MetricDescriptor:
    """One metric applied to one attribute.

    ``name`` is the column identifier used in rule files and reports, so
    it must not contain whitespace.
    """

    name: str
    attribute: str
    metric: str
    params: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.metric not in METRIC_SPECS:
            raise ConfigError(f"unknown metric {self.metric!r}")
        if re.search(r"\s", self.name):
            raise ConfigError(f"descriptor name {self.name!r} contains whitespace")

    @property
    def kind(self) -> str:
        return METRIC_SPECS[self.metric][0]

    @property
    def value_class(self) -> str:
        return METRIC_SPECS[self.metric][2]

    def check_family(self, schema: Mapping[str, str]) -> None:
        if self.attribute not in schema:
            raise ConfigError(
                f"descriptor {self.name!r}: attribute {self.attribute!r} "
                "not in schema")
        family = schema[self.attribute]
        allowed = METRIC_SPECS[self.metric][1]
        if family not in allowed:
            raise ConfigError(
                f"descriptor {self.name!r}: metric {self.metric!r} does not "
                f"apply to {family!r} attributes")


_DEFAULT_METRICS_BY_KIND = {
    "text": ("token_jaccard", "edit_similarity", "diff_key_token"),
    "entity-name": ("edit_similarity", "non_substring", "abbr_non_substring",
                    "non_prefix", "abbr_non_prefix", "non_suffix",
                    "abbr_non_suffix"),
    "entity-set": ("entity_jaccard", "diff_cardinality", "distinct_entity"),
    "number": ("number_equality", "number_difference"),
}


def default_descriptors(schema: Mapping[str, str]) -> list[MetricDescriptor]:
    """The standard metric set for a schema, one group per attribute."""
    descs = []
    for attr, kind in schema.items():
        for metric in _DEFAULT_METRICS_BY_KIND[kind]:
            descs.append(MetricDescriptor(name=f"{attr}_{metric}",
                                          attribute=attr, metric=metric))
    return descs


class MetricMatrix:
    """Evaluated metric values for a workload: one row per pair, one
    column per descriptor.  ``flags`` marks cells whose inputs were null
    (or unparseable numbers); flagged cells never satisfy rule predicates
    and are excluded from split candidates."""

    def __init__(self, descriptors: Sequence[MetricDescriptor],
                 values: np.ndarray, flags: np.ndarray):
        self.descriptors = tuple(descriptors)
        self.values = values
        self.flags = flags

    @property
    def n_pairs(self) -> int:
        return self.values.shape[0]

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        return self.values[:, j], self.flags[:, j]

    def take_rows(self, indices: Sequence[int]) -> "MetricMatrix":
        idx = np.asarray(indices)
        return MetricMatrix(self.descriptors, self.values[idx], self.flags[idx])

    def dense(self, fill: float = 0.0) -> np.ndarray:
        """Values with flagged cells replaced by ``fill``."""
        out = self.values.copy()
        out[self.flags] = fill
        return out

    def validate_ranges(self) -> None:
        """Assert every unflagged column sits in its declared range."""
        for j, d in enumerate(self.descriptors):
            col = self.values[~self.flags[:, j], j]
            if col.size == 0:
                continue
            cls = d.value_class
            if cls == BOOLEAN and not np.isin(col, (0.0, 1.0)).all():
                raise DataError(f"column {d.name}: boolean metric outside {{0,1}}")
            if cls == COUNT and not ((col >= 0) & (col == np.floor(col))).all():
                raise DataError(f"column {d.name}: count metric not a nonneg integer")
            if d.metric in ("token_jaccard", "edit_similarity", "entity_jaccard"):
                if (col < 0).any() or (col > 1).any():
                    raise DataError(f"column {d.name}: similarity outside [0,1]")


class _PreparedValues:
    """Per-record parsed forms for one attribute, computed once."""

    __slots__ = ("norm", "tokens", "entities", "number")

    def __init__(self, raw: object, family: str, splitter: str):
        s = None if raw is None else str(raw)
        self.norm = None if s is None else normalize_text(s)
        self.tokens = None if s is None else frozenset(tokenize(s))
        self.entities = (parse_entity_set(s, splitter)
                         if s is not None and family == "entity-set" else None)
        self.number = parse_number(s) if family == "number" else None


def _eval_metric(desc: MetricDescriptor, lv: _PreparedValues, rv: _PreparedValues,
                 raw_left: object, raw_right: object,
                 idf: IdfIndex | None) -> float | None:
    """Metric value for one cell, or None when an input is null."""
    m = desc.metric
    if m in _NAME_DIFF_MODES:
        if raw_left is None or raw_right is None:
            return None
        mode, abbr = _NAME_DIFF_MODES[m]
        return float(name_difference(str(raw_left), str(raw_right), mode, abbr))
    if m == "diff_cardinality":
        if lv.entities is None or rv.entities is None:
            return None
        return float(int(len(lv.entities) != len(rv.entities)))
    if m == "distinct_entity":
        if lv.entities is None or rv.entities is None:
            return None
        return float(len(lv.entities ^ rv.entities))
    if m == "entity_jaccard":
        if lv.entities is None or rv.entities is None:
            return None
        return entity_jaccard(lv.entities, rv.entities)
    if m == "diff_key_token":
        if lv.tokens is None or rv.tokens is None:
            return None
        return float(sum(1 for t in lv.tokens ^ rv.tokens if idf.is_key(t)))
    if m == "token_jaccard":
        if lv.tokens is None or rv.tokens is None:
            return None
        return token_jaccard(lv.tokens, rv.tokens)
    if m == "edit_similarity":
        if lv.norm is None or rv.norm is None:
            return None
        longest = max(len(lv.norm), len(rv.norm))
        if longest == 0:
            return 1.0
        return 1.0 - _kernels.levenshtein(lv.norm, rv.norm) / longest
    if m == "number_equality":
        if lv.number is None or rv.number is None:
            return None
        return float(int(lv.number == rv.number))
    if m == "number_difference":
        if lv.number is None or rv.number is None:
            return None
        return lv.number - rv.number
    raise ConfigError(f"unknown metric {m!r}")


def evaluate_metric(desc: MetricDescriptor, a: object, b: object,
                    idf: IdfIndex | None = None,
                    splitter: str = ",") -> float | None:
    """One metric value for a raw value pair; None when an input is null.

    diff_key_token descriptors need the attribute's ``idf`` index.
    """
    family = METRIC_SPECS[desc.metric][1][0]
    lv = _PreparedValues(a, family, splitter)
    rv = _PreparedValues(b, family, splitter)
    return _eval_metric(desc, lv, rv, a, b, idf)


def build_metric_matrix(w: Workload, descriptors: Sequence[MetricDescriptor],
                        splitter: str = ",") -> MetricMatrix:
    """Evaluate every descriptor on every pair of the workload.

    Idf indexes for diff_key_token columns are built over the union of
    both record tables.  Evaluation is deterministic: same workload and
    descriptor list, same matrix.
    """
    for d in descriptors:
        d.check_family(w.schema)

    idf_by_attr: dict[str, IdfIndex] = {}
    for d in descriptors:
        if d.metric == "diff_key_token" and d.attribute not in idf_by_attr:
            docs = [rec.values.get(d.attribute) for rec in w.records_left.values()]
            if w.records_right is not w.records_left:
                docs += [rec.values.get(d.attribute)
                         for rec in w.records_right.values()]
            thr = d.params.get("key_threshold")
            idf_by_attr[d.attribute] = build_idf_index(
                docs, float(thr) if thr is not None else None)

    prep_left: dict[tuple[str, str], _PreparedValues] = {}
    prep_right: dict[tuple[str, str], _PreparedValues] = {}

    def prepared(cache, table, rid, attr):
        key = (rid, attr)
        got = cache.get(key)
        if got is None:
            got = _PreparedValues(table[rid].values.get(attr), w.schema[attr], splitter)
            cache[key] = got
        return got

    n, k = len(w.pairs), len(descriptors)
    values = np.empty((n, k), dtype=np.float64)
    flags = np.zeros((n, k), dtype=bool)
    for i, pair in enumerate(w.pairs):
        for j, d in enumerate(descriptors):
            lv = prepared(prep_left, w.records_left, pair.left, d.attribute)
            rv = prepared(prep_right, w.records_right, pair.right, d.attribute)
            raw_l = w.records_left[pair.left].values.get(d.attribute)
            raw_r = w.records_right[pair.right].values.get(d.attribute)
            cell = _eval_metric(d, lv, rv, raw_l, raw_r,
                                idf_by_attr.get(d.attribute))
            if cell is None:
                values[i, j] = np.nan
                flags[i, j] = True
            else:
                values[i, j] = cell
    return MetricMatrix(descriptors, values, flags)
