"""Record tables, pre-blocked pair lists, and deterministic splits.

Input files are delimited text (comma by default) with a mandatory header
row, UTF-8 encoded.  Record tables carry an ``id`` column plus one column
per schema attribute; empty cells are nulls.  Pair files carry
``left_id``, ``right_id``, ``classifier_prob`` and an optional
``ground_truth`` column (1 = equivalent, 0 = inequivalent, blank =
unknown).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DataError

MATCHING = "matching"
UNMATCHING = "unmatching"
EQUIVALENT = "equivalent"
INEQUIVALENT = "inequivalent"

VALUE_KINDS = ("entity-name", "entity-set", "text", "number")

ROLE_CLASSIFIER_TRAIN = "classifier-train"
ROLE_RISK_TRAIN = "risk-train"
ROLE_TEST = "test"


@dataclass(frozen=True)
class Record:
    """One row of a source table: an opaque id plus attribute values."""

    id: str
    values: Mapping[str, object]


@dataclass(frozen=True)
class RecordPair:
    """A candidate pair with its classifier probability and optional truth.

    ``machine_label`` is derived from the probability (ties at 0.5 map to
    matching) and ``risk_label`` is 1 exactly when the machine label
    contradicts the ground truth.
    """

    left: str
    right: str
    classifier_prob: float
    machine_label: str
    ground_truth: str | None = None
    risk_label: int | None = None


def derive_machine_label(p: float) -> str:
    """Machine label for a classifier probability; 0.5 counts as matching."""
    if not (0.0 <= p <= 1.0):
        raise DataError(f"classifier probability {p!r} outside [0, 1]")
    return MATCHING if p >= 0.5 else UNMATCHING


def derive_risk_label(machine_label: str, ground_truth: str | None) -> int | None:
    """1 when the machine label contradicts ground truth, 0 when it agrees."""
    if ground_truth is None:
        return None
    agrees = (machine_label == MATCHING) == (ground_truth == EQUIVALENT)
    return 0 if agrees else 1


def make_pair(left: str, right: str, classifier_prob: float,
              ground_truth: str | None = None) -> RecordPair:
    """Build a RecordPair with derived machine and risk labels."""
    label = derive_machine_label(classifier_prob)
    return RecordPair(
        left=left,
        right=right,
        classifier_prob=float(classifier_prob),
        machine_label=label,
        ground_truth=ground_truth,
        risk_label=derive_risk_label(label, ground_truth),
    )


@dataclass(frozen=True)
class Workload:
    """An immutable set of pairs over two record tables.

    ``records_left`` and ``records_right`` are the same mapping when both
    sides of the pairs come from a single table.
    """

    pairs: tuple[RecordPair, ...]
    schema: Mapping[str, str]
    records_left: Mapping[str, Record]
    records_right: Mapping[str, Record]
    role: str | None = None

    def __len__(self) -> int:
        return len(self.pairs)

    def subset(self, indices: Sequence[int], role: str | None = None) -> "Workload":
        """Sub-workload holding the pairs at ``indices`` (original order kept)."""
        return replace(self, pairs=tuple(self.pairs[i] for i in indices), role=role)

    def left_record(self, pair: RecordPair) -> Record:
        return self.records_left[pair.left]

    def right_record(self, pair: RecordPair) -> Record:
        return self.records_right[pair.right]

    def ground_truth_array(self) -> np.ndarray:
        """Equivalence indicators (uint8); raises if any pair lacks truth."""
        out = np.empty(len(self.pairs), dtype=np.uint8)
        for i, p in enumerate(self.pairs):
            if p.ground_truth is None:
                raise DataError(f"pair ({p.left}, {p.right}) has no ground truth")
            out[i] = 1 if p.ground_truth == EQUIVALENT else 0
        return out

    def risk_label_array(self) -> np.ndarray:
        """Mislabel indicators (uint8); raises if any pair lacks truth."""
        out = np.empty(len(self.pairs), dtype=np.uint8)
        for i, p in enumerate(self.pairs):
            if p.risk_label is None:
                raise DataError(f"pair ({p.left}, {p.right}) has no risk label")
            out[i] = p.risk_label
        return out

    def probabilities(self) -> np.ndarray:
        return np.array([p.classifier_prob for p in self.pairs], dtype=np.float64)

    def machine_label_array(self) -> np.ndarray:
        """1 where the machine label is matching (uint8)."""
        return np.array(
            [1 if p.machine_label == MATCHING else 0 for p in self.pairs],
            dtype=np.uint8,
        )


def _validate_schema(schema: Mapping[str, str]) -> None:
    for attr, kind in schema.items():
        if kind not in VALUE_KINDS:
            raise DataError(f"unknown value kind {kind!r} for attribute {attr!r}")


def load_records(path: str | Path, schema: Mapping[str, str],
                 delimiter: str = ",") -> dict[str, Record]:
    """Load a record table; ids must be unique and the header must cover
    ``id`` plus every schema attribute."""
    path = Path(path)
    records: dict[str, Record] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        if "id" not in header:
            raise DataError(f"{path}: record table lacks an 'id' column")
        for attr in schema:
            if attr not in header:
                raise DataError(f"{path}: schema attribute {attr!r} absent from table")
        for lineno, row in enumerate(reader, start=2):
            rid = row["id"]
            if rid is None or rid == "":
                raise DataError(f"{path}:{lineno}: empty record id")
            if rid in records:
                raise DataError(f"{path}:{lineno}: duplicate record id {rid!r}")
            values = {a: (row[a] if row[a] != "" else None) for a in schema}
            records[rid] = Record(id=rid, values=values)
    return records


def _parse_ground_truth(cell: str | None, where: str) -> str | None:
    if cell is None or cell == "":
        return None
    if cell == "1":
        return EQUIVALENT
    if cell == "0":
        return INEQUIVALENT
    raise DataError(f"{where}: ground_truth must be 0, 1 or blank, got {cell!r}")


def load_workload(record_files: Sequence[str | Path], pair_file: str | Path,
                  schema: Mapping[str, str], delimiter: str = ",",
                  role: str | None = None) -> Workload:
    """Load one or two record tables plus a pair list into a Workload.

    With a single record file both pair sides resolve against the same
    table.  Malformed rows are rejected with their line number.
    """
    _validate_schema(schema)
    files = [Path(f) for f in record_files]
    if len(files) == 1:
        left = right = load_records(files[0], schema, delimiter)
    elif len(files) == 2:
        left = load_records(files[0], schema, delimiter)
        right = load_records(files[1], schema, delimiter)
    else:
        raise DataError("expected one or two record files")

    pair_file = Path(pair_file)
    pairs: list[RecordPair] = []
    with open(pair_file, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        for col in ("left_id", "right_id", "classifier_prob"):
            if col not in header:
                raise DataError(f"{pair_file}: pair file lacks column {col!r}")
        has_truth = "ground_truth" in header
        for lineno, row in enumerate(reader, start=2):
            where = f"{pair_file}:{lineno}"
            lid, rid = row["left_id"], row["right_id"]
            if lid not in left:
                raise DataError(f"{where}: unknown left record id {lid!r}")
            if rid not in right:
                raise DataError(f"{where}: unknown right record id {rid!r}")
            try:
                prob = float(row["classifier_prob"])
            except (TypeError, ValueError):
                raise DataError(
                    f"{where}: bad classifier probability "
                    f"{row['classifier_prob']!r}") from None
            if not np.isfinite(prob) or not (0.0 <= prob <= 1.0):
                raise DataError(f"{where}: classifier probability {prob} outside [0, 1]")
            truth = _parse_ground_truth(row["ground_truth"], where) if has_truth else None
            pairs.append(make_pair(lid, rid, prob, truth))

    return Workload(pairs=tuple(pairs), schema=dict(schema),
                    records_left=left, records_right=right, role=role)


def save_records(records: Mapping[str, Record], schema: Mapping[str, str],
                 path: str | Path, delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        attrs = list(schema)
        writer.writerow(["id"] + attrs)
        for rid in records:
            rec = records[rid]
            writer.writerow([rid] + [
                "" if rec.values.get(a) is None else str(rec.values[a]) for a in attrs
            ])


def save_pairs(pairs: Iterable[RecordPair], path: str | Path,
               delimiter: str = ",") -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, delimiter=delimiter)
        writer.writerow(["left_id", "right_id", "classifier_prob", "ground_truth"])
        for p in pairs:
            if p.ground_truth is None:
                truth = ""
            else:
                truth = "1" if p.ground_truth == EQUIVALENT else "0"
            writer.writerow([p.left, p.right, repr(p.classifier_prob), truth])


def save_workload(w: Workload, left_path: str | Path, right_path: str | Path | None,
                  pairs_path: str | Path, delimiter: str = ",") -> None:
    """Write a workload back to delimited text; load/save round-trips."""
    save_records(w.records_left, w.schema, left_path, delimiter)
    if right_path is not None and w.records_right is not w.records_left:
        save_records(w.records_right, w.schema, right_path, delimiter)
    save_pairs(w.pairs, pairs_path, delimiter)


def split_workload(w: Workload, ratio: Sequence[int], seed: int,
                   ) -> tuple[Workload, Workload, Workload]:
    """Deterministic three-way split with sizes proportional to ``ratio``.

    Boundaries are the cumulative proportions rounded half-up, so every
    part is within one pair of its exact share.  Pairs keep their file
    order inside each part.
    """
    if len(ratio) != 3 or any(r < 0 for r in ratio):
        raise DataError(f"ratio must be three nonnegative integers, got {ratio!r}")
    total = sum(ratio)
    if total == 0:
        raise DataError("ratio components sum to zero")
    n = len(w.pairs)
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    c1 = int(np.floor(n * ratio[0] / total + 0.5))
    c2 = int(np.floor(n * (ratio[0] + ratio[1]) / total + 0.5))
    parts = (np.sort(perm[:c1]), np.sort(perm[c1:c2]), np.sort(perm[c2:]))
    roles = (ROLE_CLASSIFIER_TRAIN, ROLE_RISK_TRAIN, ROLE_TEST)
    return tuple(w.subset(idx, role) for idx, role in zip(parts, roles))  # type: ignore[return-value]
