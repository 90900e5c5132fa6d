"""Bundled synthetic corpora for demos, tests and benchmarks.

Two corpus families over a bibliographic-style schema (title text,
author set, venue name, three numeric attributes; 19 default metric
columns):

* ``trap``: a slice of "version duplicate" pairs — exact copies where
  exactly one of pages/volume was nudged — labeled inequivalent.  No
  equivalent pair ever disagrees on an *unflagged* number (dirty
  duplicates carry missing numbers instead), so "pages differ" and
  "volume differ" are pure single-predicate rules.  A per-column linear
  classifier, however, sees flagged cells as zeros, which arranges the
  classes in an XOR pattern over its (pages-equal, volume-equal) view:
  it cannot separate the traps from the null-bearing equivalent twins
  and labels them matching with high confidence.

* ``planted-rule``: pair-internal year equality holds everywhere except
  on a planted subset of chosen size and purity, so mining must recover
  the rule "year differs -> inequivalent" with those exact statistics.

Record and pair files are written in the standard formats with
classifier probabilities produced by the reference scorer fitted on the
classifier-train split, so every downstream command runs unmodified.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .data import (
    EQUIVALENT,
    INEQUIVALENT,
    Record,
    Workload,
    make_pair,
    save_pairs,
    save_records,
    split_workload,
)
from .metrics import build_metric_matrix, default_descriptors
from .refscorer import ScorerConfig, bootstrap_ensemble, fit_reference, score_reference

SCHEMA = {
    "title": "text",
    "authors": "entity-set",
    "venue": "entity-name",
    "year": "number",
    "pages": "number",
    "volume": "number",
}

_LETTERS = np.array(list(string.ascii_lowercase))


def _words(rng: np.random.Generator, count: int, lo: int = 4, hi: int = 9) -> list[str]:
    lengths = rng.integers(lo, hi, size=count)
    return ["".join(rng.choice(_LETTERS, size=n)) for n in lengths]


@dataclass(frozen=True)
class _Entity:
    title: tuple[str, ...]
    serial: str
    authors: tuple[str, ...]
    venue: str
    year: int
    pages: int | None
    volume: int | None

    def values(self) -> dict[str, object]:
        return {
            "title": " ".join(self.title + (self.serial,)),
            "authors": ", ".join(self.authors),
            "venue": self.venue,
            "year": str(self.year),
            "pages": None if self.pages is None else str(self.pages),
            "volume": None if self.volume is None else str(self.volume),
        }


class _World:
    """Shared vocabulary pools, deterministic per seed."""

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self.vocab = _words(rng, 600)
        self.surnames = _words(rng, 300, 5, 10)
        self.venues = [" ".join(_words(rng, int(rng.integers(2, 5))))
                       for _ in range(15)]
        self.counter = 0

    def entity(self, year: int | None = None) -> _Entity:
        rng = self.rng
        self.counter += 1
        n_title = int(rng.integers(8, 12))
        title = tuple(self.vocab[i]
                      for i in rng.integers(0, len(self.vocab), n_title))
        n_auth = int(rng.integers(3, 6))
        picks = rng.choice(len(self.surnames), size=n_auth, replace=False)
        initials = rng.choice(_LETTERS, size=n_auth)
        authors = tuple(f"{initials[a]} {self.surnames[picks[a]]}"
                        for a in range(n_auth))
        return _Entity(
            title=title,
            serial=f"uid{self.counter:05d}",
            authors=authors,
            venue=self.venues[int(rng.integers(0, len(self.venues)))],
            year=int(rng.integers(1995, 2016)) if year is None else year,
            pages=int(rng.integers(10, 51)),
            volume=int(rng.integers(10, 51)),
        )

    def fresh_author(self, avoid: list[str]) -> str:
        rng = self.rng
        for _ in range(50):
            name = (f"{rng.choice(_LETTERS)} "
                    f"{self.surnames[int(rng.integers(0, len(self.surnames)))]}")
            if name not in avoid:
                return name
        return f"z {''.join(rng.choice(_LETTERS, size=8))}"

    def dirty_copy(self, e: _Entity, heavy: bool = False) -> _Entity:
        """Equivalent duplicate with dirt: dropped title tokens, possibly
        missing authors; numbers untouched.  ``heavy`` dirt drops more of
        both and additionally re-keys the record (fresh serial token)."""
        rng = self.rng
        title = list(e.title)
        drops = int(rng.integers(4, 7)) if heavy else int(rng.integers(0, 3))
        for _ in range(drops):
            if len(title) > 3:
                title.pop(int(rng.integers(0, len(title))))
        authors = list(e.authors)
        serial = e.serial
        if heavy:
            while len(authors) > 2 and rng.random() < 0.5:
                authors.pop(int(rng.integers(0, len(authors))))
            self.counter += 1
            serial = f"uid{self.counter:05d}"
        elif len(authors) > 2 and rng.random() < 0.3:
            authors.pop(int(rng.integers(0, len(authors))))
        return replace(e, title=tuple(title), authors=tuple(authors),
                       serial=serial)

    def near_miss(self, e1: _Entity) -> _Entity:
        """A different entity sharing venue, year, most title tokens and
        all but one author with e1: inequivalent, but close enough that a
        per-column scorer keeps it near the decision boundary."""
        rng = self.rng
        e2 = self.entity(year=e1.year)
        n_shared = int(rng.integers(6, 9))
        title = list(e2.title)
        for k in range(min(n_shared, len(e1.title), len(title))):
            title[k] = e1.title[k]
        authors = list(e1.authors)
        slot = int(rng.integers(0, len(authors)))
        authors[slot] = self.fresh_author(list(e1.authors))
        return replace(e2, title=tuple(title), venue=e1.venue,
                       authors=tuple(authors),
                       pages=e1.pages if rng.random() < 0.5 else e2.pages,
                       volume=e1.volume if rng.random() < 0.5 else e2.volume)

    def _nudge(self, value: int, lo: int, hi: int) -> int:
        # a strictly different positive value, |step| in [lo, hi]
        d = int(self.rng.integers(lo, hi + 1))
        if self.rng.random() < 0.5 and value - d >= 1:
            return value - d
        return value + d

    def version_copy(self, e: _Entity, change_pages: bool, change_volume: bool,
                     lo: int = 3, hi: int = 8) -> _Entity:
        """Copy that differs only in the selected numeric attributes."""
        pages = self._nudge(e.pages, lo, hi) if change_pages else e.pages
        volume = self._nudge(e.volume, lo, hi) if change_volume else e.volume
        return replace(e, pages=pages, volume=volume)


def _assemble(world: _World, specs: list[tuple[_Entity, _Entity, str]],
              rng: np.random.Generator):
    """Shuffle pair specs and materialize record tables and pair rows."""
    order = rng.permutation(len(specs))
    left: dict[str, Record] = {}
    right: dict[str, Record] = {}
    rows: list[tuple[str, str, str]] = []
    for new_i, old_i in enumerate(order):
        e_left, e_right, truth = specs[old_i]
        lid, rid = f"a{new_i:05d}", f"b{new_i:05d}"
        left[lid] = Record(id=lid, values=e_left.values())
        right[rid] = Record(id=rid, values=e_right.values())
        rows.append((lid, rid, truth))
    return left, right, rows


def trap_corpus(n_pairs: int, seed: int, trap_fraction: float = 0.10):
    """Corpus whose mislabel set is a rule-identifiable trap slice.

    No equivalent pair ever carries an unflagged number disagreement
    (dirty duplicates get missing numbers instead of corrections), so
    "pages differ" and "volume differ" are pure inequivalence rules that
    mining peels straight off the root.  A per-column linear scorer sees
    flagged cells as zero-filled, which arranges the classes in an XOR
    pattern over the (pages-equal, volume-equal) view: exact-copy traps
    with a single nudged number sit in cells it cannot separate, next to
    null-bearing equivalent twins, and get labeled matching at high
    confidence.
    """
    rng = np.random.default_rng(seed)
    world = _World(rng)
    n_trap = int(round(n_pairs * trap_fraction))
    n_t1 = n_trap // 2
    n_t2 = n_trap - n_t1
    n_eq_dirty = int(round(n_pairs * 0.05))
    n_eq_hard = int(round(n_pairs * 0.05))
    n_near_miss = int(round(n_pairs * 0.13))
    n_eq_same = int(round(n_pairs * 0.19))
    n_eq_both_null = int(round(n_pairs * 0.19))
    n_null_pages = int(round(n_pairs * 0.12))
    n_null_volume = int(round(n_pairs * 0.12))
    n_ineq = (n_pairs - n_trap - n_eq_dirty - n_eq_hard - n_near_miss
              - n_eq_same - n_eq_both_null - n_null_pages - n_null_volume)

    specs: list[tuple[_Entity, _Entity, str]] = []
    for _ in range(n_eq_dirty):
        e = world.entity()
        copy = world.dirty_copy(e)
        # half of the dirty duplicates lose both numbers, balancing the
        # equivalent mass across the all-equal and all-zero view cells
        if rng.random() < 0.5:
            copy = replace(copy, pages=None, volume=None)
        specs.append((e, copy, EQUIVALENT))
    # hard-but-correct pairs keep the classifier's mid-confidence region
    # populated with correct labels
    for _ in range(n_eq_hard):
        e = world.entity()
        copy = world.dirty_copy(e, heavy=True)
        if rng.random() < 0.5:
            copy = replace(copy, pages=None, volume=None)
        specs.append((e, copy, EQUIVALENT))
    for _ in range(n_near_miss):
        e = world.entity()
        specs.append((e, world.near_miss(e), INEQUIVALENT))
    for _ in range(n_eq_same):
        e = world.entity()
        specs.append((e, world.version_copy(e, False, False), EQUIVALENT))
    for _ in range(n_eq_both_null):
        e = world.entity()
        specs.append((e, replace(e, pages=None, volume=None), EQUIVALENT))
    for _ in range(n_null_pages):
        e = world.entity()
        specs.append((e, replace(e, pages=None), EQUIVALENT))
    for _ in range(n_null_volume):
        e = world.entity()
        specs.append((e, replace(e, volume=None), EQUIVALENT))
    for _ in range(n_ineq):
        e1 = world.entity()
        e2 = world.entity()
        # each number matches by a fair coin, spreading the clean
        # inequivalents over all four view cells
        if rng.random() < 0.5:
            e2 = replace(e2, pages=e1.pages)
        if rng.random() < 0.5:
            e2 = replace(e2, volume=e1.volume)
        specs.append((e1, e2, INEQUIVALENT))
    for _ in range(n_t1):
        e = world.entity()
        specs.append((e, world.version_copy(e, True, False, lo=1, hi=1),
                      INEQUIVALENT))
    for _ in range(n_t2):
        e = world.entity()
        specs.append((e, world.version_copy(e, False, True, lo=1, hi=1),
                      INEQUIVALENT))
    return _assemble(world, specs, rng)


def planted_rule_corpus(n_pairs: int = 2000, support: int = 300,
                        purity: float = 0.98, seed: int = 0):
    """Corpus where pair-internal year equality fails exactly on a planted
    subset: ``support`` pairs of which a ``purity`` share is inequivalent."""
    if support > n_pairs:
        raise ValueError("planted support exceeds corpus size")
    rng = np.random.default_rng(seed)
    world = _World(rng)
    n_planted_ineq = int(round(support * purity))
    n_planted_eq = support - n_planted_ineq
    remaining = n_pairs - support
    n_eq = remaining // 2
    n_ineq = remaining - n_eq

    specs: list[tuple[_Entity, _Entity, str]] = []
    for _ in range(n_eq):
        e = world.entity()
        specs.append((e, world.dirty_copy(e), EQUIVALENT))
    for _ in range(n_ineq):
        e1 = world.entity()
        e2 = world.entity(year=e1.year)  # keep year equality off the clean pairs
        specs.append((e1, e2, INEQUIVALENT))
    for _ in range(n_planted_ineq):
        e1 = world.entity()
        offset = int(rng.integers(1, 6)) * (1 if rng.random() < 0.5 else -1)
        e2 = world.entity(year=e1.year + offset)
        specs.append((e1, e2, INEQUIVALENT))
    for _ in range(n_planted_eq):
        e = world.entity()
        copy = world.dirty_copy(e)
        copy = replace(copy, year=e.year + (1 if rng.random() < 0.5 else -1))
        specs.append((e, copy, EQUIVALENT))
    return _assemble(world, specs, rng)


def build_workload(left, right, rows, probs=None) -> Workload:
    """In-memory workload from generator output (placeholder probabilities
    unless given)."""
    pairs = []
    for i, (lid, rid, truth) in enumerate(rows):
        p = 0.5 if probs is None else float(probs[i])
        pairs.append(make_pair(lid, rid, p, truth))
    return Workload(pairs=tuple(pairs), schema=dict(SCHEMA),
                    records_left=left, records_right=right)


_CONFIG_TEMPLATE = """\
[data]
left_records = records_left.csv
right_records = records_right.csv
pairs = pairs.csv
delimiter = ,
entity_splitter = ,

[schema]
title = text
authors = entity-set
venue = entity-name
year = number
pages = number
volume = number

[split]
ratio = {ratio}
seed = {seed}

[forest]

[train]

[risk]

[evaluate]
{ensemble_line}
[output]
dir = out
"""


def generate_corpus(out_dir: str | Path, corpus: str = "trap",
                    n_pairs: int = 2000, seed: int = 0,
                    ratio: tuple[int, int, int] = (3, 2, 5),
                    trap_fraction: float = 0.10, support: int = 300,
                    purity: float = 0.98, ensemble_members: int = 0,
                    scorer_cfg: ScorerConfig = ScorerConfig()) -> dict[str, Path]:
    """Emit a ready-to-run corpus directory.

    The classifier probabilities come from the reference scorer fitted on
    the classifier-train part of the configured split, then applied to
    every pair.  Deterministic for a given (corpus, n_pairs, seed).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if corpus == "trap":
        left, right, rows = trap_corpus(n_pairs, seed, trap_fraction)
    elif corpus == "planted-rule":
        left, right, rows = planted_rule_corpus(n_pairs, support, purity, seed)
    else:
        raise ValueError(f"unknown corpus kind {corpus!r}")

    placeholder = build_workload(left, right, rows)
    train, _, _ = split_workload(placeholder, ratio, seed)
    descs = default_descriptors(SCHEMA)
    train_matrix = build_metric_matrix(train, descs)
    scorer = fit_reference(train, train_matrix, scorer_cfg)
    full_matrix = build_metric_matrix(placeholder, descs)
    probs = score_reference(scorer, full_matrix)

    workload = build_workload(left, right, rows, probs)
    paths = {
        "left": out / "records_left.csv",
        "right": out / "records_right.csv",
        "pairs": out / "pairs.csv",
        "config": out / "config.ini",
    }
    save_records(left, SCHEMA, paths["left"])
    save_records(right, SCHEMA, paths["right"])
    save_pairs(workload.pairs, paths["pairs"])

    ensemble_line = ""
    if ensemble_members > 0:
        probs_b = bootstrap_ensemble(train, train_matrix, full_matrix,
                                     ensemble_members, scorer_cfg, seed)
        paths["ensemble"] = out / "ensemble.csv"
        with open(paths["ensemble"], "w", encoding="utf-8") as fh:
            header = ["left_id", "right_id"] + [
                f"p{b + 1}" for b in range(ensemble_members)]
            fh.write(",".join(header) + "\n")
            for i, pair in enumerate(workload.pairs):
                cells = [pair.left, pair.right] + [
                    repr(float(v)) for v in probs_b[i]]
                fh.write(",".join(cells) + "\n")
        ensemble_line = "ensemble = ensemble.csv\n"

    config_text = _CONFIG_TEMPLATE.format(
        ratio=":".join(str(r) for r in ratio), seed=seed,
        ensemble_line=ensemble_line)
    paths["config"].write_text(config_text, encoding="utf-8")
    return paths
