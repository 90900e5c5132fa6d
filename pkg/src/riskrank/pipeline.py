"""Pipeline configuration: one INI file drives every command.

All paths inside the file resolve relative to the file's directory.  The
fully resolved configuration (defaults materialized) is echoed into the
output directory by every command for provenance; the echo is
byte-stable so reruns stay reproducible.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

from .data import Workload, load_workload, split_workload
from .errors import ConfigError
from .forest import ForestConfig
from .metrics import (
    METRIC_SPECS,
    MetricDescriptor,
    MetricMatrix,
    build_metric_matrix,
    default_descriptors,
)
from .training import TrainConfig

_SECTIONS = ("data", "schema", "metrics", "split", "forest", "train", "risk",
             "evaluate", "output")


@dataclass(frozen=True)
class PipelineConfig:
    left_records: Path
    right_records: Path | None
    pairs: Path
    delimiter: str
    entity_splitter: str
    schema: dict[str, str]
    descriptors: tuple[MetricDescriptor, ...]
    ratio: tuple[int, int, int]
    split_seed: int
    forest: ForestConfig
    train: TrainConfig
    theta: float
    bins: int
    init_rsd: float
    alpha: float
    beta: float
    ensemble: Path | None
    trust_clusters: int
    trust_seed: int
    out_dir: Path


def _get(cp, section, key, default=None, cast=str):
    if cp.has_option(section, key):
        raw = cp.get(section, key).strip()
        if raw != "":
            try:
                return cast(raw)
            except ValueError:
                raise ConfigError(
                    f"[{section}] {key}: cannot parse {raw!r}") from None
    if default is None and cast is not str:
        raise ConfigError(f"[{section}] {key} is required")
    return default


def _parse_ratio(raw: str) -> tuple[int, int, int]:
    parts = raw.split(":")
    if len(parts) != 3:
        raise ConfigError(f"split ratio must have three parts, got {raw!r}")
    try:
        nums = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"split ratio must be integers, got {raw!r}") from None
    if any(n < 0 for n in nums) or sum(nums) == 0:
        raise ConfigError(f"split ratio must be nonnegative and sum > 0: {raw!r}")
    return nums  # type: ignore[return-value]


def _parse_descriptors(cp, schema) -> tuple[MetricDescriptor, ...]:
    if not cp.has_section("metrics") or not cp.options("metrics"):
        return tuple(default_descriptors(schema))
    descs = []
    for name in cp.options("metrics"):
        parts = cp.get("metrics", name).split()
        if len(parts) < 2:
            raise ConfigError(
                f"[metrics] {name}: expected '<metric> <attribute> [k=v ...]'")
        metric, attribute = parts[0], parts[1]
        if metric not in METRIC_SPECS:
            raise ConfigError(f"[metrics] {name}: unknown metric {metric!r}")
        params = {}
        for kv in parts[2:]:
            if "=" not in kv:
                raise ConfigError(f"[metrics] {name}: bad parameter {kv!r}")
            k, v = kv.split("=", 1)
            params[k] = v
        desc = MetricDescriptor(name=name, attribute=attribute, metric=metric,
                                params=params)
        desc.check_family(schema)
        descs.append(desc)
    return tuple(descs)


def load_config(path: str | Path, seed_override: int | None = None,
                out_override: str | Path | None = None,
                require_paths: bool = True) -> PipelineConfig:
    """Parse and validate a pipeline configuration file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    cp = configparser.ConfigParser()
    cp.optionxform = str  # keep attribute and descriptor names case-sensitive
    try:
        cp.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in cp.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
    base = path.parent

    if not cp.has_section("schema") or not cp.options("schema"):
        raise ConfigError(f"{path}: [schema] section is required")
    schema = {attr: cp.get("schema", attr).strip() for attr in cp.options("schema")}

    left_raw = _get(cp, "data", "left_records", default="")
    if not left_raw:
        raise ConfigError(f"{path}: [data] left_records is required")
    left = base / left_raw
    right_raw = _get(cp, "data", "right_records", default="")
    right = base / right_raw if right_raw else None
    pairs_raw = _get(cp, "data", "pairs", default="")
    if not pairs_raw:
        raise ConfigError(f"{path}: [data] pairs is required")
    pairs = base / pairs_raw

    if require_paths:
        for p in (left, right, pairs):
            if p is not None and not p.exists():
                raise ConfigError(f"{path}: referenced file {p} does not exist")

    descriptors = _parse_descriptors(cp, schema)

    ratio = _parse_ratio(_get(cp, "split", "ratio", default="3:2:5"))
    split_seed = _get(cp, "split", "seed", default=0, cast=int)
    if seed_override is not None:
        split_seed = seed_override

    forest = ForestConfig(
        lam=_get(cp, "forest", "lambda", default=0.2, cast=float),
        tau=_get(cp, "forest", "tau", default=0.1, cast=float),
        max_depth=_get(cp, "forest", "max_depth", default=4, cast=int),
        min_leaf=_get(cp, "forest", "min_leaf", default=5, cast=int),
        match_class_weight=_get(cp, "forest", "match_class_weight",
                                default=1000.0, cast=float),
        max_trees=_get(cp, "forest", "max_trees", default=5000, cast=int),
    )
    train_seed = _get(cp, "train", "seed", default=0, cast=int)
    if seed_override is not None:
        train_seed = seed_override
    train = TrainConfig(
        learning_rate=_get(cp, "train", "learning_rate", default=0.001, cast=float),
        epochs=_get(cp, "train", "epochs", default=1000, cast=int),
        l1=_get(cp, "train", "l1", default=1e-4, cast=float),
        l2=_get(cp, "train", "l2", default=1e-4, cast=float),
        batch=_get(cp, "train", "batch", default=100_000, cast=int),
        seed=train_seed,
    )
    ensemble_raw = _get(cp, "evaluate", "ensemble", default="")
    out_raw = _get(cp, "output", "dir", default="out")
    out_dir = Path(out_override) if out_override is not None else base / out_raw

    return PipelineConfig(
        left_records=left,
        right_records=right,
        pairs=pairs,
        delimiter=_get(cp, "data", "delimiter", default=","),
        entity_splitter=_get(cp, "data", "entity_splitter", default=","),
        schema=schema,
        descriptors=descriptors,
        ratio=ratio,
        split_seed=split_seed,
        forest=forest,
        train=train,
        theta=_get(cp, "risk", "theta", default=0.9, cast=float),
        bins=_get(cp, "risk", "bins", default=10, cast=int),
        init_rsd=_get(cp, "risk", "init_rsd", default=0.3, cast=float),
        alpha=_get(cp, "risk", "alpha", default=0.2, cast=float),
        beta=_get(cp, "risk", "beta", default=10.0, cast=float),
        ensemble=base / ensemble_raw if ensemble_raw else None,
        trust_clusters=_get(cp, "evaluate", "trust_clusters", default=5, cast=int),
        trust_seed=_get(cp, "evaluate", "trust_seed", default=0, cast=int),
        out_dir=out_dir,
    )


def echo_config(cfg: PipelineConfig, path: str | Path) -> None:
    """Write the fully resolved configuration (for provenance)."""
    lines = ["[data]",
             f"left_records = {cfg.left_records}",
             f"right_records = {cfg.right_records or ''}",
             f"pairs = {cfg.pairs}",
             f"delimiter = {cfg.delimiter}",
             f"entity_splitter = {cfg.entity_splitter}",
             "", "[schema]"]
    lines += [f"{a} = {k}" for a, k in cfg.schema.items()]
    lines += ["", "[metrics]"]
    for d in cfg.descriptors:
        params = "".join(f" {k}={v}" for k, v in d.params.items())
        lines.append(f"{d.name} = {d.metric} {d.attribute}{params}")
    lines += ["", "[split]",
              "ratio = " + ":".join(str(r) for r in cfg.ratio),
              f"seed = {cfg.split_seed}",
              "", "[forest]",
              f"lambda = {cfg.forest.lam!r}",
              f"tau = {cfg.forest.tau!r}",
              f"max_depth = {cfg.forest.max_depth}",
              f"min_leaf = {cfg.forest.min_leaf}",
              f"match_class_weight = {cfg.forest.match_class_weight!r}",
              f"max_trees = {cfg.forest.max_trees}",
              "", "[train]",
              f"learning_rate = {cfg.train.learning_rate!r}",
              f"epochs = {cfg.train.epochs}",
              f"l1 = {cfg.train.l1!r}",
              f"l2 = {cfg.train.l2!r}",
              f"batch = {cfg.train.batch}",
              f"seed = {cfg.train.seed}",
              "", "[risk]",
              f"theta = {cfg.theta!r}",
              f"bins = {cfg.bins}",
              f"init_rsd = {cfg.init_rsd!r}",
              f"alpha = {cfg.alpha!r}",
              f"beta = {cfg.beta!r}",
              "", "[evaluate]",
              f"ensemble = {cfg.ensemble or ''}",
              f"trust_clusters = {cfg.trust_clusters}",
              f"trust_seed = {cfg.trust_seed}",
              "", "[output]",
              f"dir = {cfg.out_dir}"]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_splits(cfg: PipelineConfig) -> tuple[Workload, Workload, Workload]:
    """Load the workload and apply the configured deterministic split."""
    files = [cfg.left_records] if cfg.right_records is None \
        else [cfg.left_records, cfg.right_records]
    w = load_workload(files, cfg.pairs, cfg.schema, cfg.delimiter)
    return split_workload(w, cfg.ratio, cfg.split_seed)


def matrix_for(cfg: PipelineConfig, w: Workload) -> MetricMatrix:
    return build_metric_matrix(w, cfg.descriptors, cfg.entity_splitter)
