"""Command-line pipeline: synth, gen-features, train-risk, score,
evaluate, active-select.

Every command is deterministic under a fixed config and seed: rerunning
produces byte-identical artifacts.  Exit codes: 0 success, 2 config
error, 3 data error, 4 degenerate training data.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from . import evaluation, forest, riskmodel, synthetic, training
from .errors import ConfigError, DataError, DegenerateTrainingError
from .pipeline import PipelineConfig, echo_config, load_config, load_splits, matrix_for


def _prepare_out(cfg: PipelineConfig) -> Path:
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    echo_config(cfg, cfg.out_dir / "effective.ini")
    return cfg.out_dir


def cmd_synth(args) -> int:
    paths = synthetic.generate_corpus(
        args.out, corpus=args.corpus, n_pairs=args.pairs, seed=args.seed,
        trap_fraction=args.trap_fraction, support=args.support,
        purity=args.purity, ensemble_members=args.ensemble)
    print(f"wrote corpus ({args.corpus}, {args.pairs} pairs) to {Path(args.out)}")
    print(f"config: {paths['config']}")
    return 0


def cmd_gen_features(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    out = _prepare_out(cfg)
    train_w, _, _ = load_splits(cfg)
    if len(train_w.pairs) == 0:
        raise DataError("classifier-train split is empty")
    matrix = matrix_for(cfg, train_w)
    rules = forest.generate_risk_features(train_w, matrix, cfg.forest)
    rules_path = out / "rules.txt"
    forest.save_rules(rules, cfg.descriptors, rules_path)
    with open(out / "expectations.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rule_id", "consequent", "support", "purity", "mu"])
        for i, r in enumerate(rules, start=1):
            writer.writerow([f"r{i:04d}", r.consequent, r.support,
                             repr(r.purity), repr(r.expectation_mu)])
    print(f"mined {len(rules)} rules from {len(train_w.pairs)} training pairs")
    print(f"rules: {rules_path}")
    return 0


def _load_rules(cfg: PipelineConfig, rules_path: Path):
    if not rules_path.exists():
        raise DataError(f"rule file {rules_path} does not exist "
                        "(run gen-features first)")
    return forest.load_rules(rules_path, cfg.descriptors)


def cmd_train_risk(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    out = _prepare_out(cfg)
    rules_path = Path(args.rules) if args.rules else out / "rules.txt"
    rules = _load_rules(cfg, rules_path)
    _, risk_w, _ = load_splits(cfg)
    if len(risk_w.pairs) == 0:
        raise DegenerateTrainingError("risk-train split is empty")
    matrix = matrix_for(cfg, risk_w)
    model = riskmodel.initial_model(
        rules, theta=cfg.theta, n_bins=cfg.bins, init_rsd=cfg.init_rsd,
        alpha=cfg.alpha, beta=cfg.beta,
        rules_digest=riskmodel.digest_file(rules_path))
    trained, trace = training.train(model, risk_w, matrix, cfg.train)
    model_path = out / "model.txt"
    riskmodel.save_model(trained, model_path)
    with open(out / "loss_trace.txt", "w", encoding="utf-8") as fh:
        for v in trace:
            fh.write(repr(v) + "\n")
    first = trace[0] if trace else float("nan")
    last = trace[-1] if trace else float("nan")
    print(f"trained on {len(risk_w.pairs)} risk-labeled pairs "
          f"({cfg.train.epochs} epochs, loss {first:.6g} -> {last:.6g})")
    print(f"model: {model_path}")
    return 0


def cmd_score(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    out = _prepare_out(cfg)
    rules_path = Path(args.rules) if args.rules else out / "rules.txt"
    rules = _load_rules(cfg, rules_path)
    model_path = Path(args.model) if args.model else out / "model.txt"
    if not model_path.exists():
        raise DataError(f"model file {model_path} does not exist "
                        "(run train-risk first)")
    model = riskmodel.load_model(model_path, rules)
    digest = riskmodel.digest_file(rules_path)
    if model.rules_digest is not None and model.rules_digest != digest:
        raise DataError(
            f"rule file {rules_path} does not match the one the model was "
            "trained with")
    _, _, test_w = load_splits(cfg)
    matrix = matrix_for(cfg, test_w)
    scores = riskmodel.score_workload(test_w, matrix, model)
    ranking_path = out / "ranking.csv"
    with open(ranking_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["left_id", "right_id", "var", "mu", "sigma", "fired"])
        for s in scores:
            writer.writerow([s.left, s.right, repr(s.var), repr(s.mu),
                             repr(s.sigma), ";".join(s.fired)])
    print(f"scored {len(scores)} test pairs at theta={model.theta}")
    print(f"ranking: {ranking_path}")
    return 0


def _read_ranking(path: Path) -> dict[tuple[str, str], float]:
    scores: dict[tuple[str, str], float] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for col in ("left_id", "right_id", "var"):
            if reader.fieldnames is None or col not in reader.fieldnames:
                raise DataError(f"{path}: ranking file lacks column {col!r}")
        for row in reader:
            scores[(row["left_id"], row["right_id"])] = float(row["var"])
    return scores


def cmd_evaluate(args) -> int:
    cfg = load_config(args.config, args.seed, args.out)
    out = _prepare_out(cfg)
    train_w, _, test_w = load_splits(cfg)
    if len(test_w.pairs) == 0:
        raise DataError("test split is empty")
    labels = test_w.risk_label_array()

    methods: list[tuple[str, np.ndarray]] = []
    ranking_paths = [Path(p) for p in (args.ranking or [])]
    default_ranking = out / "ranking.csv"
    if not ranking_paths and default_ranking.exists():
        ranking_paths = [default_ranking]
    for rp in ranking_paths:
        by_pair = _read_ranking(rp)
        vals = np.empty(len(test_w.pairs), dtype=np.float64)
        for i, p in enumerate(test_w.pairs):
            key = (p.left, p.right)
            if key not in by_pair:
                raise DataError(f"{rp}: test pair {key} missing from ranking")
            vals[i] = by_pair[key]
        methods.append((rp.stem if rp.stem != "ranking" else "riskrank", vals))

    probs = test_w.probabilities()
    methods.append(("ambiguity", evaluation.ambiguity_score(probs)))

    if cfg.ensemble is not None:
        ens = _read_ensemble(cfg.ensemble, test_w)
        methods.append(("uncertainty", evaluation.uncertainty_score(ens)))

    train_matrix = matrix_for(cfg, train_w)
    clusters = evaluation.fit_cluster_model(
        train_matrix.dense(0.0), train_w.ground_truth_array(),
        k=cfg.trust_clusters, seed=cfg.trust_seed)
    test_matrix = matrix_for(cfg, test_w)
    methods.append(("trustscore", evaluation.trust_risk_scores(
        test_matrix.dense(0.0), test_w.machine_label_array(), clusters)))

    with open(out / "auroc_summary.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "auroc"])
        for name, scores in methods:
            curve = evaluation.roc_auroc(scores, labels)
            evaluation.save_roc(curve, out / f"roc_{name}.csv")
            writer.writerow([name, repr(curve.auroc)])
            print(f"{name:12s} AUROC {curve.auroc:.4f}")
    print(f"report: {out / 'auroc_summary.csv'}")
    return 0


def _read_ensemble(path: Path, w) -> np.ndarray:
    by_pair: dict[tuple[str, str], list[float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        member_cols = [c for c in names if c.startswith("p")]
        if "left_id" not in names or "right_id" not in names or not member_cols:
            raise DataError(f"{path}: expected left_id,right_id,p1..pB columns")
        for row in reader:
            by_pair[(row["left_id"], row["right_id"])] = [
                float(row[c]) for c in member_cols]
    out = np.empty((len(w.pairs), len(member_cols)), dtype=np.float64)
    for i, p in enumerate(w.pairs):
        key = (p.left, p.right)
        if key not in by_pair:
            raise DataError(f"{path}: test pair {key} missing from ensemble file")
        out[i] = by_pair[key]
    return out


def cmd_active_select(args) -> int:
    ranking_path = Path(args.ranking)
    if not ranking_path.exists():
        raise DataError(f"ranking file {ranking_path} does not exist")
    by_pair = _read_ranking(ranking_path)
    exclude: set[tuple[str, str]] = set()
    if args.exclude:
        with open(args.exclude, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                exclude.add((row["left_id"], row["right_id"]))
    chosen = evaluation.select_active_batch(by_pair.items(), args.k, exclude)
    out_path = Path(args.out) if args.out else ranking_path.parent / "selected.csv"
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["left_id", "right_id"])
        for left, right in chosen:
            writer.writerow([left, right])
    print(f"selected {len(chosen)} pairs -> {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="riskrank",
        description="Rank machine-labeled entity-resolution pairs by "
                    "mislabel risk.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="emit a bundled synthetic corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--corpus", choices=("trap", "planted-rule"), default="trap")
    p.add_argument("--pairs", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trap-fraction", type=float, default=0.10)
    p.add_argument("--support", type=int, default=300)
    p.add_argument("--purity", type=float, default=0.98)
    p.add_argument("--ensemble", type=int, default=0,
                   help="bootstrap ensemble members for the uncertainty baseline")
    p.set_defaults(func=cmd_synth)

    for name, func, extra in (
        ("gen-features", cmd_gen_features, ()),
        ("train-risk", cmd_train_risk, ("rules",)),
        ("score", cmd_score, ("rules", "model")),
        ("evaluate", cmd_evaluate, ("ranking",)),
    ):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--seed", type=int, default=None,
                       help="override the configured seeds")
        p.add_argument("--out", default=None,
                       help="override the configured output directory")
        if "rules" in extra:
            p.add_argument("--rules", default=None)
        if "model" in extra:
            p.add_argument("--model", default=None)
        if "ranking" in extra:
            p.add_argument("--ranking", action="append", default=None)
        p.set_defaults(func=func)

    p = sub.add_parser("active-select", help="top-k riskiest pairs for labeling")
    p.add_argument("--ranking", required=True)
    p.add_argument("-k", type=int, required=True)
    p.add_argument("--exclude", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_active_select)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except DegenerateTrainingError as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
