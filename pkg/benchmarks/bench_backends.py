"""Compare the compiled split-scan/edit-distance kernels against the
pure-numpy fallback.

Runs the two hot paths (rule mining on a synthetic corpus; a batch of
edit-distance calls) in subprocesses, once per backend, and prints a
small table.  Usage:

    python benchmarks/bench_backends.py [--pairs 10000] [--strings 2000]
"""

import argparse
import json
import os
import subprocess
import sys
import time

_WORKER = """
import json, os, sys, time
import numpy as np
from riskrank import _kernels
from riskrank.forest import ForestConfig, grow_forest
from riskrank.metrics import build_metric_matrix, default_descriptors
from riskrank.synthetic import SCHEMA, build_workload, trap_corpus

n_pairs, n_strings = json.loads(sys.argv[1])

left, right, rows = trap_corpus(n_pairs, seed=7)
w = build_workload(left, right, rows)
matrix = build_metric_matrix(w, default_descriptors(SCHEMA))
truth = w.ground_truth_array()

t0 = time.perf_counter()
rules = grow_forest(matrix, truth, ForestConfig())
forest_s = time.perf_counter() - t0

rng = np.random.default_rng(0)
alphabet = list("abcdefghijklmnop")
strings = ["".join(rng.choice(alphabet, 40)) for _ in range(n_strings)]
t0 = time.perf_counter()
total = 0
for i in range(n_strings - 1):
    total += _kernels.levenshtein(strings[i], strings[i + 1])
leven_s = time.perf_counter() - t0

print(json.dumps({"backend": _kernels.BACKEND, "forest_s": forest_s,
                  "leven_s": leven_s, "rules": len(rules),
                  "checksum": total}))
"""


def run_backend(pure: bool, n_pairs: int, n_strings: int) -> dict:
    env = dict(os.environ)
    env["RISKRANK_PURE"] = "1" if pure else "0"
    out = subprocess.run(
        [sys.executable, "-c", _WORKER, json.dumps([n_pairs, n_strings])],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--pairs", type=int, default=10_000)
    parser.add_argument("--strings", type=int, default=2_000)
    args = parser.parse_args()

    results = []
    for pure in (False, True):
        t0 = time.perf_counter()
        res = run_backend(pure, args.pairs, args.strings)
        res["wall_s"] = time.perf_counter() - t0
        results.append(res)
        print(f"{res['backend']:9s} forest {res['forest_s']:7.2f}s   "
              f"levenshtein {res['leven_s']:7.3f}s   "
              f"({res['rules']} rules, checksum {res['checksum']})")

    compiled, pure = results
    if compiled["backend"] == "compiled":
        print(f"\nspeedup: forest x{pure['forest_s'] / compiled['forest_s']:.2f}, "
              f"levenshtein x{pure['leven_s'] / compiled['leven_s']:.2f}")
        if compiled["checksum"] != pure["checksum"] or \
                compiled["rules"] != pure["rules"]:
            print("WARNING: backends disagree!", file=sys.stderr)
            return 1
    else:
        print("\ncompiled backend unavailable; both runs used the fallback")
    return 0


if __name__ == "__main__":
    sys.exit(main())
