#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Times the two selection hot paths on a realistic synthetic pool: the
per-epoch leave-one-out sweep used by greedy backward elimination, and the
batched subset evaluation used by Monte Carlo search.  Run with

    python3 benchmarks/bench_kernels.py [--pool 2000] [--repeats 5]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from coitk._kernels import METRIC_JS, METRIC_KL, _slow

try:
    from coitk._kernels import _fast
except ImportError:
    _fast = None

from coitk.synthgen import default_spec, expected_joint, generate_corpus
from coitk.transitions import corpus_pair_counts


def _time(fn, repeats: int) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pool", type=int, default=2000, help="pool size in dialogues")
    parser.add_argument("--mc-iters", type=int, default=2000)
    parser.add_argument("--subset-k", type=int, default=200)
    parser.add_argument("--repeats", type=int, default=5)
    args = parser.parse_args()

    spec = default_spec(seed=4242)
    print(f"generating pool of {args.pool} dialogues ...")
    pool_counts = corpus_pair_counts(generate_corpus(spec, args.pool))
    base = pool_counts.sum(axis=0)
    ref = expected_joint(spec)

    rng = np.random.default_rng(7)
    subsets = np.stack(
        [rng.permutation(args.pool)[: args.subset_k] for _ in range(args.mc_iters)]
    ).astype(np.int64)

    cases = {
        f"leave_one_out_gaps  (m={args.pool}, KL)": lambda impl: impl.leave_one_out_gaps(
            pool_counts, base, ref, 0.5, METRIC_KL
        ),
        f"leave_one_out_gaps  (m={args.pool}, JS)": lambda impl: impl.leave_one_out_gaps(
            pool_counts, base, ref, 0.5, METRIC_JS
        ),
        f"subset_gaps  (T={args.mc_iters}, k={args.subset_k}, JS)": lambda impl: impl.subset_gaps(
            pool_counts, subsets, ref, 0.5, METRIC_JS
        ),
    }

    backends = [("py (numpy)", _slow)] + ([("ext (cython)", _fast)] if _fast else [])
    if _fast is None:
        print("compiled extension not available; timing the fallback only\n")

    header = f"{'kernel':<44} " + " ".join(f"{name:>14}" for name, _ in backends)
    if _fast is not None:
        header += f" {'speedup':>9}"
    print(header)
    print("-" * len(header))
    for label, call in cases.items():
        times = []
        for _, impl in backends:
            times.append(_time(lambda impl=impl: call(impl), args.repeats))
        row = f"{label:<44} " + " ".join(f"{t * 1e3:>11.2f} ms" for t in times)
        if len(times) == 2:
            row += f" {times[0] / times[1]:>8.1f}x"
        print(row)

    if _fast is not None:
        for label, call in cases.items():
            np.testing.assert_allclose(call(_slow), call(_fast), rtol=1e-12)
        print("\nbackends agree to 1e-12 on all benchmarked cases")


if __name__ == "__main__":
    main()
