#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Times the supervised-model value/gradient kernels (the hot inner loops of
federated rounds) and a full FedGA round loop under both backends.

Usage:
    python benchmarks/bench_backends.py
    python benchmarks/bench_backends.py --batch-sizes 10 20 100 --repeats 2000
    python benchmarks/bench_backends.py --output results.json
"""

import argparse
import json
import time

import numpy as np

from gradalign import kernels
from gradalign.algorithms import fedga_round
from gradalign.datagen import MinibatchSchedule
from gradalign.params import SeededStream
from gradalign.verify import fixture_logistic_problem


def time_fn(fn, repeats):
    fn()  # warm (JIT compile / cache load on the numba path)
    start = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - start) / repeats


def bench_kernels(batch_sizes, input_dim, n_classes, hidden, repeats):
    rng = np.random.default_rng(0)
    rows = []
    for b in batch_sizes:
        X = rng.standard_normal((b, input_dim))
        y = rng.integers(0, n_classes, b).astype(np.int64)
        W = rng.standard_normal((input_dim, n_classes))
        bias = rng.standard_normal(n_classes)
        W1 = rng.standard_normal((input_dim, hidden))
        b1 = rng.standard_normal(hidden)
        W2 = rng.standard_normal((hidden, n_classes))
        b2 = rng.standard_normal(n_classes)

        entry = {"batch": b}
        entry["logistic_numpy_us"] = 1e6 * time_fn(
            lambda: kernels.logistic_value_grad_numpy(X, y, W, bias), repeats)
        entry["mlp_numpy_us"] = 1e6 * time_fn(
            lambda: kernels.mlp_value_grad_numpy(X, y, W1, b1, W2, b2), repeats)
        if kernels.HAVE_NUMBA:
            entry["logistic_numba_us"] = 1e6 * time_fn(
                lambda: kernels.logistic_value_grad_numba(X, y, W, bias), repeats)
            entry["mlp_numba_us"] = 1e6 * time_fn(
                lambda: kernels.mlp_value_grad_numba(X, y, W1, b1, W2, b2), repeats)
        rows.append(entry)
    return rows


def bench_round(repeats):
    problem = fixture_logistic_problem(seed=3, n_clients=10, n_classes=10,
                                       per_class=20, input_dim=20, sep=4.0)
    x = np.zeros(problem.dim)

    def one_round():
        scheds = [MinibatchSchedule(c.data_size, 20, SeededStream(1).derive("c", i))
                  for i, c in enumerate(problem.clients)]
        fedga_round(problem, x, 0.1, 0.1, 10, scheds)

    return 1e3 * time_fn(one_round, repeats)


def main():
    parser = argparse.ArgumentParser(description="numba vs numpy kernel benchmark")
    parser.add_argument("--batch-sizes", type=int, nargs="+", default=[10, 20, 100, 500])
    parser.add_argument("--repeats", type=int, default=1000)
    parser.add_argument("--round-repeats", type=int, default=50)
    parser.add_argument("--output", default=None, help="write results as JSON")
    args = parser.parse_args()

    print(f"active backend: {kernels.BACKEND} (numba importable: {kernels.HAVE_NUMBA})")
    if kernels.HAVE_NUMBA:
        kernels.logistic_value_grad_numba(np.zeros((2, 3)), np.zeros(2, dtype=np.int64),
                                          np.zeros((3, 2)), np.zeros(2))
        print("JIT warm.\n")

    rows = bench_kernels(args.batch_sizes, input_dim=20, n_classes=10, hidden=16,
                         repeats=args.repeats)
    hdr = f"{'batch':>6} {'logistic np (us)':>17} {'logistic nb (us)':>17} " \
          f"{'speedup':>8} {'mlp np (us)':>12} {'mlp nb (us)':>12} {'speedup':>8}"
    print(hdr)
    print("-" * len(hdr))
    for r in rows:
        ln = r["logistic_numpy_us"]
        lm = r.get("logistic_numba_us", float("nan"))
        mn = r["mlp_numpy_us"]
        mm = r.get("mlp_numba_us", float("nan"))
        print(f"{r['batch']:>6} {ln:>17.1f} {lm:>17.1f} {ln / lm:>8.1f} "
              f"{mn:>12.1f} {mm:>12.1f} {mn / mm:>8.1f}")

    ms = bench_round(args.round_repeats)
    print(f"\nfedga round (10 clients, K=10, B=20), active backend: {ms:.2f} ms")

    if args.output:
        payload = {"backend": kernels.BACKEND, "kernels": rows, "fedga_round_ms": ms}
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
        print(f"wrote {args.output}")


if __name__ == "__main__":
    main()
