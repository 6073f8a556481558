#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python reference.

Times the decoder primitives, a full errors-and-erasures decode, and the
batched block encode on both backends and prints the speedups.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from ratematch import product_matrix as pm
from ratematch.galois import make_field
from ratematch.rs import EvalCode, rs_decode, rs_encode


def _time(fn, repeats):
    best = float("inf")
    for _ in range(3):
        start = time.perf_counter()
        for _ in range(repeats):
            fn()
        best = min(best, (time.perf_counter() - start) / repeats)
    return best


def bench_field(order, n, repeats):
    rows = []
    fields = {}
    for backend in ("reference", "compiled"):
        try:
            fields[backend] = make_field(order, backend=backend)
        except ValueError:
            return rows
    rng = np.random.default_rng(0)
    xs = [int(v) for v in rng.permutation(order - 1)[:n] + 1]
    ys = [int(v) for v in rng.integers(0, order, size=n)]
    k = max(2, n // 3)

    cases = {
        f"poly_from_roots N={n}": lambda f: f.poly_from_roots(xs),
        f"interpolate     N={n}": lambda f: f.interpolate(xs, ys),
        f"poly_eval       N={n}": lambda f: f.poly_eval(ys[:k], xs),
    }
    for label, fn in cases.items():
        times = {b: _time(lambda f=fields[b]: fn(f), repeats) for b in fields}
        rows.append((f"GF({order}) {label}", times["reference"], times["compiled"]))

    codes = {b: EvalCode(fields[b], tuple(fields[b].powers(fields[b].g, n)), k)
             for b in fields}
    msg = [int(v) for v in rng.integers(0, order, size=k)]
    word = np.array(rs_encode(codes["reference"], msg))
    t = (n - k) // 2
    for p in rng.permutation(n)[:t]:
        word[p] = (int(word[p]) + 1) % order

    times = {b: _time(lambda c=codes[b]: rs_decode(c, word), repeats) for b in codes}
    rows.append((f"GF({order}) rs_decode t={t} N={n}", times["reference"], times["compiled"]))
    return rows


def bench_encode(order, repeats):
    rows = []
    rng = np.random.default_rng(1)
    encs = {}
    for backend in ("reference", "compiled"):
        fld = make_field(order, backend=backend)
        encs[backend] = pm.build_encoder(pm.msr_params(10, 6, fld))
    params = encs["reference"].params
    data = rng.integers(0, order, size=(2000, params.B))
    tensors = {
        b: pm.build_message_tensor(encs[b].params, pm.FULL, None, data) for b in encs
    }
    times = {
        b: _time(lambda e=encs[b], t=tensors[b]: pm.encode_message_tensor(e, t), max(1, repeats // 50))
        for b in encs
    }
    rows.append((f"GF({order}) encode 2000 blocks", times["reference"], times["compiled"]))
    return rows


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    rows = []
    for order in (23, 1 << 16):
        for n in (10, 30):
            if n < order:
                rows.extend(bench_field(order, n, args.repeats))
        rows.extend(bench_encode(order, args.repeats))

    width = max(len(r[0]) for r in rows)
    print(f"{'case':<{width}}  {'reference':>12}  {'compiled':>12}  {'speedup':>8}")
    for label, ref, com in rows:
        print(f"{label:<{width}}  {ref * 1e6:>10.1f}us  {com * 1e6:>10.1f}us  "
              f"{ref / com:>7.1f}x")


if __name__ == "__main__":
    main()
