"""Independent test oracles.

These deliberately avoid the package's arithmetic paths: prime-field math
is raw Python ints mod q, binary-field multiplication is the bitwise
peasant algorithm, and decoding ground truth comes from exhaustive
nearest-codeword search.
"""

from __future__ import annotations

import itertools

import numpy as np


def poly_eval_mod(coeffs, x, q):
    acc = 0
    for c in reversed(coeffs):
        acc = (acc * x + c) % q
    return acc


def all_codewords(q, points, k):
    """Every codeword of the (N, k) evaluation code over F_q."""
    out = {}
    for msg in itertools.product(range(q), repeat=k):
        out[msg] = tuple(poly_eval_mod(msg, x, q) for x in points)
    return out


def nearest_codewords(q, points, k, word, erasures=frozenset()):
    """Brute-force nearest codewords, distance over non-erased positions.

    Returns (best distance, [(message, codeword), ...]).
    """
    keep = [i for i in range(len(points)) if i not in erasures]
    best = len(keep) + 1
    hits = []
    for msg, cw in all_codewords(q, points, k).items():
        dist = sum(1 for i in keep if cw[i] != word[i] % q)
        if dist < best:
            best, hits = dist, [(msg, cw)]
        elif dist == best:
            hits.append((msg, cw))
    return best, hits


def carryless_mul(a, b, poly, width):
    """GF(2^width) product by shift-and-xor reduction (table-free)."""
    acc = 0
    while b:
        if b & 1:
            acc ^= a
        b >>= 1
        a <<= 1
        if a >> width:
            a ^= poly
    return acc


def dense_matmul_mod(a, b, q):
    """Plain-int matrix product mod a prime (no numpy arithmetic paths)."""
    rows = len(a)
    inner = len(b)
    cols = len(b[0])
    return [
        [sum(int(a[i][t]) * int(b[t][j]) for t in range(inner)) % q for j in range(cols)]
        for i in range(rows)
    ]


def corrupt(rng, fld, values, positions):
    """Add a nonzero field error at each listed position (1-d array)."""
    out = np.array(values, dtype=np.int64)
    for p in positions:
        out[p] = fld.add(int(out[p]), int(rng.integers(1, fld.order)))
    return out


def corrupt_rows(rng, fld, matrix, rows):
    """Corrupt whole rows with nonzero error vectors."""
    out = np.array(matrix, dtype=np.int64)
    width = out.shape[1]
    for r in rows:
        err = rng.integers(1, fld.order, size=width)
        # ensure the row error is nonzero even if some symbols stay put
        out[r] = fld.arr_add(out[r], err)
    return out
