"""Pure-Python kernels for finite-field polynomial arithmetic.

These are the fallback implementations of the hot decoder primitives; the
Cython module ``ratematch._kernels.compiled`` provides the same interface.
Polynomials are lists of ints, ascending coefficient order, normalized so
the zero polynomial is ``[]`` and the last coefficient is nonzero.

Every function takes the owning field object first and only uses its
scalar methods (``add``/``sub``/``mul``/``inv``), so the kernels stay
correct for any field the package supports.
"""

from __future__ import annotations

BACKEND_NAME = "reference"


def _normalize(p):
    n = len(p)
    while n and p[n - 1] == 0:
        n -= 1
    return p[:n]


def poly_from_roots(field, xs):
    """Monic polynomial prod_i (x - xs[i])."""
    sub, mul = field.sub, field.mul
    poly = [1]
    for r in xs:
        nxt = [0] * (len(poly) + 1)
        for j, c in enumerate(poly):
            nxt[j + 1] = field.add(nxt[j + 1], c)
            nxt[j] = sub(nxt[j], mul(r, c))
        poly = nxt
    return poly


def poly_eval_many(field, coeffs, xs):
    """Evaluate one polynomial at each point (Horner)."""
    add, mul = field.add, field.mul
    out = []
    for x in xs:
        acc = 0
        for c in reversed(coeffs):
            acc = add(mul(acc, x), c)
        out.append(acc)
    return out


def _synthetic_div(field, poly, r):
    """poly / (x - r) for poly with poly(r) == 0; returns the quotient."""
    sub, mul = field.sub, field.mul
    n = len(poly) - 1
    q = [0] * n
    acc = poly[n]
    for k in range(n - 1, -1, -1):
        q[k] = acc
        acc = field.add(poly[k], mul(r, acc))
    return q


def interpolate(field, xs, ys):
    """Coefficients (deg < len(xs)) of the interpolant through (xs, ys)."""
    n = len(xs)
    master = poly_from_roots(field, xs)
    acc = [0] * n
    add, mul, inv = field.add, field.mul, field.inv
    for i in range(n):
        if ys[i] == 0:
            continue
        qi = _synthetic_div(field, master, xs[i])
        denom = 0
        for c in reversed(qi):
            denom = add(mul(denom, xs[i]), c)
        scale = mul(ys[i], inv(denom))
        for j in range(n):
            acc[j] = add(acc[j], mul(scale, qi[j]))
    return _normalize(acc)


def poly_divmod(field, a, b):
    """Quotient and remainder of polynomial long division."""
    b = _normalize(list(b))
    if not b:
        raise ZeroDivisionError("polynomial division by zero")
    a = _normalize(list(a))
    db, da = len(b) - 1, len(a) - 1
    if da < db:
        return [], _normalize(a)
    sub, mul = field.sub, field.mul
    lead_inv = field.inv(b[db])
    q = [0] * (da - db + 1)
    for k in range(da - db, -1, -1):
        coef = mul(a[k + db], lead_inv)
        if coef == 0:
            continue
        q[k] = coef
        for j in range(db + 1):
            a[k + j] = sub(a[k + j], mul(coef, b[j]))
    return _normalize(q), _normalize(a[:db])


def _poly_mul(field, a, b):
    if not a or not b:
        return []
    add, mul = field.add, field.mul
    out = [0] * (len(a) + len(b) - 1)
    for i, ca in enumerate(a):
        if ca == 0:
            continue
        for j, cb in enumerate(b):
            out[i + j] = add(out[i + j], mul(ca, cb))
    return _normalize(out)


def gao_reduce(field, g0, g1, dstop):
    """Partial extended Euclid on (g0, g1).

    Returns (v, r) with r = u*g0 + v*g1 and deg r < dstop, where deg of the
    zero polynomial is -1.
    """
    sub = field.sub
    r0, r1 = _normalize(list(g0)), _normalize(list(g1))
    v0, v1 = [], [1]
    while len(r1) - 1 >= dstop:
        q, rem = poly_divmod(field, r0, r1)
        r0, r1 = r1, rem
        qv = _poly_mul(field, q, v1)
        nv = [0] * max(len(v0), len(qv))
        for i, c in enumerate(v0):
            nv[i] = c
        for i, c in enumerate(qv):
            nv[i] = sub(nv[i], c)
        v0, v1 = v1, _normalize(nv)
    return v1, r1


def matmul_bin(field, a, b):
    """2-d matrix product over a binary extension field (numpy arrays)."""
    import numpy as np

    exp, log = field.exp_table_np, field.log_table_np
    m, k = a.shape
    k2, n = b.shape
    if k != k2:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    out = np.zeros((m, n), dtype=np.int64)
    for t in range(k):
        col = a[:, t]
        row = b[t]
        prod = exp[log[col][:, None] + log[row][None, :]]
        prod[col == 0, :] = 0
        prod[:, row == 0] = 0
        out ^= prod
    return out
