# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernels for finite-field polynomial arithmetic.

Drop-in replacement for ratematch._kernels.reference; see that module for
the interface contract. Prime fields use modular arithmetic, binary
extension fields use the field's exp/log tables.
"""

from libc.stdlib cimport free, malloc

import numpy as np

BACKEND_NAME = "compiled"

ctypedef long long ll


cdef struct FD:
    bint binary
    ll q
    ll qm1
    ll* exp
    ll* log


cdef inline ll fadd(FD* f, ll a, ll b) nogil:
    cdef ll s
    if f.binary:
        return a ^ b
    s = a + b
    if s >= f.q:
        s -= f.q
    return s


cdef inline ll fsub(FD* f, ll a, ll b) nogil:
    cdef ll s
    if f.binary:
        return a ^ b
    s = a - b
    if s < 0:
        s += f.q
    return s


cdef inline ll fmul(FD* f, ll a, ll b) nogil:
    if a == 0 or b == 0:
        return 0
    if f.binary:
        return f.exp[f.log[a] + f.log[b]]
    return (a * b) % f.q


cdef inline ll finv(FD* f, ll a) nogil:
    cdef ll result, base, e
    if f.binary:
        return f.exp[f.qm1 - f.log[a]]
    result = 1
    base = a % f.q
    e = f.q - 2
    while e > 0:
        if e & 1:
            result = (result * base) % f.q
        base = (base * base) % f.q
        e >>= 1
    return result


cdef class _Ctx:
    """Holds the field descriptor plus references keeping tables alive."""

    cdef FD fd
    cdef object _exp_ref
    cdef object _log_ref

    def __cinit__(self, field):
        cdef const ll[::1] expv, logv
        self.fd.q = field.order
        self.fd.qm1 = self.fd.q - 1
        self.fd.binary = field.kind == "binary"
        if self.fd.binary:
            self._exp_ref = field.exp_table_np
            self._log_ref = field.log_table_np
            expv = self._exp_ref
            logv = self._log_ref
            # tables are read-only by contract; the struct only reads them
            self.fd.exp = <ll*> &expv[0]
            self.fd.log = <ll*> &logv[0]
        else:
            self.fd.exp = NULL
            self.fd.log = NULL


cdef ll* _to_c(xs, Py_ssize_t* n_out) except NULL:
    cdef Py_ssize_t n = len(xs)
    cdef ll* buf = <ll*> malloc((n if n > 0 else 1) * sizeof(ll))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i
    for i in range(n):
        buf[i] = xs[i]
    n_out[0] = n
    return buf


cdef list _to_list(ll* buf, Py_ssize_t n):
    cdef list out = [0] * n
    cdef Py_ssize_t i
    for i in range(n):
        out[i] = buf[i]
    return out


cdef inline Py_ssize_t _trim(ll* buf, Py_ssize_t n) nogil:
    while n > 0 and buf[n - 1] == 0:
        n -= 1
    return n


def poly_from_roots(field, xs):
    cdef _Ctx ctx = _Ctx(field)
    cdef FD* f = &ctx.fd
    cdef Py_ssize_t n
    cdef ll* roots = _to_c(xs, &n)
    cdef ll* poly = <ll*> malloc((n + 1) * sizeof(ll))
    if poly == NULL:
        free(roots)
        raise MemoryError()
    cdef Py_ssize_t cur = 1, j, i
    cdef ll r
    poly[0] = 1
    with nogil:
        for i in range(n):
            r = roots[i]
            poly[cur] = poly[cur - 1]
            for j in range(cur - 1, 0, -1):
                poly[j] = fsub(f, poly[j - 1], fmul(f, r, poly[j]))
            poly[0] = fsub(f, 0, fmul(f, r, poly[0]))
            cur += 1
    out = _to_list(poly, cur)
    free(roots)
    free(poly)
    return out


def poly_eval_many(field, coeffs, xs):
    cdef _Ctx ctx = _Ctx(field)
    cdef FD* f = &ctx.fd
    cdef Py_ssize_t nc, nx
    cdef ll* cs = _to_c(coeffs, &nc)
    cdef ll* pts = _to_c(xs, &nx)
    cdef ll* ys = <ll*> malloc((nx if nx > 0 else 1) * sizeof(ll))
    if ys == NULL:
        free(cs)
        free(pts)
        raise MemoryError()
    cdef Py_ssize_t i, k
    cdef ll acc, x
    with nogil:
        for i in range(nx):
            x = pts[i]
            acc = 0
            for k in range(nc - 1, -1, -1):
                acc = fadd(f, fmul(f, acc, x), cs[k])
            ys[i] = acc
    out = _to_list(ys, nx)
    free(cs)
    free(pts)
    free(ys)
    return out


def interpolate(field, xs, ys):
    cdef _Ctx ctx = _Ctx(field)
    cdef FD* f = &ctx.fd
    cdef Py_ssize_t n, ny
    cdef ll* pts = _to_c(xs, &n)
    cdef ll* vals = _to_c(ys, &ny)
    if ny != n:
        free(pts)
        free(vals)
        raise ValueError("xs and ys must have the same length")
    cdef ll* master = <ll*> malloc((n + 1) * sizeof(ll))
    cdef ll* acc = <ll*> malloc((n if n > 0 else 1) * sizeof(ll))
    cdef ll* qi = <ll*> malloc((n if n > 0 else 1) * sizeof(ll))
    if master == NULL or acc == NULL or qi == NULL:
        free(pts)
        free(vals)
        free(master)
        free(acc)
        free(qi)
        raise MemoryError()
    cdef Py_ssize_t cur = 1, i, j, k
    cdef ll r, xi, yi, hv, denom, scale
    with nogil:
        master[0] = 1
        for i in range(n):
            r = pts[i]
            master[cur] = master[cur - 1]
            for j in range(cur - 1, 0, -1):
                master[j] = fsub(f, master[j - 1], fmul(f, r, master[j]))
            master[0] = fsub(f, 0, fmul(f, r, master[0]))
            cur += 1
        for j in range(n):
            acc[j] = 0
        for i in range(n):
            yi = vals[i]
            if yi == 0:
                continue
            xi = pts[i]
            # synthetic division master / (x - xi)
            hv = master[n]
            for k in range(n - 1, -1, -1):
                qi[k] = hv
                hv = fadd(f, master[k], fmul(f, xi, hv))
            denom = 0
            for k in range(n - 1, -1, -1):
                denom = fadd(f, fmul(f, denom, xi), qi[k])
            scale = fmul(f, yi, finv(f, denom))
            for j in range(n):
                acc[j] = fadd(f, acc[j], fmul(f, scale, qi[j]))
    cdef Py_ssize_t nout = _trim(acc, n)
    out = _to_list(acc, nout)
    free(pts)
    free(vals)
    free(master)
    free(acc)
    free(qi)
    return out


cdef void _divmod_c(FD* f, ll* a, Py_ssize_t* la, ll* b, Py_ssize_t lb,
                    ll* q, Py_ssize_t* lq) nogil:
    """a //= b in place: quotient into q, remainder left in a."""
    cdef Py_ssize_t da = la[0] - 1, db = lb - 1
    cdef Py_ssize_t k, j
    cdef ll lead_inv, coef
    if da < db:
        lq[0] = 0
        la[0] = _trim(a, la[0])
        return
    lead_inv = finv(f, b[db])
    for k in range(da - db + 1):
        q[k] = 0
    for k in range(da - db, -1, -1):
        coef = fmul(f, a[k + db], lead_inv)
        if coef == 0:
            continue
        q[k] = coef
        for j in range(db + 1):
            a[k + j] = fsub(f, a[k + j], fmul(f, coef, b[j]))
    lq[0] = _trim(q, da - db + 1)
    la[0] = _trim(a, db)


def poly_divmod(field, a, b):
    cdef _Ctx ctx = _Ctx(field)
    cdef FD* f = &ctx.fd
    cdef Py_ssize_t la, lb
    cdef ll* ac = _to_c(a, &la)
    cdef ll* bc = _to_c(b, &lb)
    lb = _trim(bc, lb)
    if lb == 0:
        free(ac)
        free(bc)
        raise ZeroDivisionError("polynomial division by zero")
    la = _trim(ac, la)
    cdef ll* q = <ll*> malloc((la + 1) * sizeof(ll))
    if q == NULL:
        free(ac)
        free(bc)
        raise MemoryError()
    cdef Py_ssize_t lq = 0
    with nogil:
        _divmod_c(f, ac, &la, bc, lb, q, &lq)
    qout = _to_list(q, lq)
    rout = _to_list(ac, la)
    free(ac)
    free(bc)
    free(q)
    return qout, rout


def gao_reduce(field, g0, g1, dstop):
    cdef _Ctx ctx = _Ctx(field)
    cdef FD* f = &ctx.fd
    cdef Py_ssize_t l0, l1
    cdef ll* big0 = _to_c(g0, &l0)
    cdef ll* big1 = _to_c(g1, &l1)
    cdef Py_ssize_t cap = (l0 if l0 > l1 else l1) + 2
    cdef Py_ssize_t dstop_c = dstop
    # working polys: r0, r1, v0, v1, quotient, tmp for q*v1
    cdef ll* r0 = big0
    cdef ll* r1 = big1
    cdef ll* v0 = <ll*> malloc(cap * sizeof(ll))
    cdef ll* v1 = <ll*> malloc(cap * sizeof(ll))
    cdef ll* q = <ll*> malloc(cap * sizeof(ll))
    cdef ll* tmp = <ll*> malloc(cap * sizeof(ll))
    if v0 == NULL or v1 == NULL or q == NULL or tmp == NULL:
        free(big0)
        free(big1)
        free(v0)
        free(v1)
        free(q)
        free(tmp)
        raise MemoryError()
    cdef Py_ssize_t lr0, lr1, lv0, lv1, lq, lt, i, j
    cdef ll* swp
    lr0 = _trim(r0, l0)
    lr1 = _trim(r1, l1)
    v0[0] = 0
    v1[0] = 1
    lv0 = 0
    lv1 = 1
    with nogil:
        while lr1 - 1 >= dstop_c:
            _divmod_c(f, r0, &lr0, r1, lr1, q, &lq)
            # r0 now holds the remainder; swap roles
            swp = r0; r0 = r1; r1 = swp
            j = lr0; lr0 = lr1; lr1 = j
            # tmp = q * v1
            lt = lq + lv1 - 1 if lq > 0 and lv1 > 0 else 0
            for i in range(lt):
                tmp[i] = 0
            for i in range(lq):
                if q[i] == 0:
                    continue
                for j in range(lv1):
                    tmp[i + j] = fadd(f, tmp[i + j], fmul(f, q[i], v1[j]))
            # v_new = v0 - tmp, into v0's buffer, then swap
            j = lv0 if lv0 > lt else lt
            for i in range(lv0, j):
                v0[i] = 0
            for i in range(lt):
                v0[i] = fsub(f, v0[i], tmp[i])
            j = _trim(v0, j)
            swp = v0; v0 = v1; v1 = swp
            i = lv0; lv0 = lv1; lv1 = j
    vout = _to_list(v1, lv1)
    rout = _to_list(r1, lr1)
    free(big0)
    free(big1)
    free(v0)
    free(v1)
    free(q)
    free(tmp)
    return vout, rout


def matmul_bin(field, a, b):
    """2-d matrix product over a binary extension field."""
    cdef _Ctx ctx = _Ctx(field)
    cdef FD* f = &ctx.fd
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    cdef const ll[:, ::1] av = a
    cdef const ll[:, ::1] bv = b
    if av.shape[1] != bv.shape[0]:
        raise ValueError("matmul shape mismatch")
    out = np.zeros((av.shape[0], bv.shape[1]), dtype=np.int64)
    cdef ll[:, ::1] ov = out
    cdef Py_ssize_t i, j, t
    cdef ll x
    with nogil:
        for i in range(av.shape[0]):
            for t in range(av.shape[1]):
                x = av[i, t]
                if x == 0:
                    continue
                for j in range(bv.shape[1]):
                    ov[i, j] = ov[i, j] ^ fmul(f, x, bv[t, j])
    return out
