"""Finite-field arithmetic for the codec stack.

Supports prime fields F_p (hand-checkable tests, brute-force oracles) and
binary extension fields GF(2^w) for 2 <= w <= 16 (real payloads). Field
elements are canonical Python ints in [0, q); symbols in bulk are numpy
int64 arrays. Fields are immutable after construction and safe to share
across threads.

The polynomial kernels (interpolation, evaluation, extended Euclid) are
routed through a pluggable backend: compiled Cython when available, pure
Python otherwise. See ratematch._kernels.
"""

from __future__ import annotations

import numpy as np

from ratematch import _kernels


class FieldError(ValueError):
    """Unsupported field order or invalid generator."""


# Primitive polynomials for GF(2^w), bit i = coefficient of x^i.
# x (= 2) is a primitive element for each; construction verifies this.
_PRIMITIVE_POLY = {
    2: 0x7,
    3: 0xB,
    4: 0x13,
    5: 0x25,
    6: 0x43,
    7: 0x89,
    8: 0x11D,
    9: 0x211,
    10: 0x409,
    11: 0x805,
    12: 0x1053,
    13: 0x201B,
    14: 0x4443,
    15: 0x8003,
    16: 0x1100B,
}


def _prime_factors(n):
    out = []
    d = 2
    while d * d <= n:
        if n % d == 0:
            out.append(d)
            while n % d == 0:
                n //= d
        d += 1
    if n > 1:
        out.append(n)
    return out


def _is_prime(n):
    if n < 2:
        return False
    d = 2
    while d * d <= n:
        if n % d == 0:
            return False
        d += 1
    return True


class Field:
    """Base field API; use make_field() to construct instances."""

    kind = ""

    def __init__(self, order, kernel):
        self.order = order
        self._kernel = kernel

    # -- scalar arithmetic (canonical ints) --------------------------------

    def element(self, value):
        """Canonicalize an int into [0, order)."""
        return int(value) % self.order

    def add(self, a, b):
        raise NotImplementedError

    def sub(self, a, b):
        raise NotImplementedError

    def neg(self, a):
        raise NotImplementedError

    def mul(self, a, b):
        raise NotImplementedError

    def inv(self, a):
        raise NotImplementedError

    def div(self, a, b):
        return self.mul(a, self.inv(b))

    def pow(self, a, e):
        raise NotImplementedError

    def powers(self, x, count):
        """[x^0, x^1, ..., x^(count-1)]."""
        out = [1] * count
        for i in range(1, count):
            out[i] = self.mul(out[i - 1], x)
        return out

    def element_order(self, a):
        """Multiplicative order of a nonzero element."""
        if a == 0:
            raise ZeroDivisionError("zero has no multiplicative order")
        qm1 = self.order - 1
        order = qm1
        for p in _prime_factors(qm1):
            while order % p == 0 and self.pow(a, order // p) == 1:
                order //= p
        return order

    # -- array arithmetic (numpy int64) ------------------------------------

    def arr(self, values):
        return np.asarray(values, dtype=np.int64)

    def arr_add(self, a, b):
        raise NotImplementedError

    def arr_sub(self, a, b):
        raise NotImplementedError

    def arr_neg(self, a):
        raise NotImplementedError

    def arr_mul(self, a, b):
        raise NotImplementedError

    def arr_inv(self, a):
        raise NotImplementedError

    def arr_sum(self, a, axis=None):
        """Field sum along an axis (XOR-reduce for binary fields)."""
        raise NotImplementedError

    def dot(self, a, b):
        """Inner product of two vectors."""
        return int(self.arr_sum(self.arr_mul(a, b)))

    def matmul(self, a, b):
        """Matrix product; either side may carry a leading batch axis."""
        a = self.arr(a)
        b = self.arr(b)
        if a.ndim == 3 and b.ndim == 2:
            flat = self._matmul2(np.ascontiguousarray(a).reshape(-1, a.shape[2]), b)
            return flat.reshape(a.shape[0], a.shape[1], b.shape[1])
        if b.ndim == 3:
            k = b.shape[1]
            flat = np.ascontiguousarray(b.transpose(1, 0, 2)).reshape(k, -1)
            out = self._matmul2(a, flat)
            return np.ascontiguousarray(
                out.reshape(a.shape[0], b.shape[0], b.shape[2]).transpose(1, 0, 2)
            )
        return self._matmul2(a, b)

    def _matmul2(self, a, b):
        raise NotImplementedError

    def vandermonde(self, xs, width):
        """Rows (1, x, x^2, ..., x^(width-1)) for each x."""
        out = np.empty((len(xs), width), dtype=np.int64)
        for i, x in enumerate(xs):
            out[i] = self.powers(x, width)
        return out

    def matrix_inverse(self, a):
        """Inverse of a small square matrix by Gaussian elimination."""
        a = self.arr(a)
        n = a.shape[0]
        if a.shape != (n, n):
            raise ValueError("matrix must be square")
        work = [[int(v) for v in row] + [int(i == r) for i in range(n)]
                for r, row in enumerate(a)]
        for col in range(n):
            pivot = next((r for r in range(col, n) if work[r][col] != 0), None)
            if pivot is None:
                raise ZeroDivisionError("singular matrix")
            work[col], work[pivot] = work[pivot], work[col]
            scale = self.inv(work[col][col])
            work[col] = [self.mul(scale, v) for v in work[col]]
            for r in range(n):
                if r == col or work[r][col] == 0:
                    continue
                factor = work[r][col]
                work[r] = [self.sub(v, self.mul(factor, w))
                           for v, w in zip(work[r], work[col])]
        return np.array([row[n:] for row in work], dtype=np.int64)

    # -- polynomial kernels -------------------------------------------------

    def poly_eval(self, coeffs, xs):
        return self._kernel.poly_eval_many(self, list(coeffs), list(xs))

    def interpolate(self, xs, ys):
        return self._kernel.interpolate(self, list(xs), list(ys))

    def poly_from_roots(self, xs):
        return self._kernel.poly_from_roots(self, list(xs))

    def poly_divmod(self, a, b):
        return self._kernel.poly_divmod(self, list(a), list(b))

    def gao_reduce(self, g0, g1, dstop):
        return self._kernel.gao_reduce(self, list(g0), list(g1), dstop)

    # -- serialization -------------------------------------------------------

    @property
    def symbol_width(self):
        """Bytes per symbol (little-endian fixed width)."""
        return ((self.order - 1).bit_length() + 7) // 8

    def symbols_to_bytes(self, symbols):
        arr = np.ascontiguousarray(symbols, dtype=np.int64).ravel()
        width = self.symbol_width
        return arr.astype(f"<u{1 if width == 1 else 2}").tobytes()

    def bytes_to_symbols(self, data):
        width = self.symbol_width
        if len(data) % width:
            raise ValueError("byte length not a multiple of the symbol width")
        arr = np.frombuffer(data, dtype=f"<u{1 if width == 1 else 2}").astype(np.int64)
        if arr.size and int(arr.max()) >= self.order:
            raise ValueError("byte pattern exceeds field order")
        return arr

    def __repr__(self):
        return f"{type(self).__name__}(order={self.order}, g={self.g})"


class PrimeField(Field):
    kind = "prime"

    def __init__(self, order, generator_hint=None, kernel=None):
        super().__init__(order, kernel)
        self._inv_table = None
        if order == 2:
            self.g = 1
        elif generator_hint is not None:
            g = generator_hint % order
            if g == 0 or self.element_order(g) != order - 1:
                raise FieldError(f"{generator_hint} is not primitive mod {order}")
            self.g = g
        else:
            self.g = self._find_generator()
        # inverse table: cheap for the small primes this path is meant for
        if order <= 1 << 16:
            table = np.zeros(order, dtype=np.int64)
            table[1:] = np.array(
                [pow(a, order - 2, order) for a in range(1, order)], dtype=np.int64
            )
            table.flags.writeable = False
            self._inv_table = table

    def _find_generator(self):
        q = self.order
        factors = _prime_factors(q - 1)
        for g in range(2, q):
            if all(pow(g, (q - 1) // p, q) != 1 for p in factors):
                return g
        raise FieldError(f"no generator found for F_{q}")

    def add(self, a, b):
        return (a + b) % self.order

    def sub(self, a, b):
        return (a - b) % self.order

    def neg(self, a):
        return (-a) % self.order

    def mul(self, a, b):
        return (a * b) % self.order

    def inv(self, a):
        if a % self.order == 0:
            raise ZeroDivisionError("division by zero in field")
        if self._inv_table is not None:
            return int(self._inv_table[a % self.order])
        return pow(a, self.order - 2, self.order)

    def pow(self, a, e):
        if e < 0:
            return pow(self.inv(a), -e, self.order)
        return pow(a, e, self.order)

    def arr_add(self, a, b):
        return (self.arr(a) + self.arr(b)) % self.order

    def arr_sub(self, a, b):
        return (self.arr(a) - self.arr(b)) % self.order

    def arr_neg(self, a):
        return (-self.arr(a)) % self.order

    def arr_mul(self, a, b):
        return (self.arr(a) * self.arr(b)) % self.order

    def arr_inv(self, a):
        a = self.arr(a)
        if np.any(a % self.order == 0):
            raise ZeroDivisionError("division by zero in field")
        return self._inv_table[a % self.order]

    def arr_sum(self, a, axis=None):
        return self.arr(a).sum(axis=axis) % self.order

    def _matmul2(self, a, b):
        return np.matmul(a, b) % self.order


class BinaryField(Field):
    kind = "binary"

    def __init__(self, order, generator_hint=None, kernel=None):
        super().__init__(order, kernel)
        w = order.bit_length() - 1
        if w not in _PRIMITIVE_POLY:
            raise FieldError(f"unsupported binary field order {order}")
        self.width = w
        self.poly = _PRIMITIVE_POLY[w]
        exp = [0] * (2 * (order - 1))
        log = [0] * order
        x = 1
        for i in range(order - 1):
            exp[i] = x
            log[x] = i
            x <<= 1
            if x & order:
                x ^= self.poly
        if x != 1:
            raise FieldError(f"primitive polynomial table broken for w={w}")
        for i in range(order - 1, 2 * (order - 1)):
            exp[i] = exp[i - (order - 1)]
        self._exp = exp
        self._log = log
        self.exp_table_np = np.array(exp, dtype=np.int64)
        self.log_table_np = np.array(log, dtype=np.int64)
        self.exp_table_np.flags.writeable = False
        self.log_table_np.flags.writeable = False
        if generator_hint is not None and generator_hint != 2:
            if generator_hint == 0 or self.element_order(generator_hint) != order - 1:
                raise FieldError(f"{generator_hint} is not primitive in GF(2^{w})")
            self.g = generator_hint
        else:
            self.g = 2 if order > 2 else 1

    def add(self, a, b):
        return a ^ b

    sub = add

    def neg(self, a):
        return a

    def mul(self, a, b):
        if a == 0 or b == 0:
            return 0
        return self._exp[self._log[a] + self._log[b]]

    def inv(self, a):
        if a == 0:
            raise ZeroDivisionError("division by zero in field")
        return self._exp[self.order - 1 - self._log[a]]

    def pow(self, a, e):
        if a == 0:
            if e == 0:
                return 1
            if e < 0:
                raise ZeroDivisionError("division by zero in field")
            return 0
        return self._exp[(self._log[a] * e) % (self.order - 1)]

    def arr_add(self, a, b):
        return self.arr(a) ^ self.arr(b)

    arr_sub = arr_add

    def arr_neg(self, a):
        return self.arr(a)

    def arr_mul(self, a, b):
        a = self.arr(a)
        b = self.arr(b)
        out = self.exp_table_np[self.log_table_np[a] + self.log_table_np[b]]
        zero = (a == 0) | (b == 0)
        if zero.ndim == 0:
            return np.int64(0) if zero else out
        out = np.where(zero, 0, out)
        return out

    def arr_inv(self, a):
        a = self.arr(a)
        if np.any(a == 0):
            raise ZeroDivisionError("division by zero in field")
        return self.exp_table_np[self.order - 1 - self.log_table_np[a]]

    def arr_sum(self, a, axis=None):
        a = self.arr(a)
        if axis is None:
            return np.bitwise_xor.reduce(a, axis=None) if a.size else np.int64(0)
        return np.bitwise_xor.reduce(a, axis=axis)

    def _matmul2(self, a, b):
        return self._kernel.matmul_bin(self, np.ascontiguousarray(a), np.ascontiguousarray(b))


_FIELD_CACHE = {}


def make_field(order, generator_hint=None, backend=None):
    """Build (or fetch) a field of the given order.

    order must be a prime or 2^w for 2 <= w <= 16. If generator_hint is
    given it must be a primitive element; otherwise one is found. backend
    selects the kernel module ('compiled'/'reference'); default is the
    best available.
    """
    if not isinstance(order, int) or order < 2:
        raise FieldError(f"field order must be an integer >= 2, got {order!r}")
    kernel = _kernels.active if backend is None else _kernels.get_backend(backend)
    key = (order, generator_hint, kernel.BACKEND_NAME)
    cached = _FIELD_CACHE.get(key)
    if cached is not None:
        return cached
    if _is_prime(order):
        field = PrimeField(order, generator_hint, kernel)
    elif order & (order - 1) == 0:
        field = BinaryField(order, generator_hint, kernel)
    else:
        raise FieldError(f"{order} is not a prime or a supported power of two")
    if field.g != 1 and field.element_order(field.g) != order - 1:
        raise FieldError(f"generator {field.g} does not have order {order - 1}")
    _FIELD_CACHE[key] = field
    return field
