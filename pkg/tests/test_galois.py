import numpy as np
import pytest

from helpers import carryless_mul, dense_matmul_mod
from ratematch.galois import FieldError, make_field


def test_small_prime_field_generator():
    f = make_field(13)
    assert f.g == 2
    # exhaustive order check
    seen = {f.pow(f.g, k) for k in range(1, 13)}
    assert f.pow(f.g, 12) == 1
    assert all(f.pow(f.g, k) != 1 for k in range(1, 12))
    assert seen == set(range(1, 13))


def test_inverse_table_f13():
    f = make_field(13)
    assert f.inv(2) == 7
    for a in range(1, 13):
        assert f.mul(a, f.inv(a)) == 1
        assert f.inv(f.inv(a)) == a
    with pytest.raises(ZeroDivisionError):
        f.inv(0)


def test_degenerate_binary_order_two():
    f = make_field(2)
    assert f.g == 1
    assert f.add(1, 1) == 0
    assert f.mul(1, 1) == 1


def test_unsupported_orders_rejected():
    with pytest.raises(FieldError):
        make_field(12)
    with pytest.raises(FieldError):
        make_field(9)  # odd prime power, unsupported
    with pytest.raises(FieldError):
        make_field(1)


def test_bad_generator_hint_rejected():
    with pytest.raises(FieldError):
        make_field(13, generator_hint=3)  # ord(3) = 3
    f = make_field(13, generator_hint=6)  # 6 is primitive mod 13
    assert f.g == 6


@pytest.mark.parametrize("order", [13, 251, 257, 1 << 8, 1 << 16])
def test_field_axioms_random(order):
    f = make_field(order)
    rng = np.random.default_rng(order)
    for _ in range(200):
        a, b, c = (int(v) for v in rng.integers(0, order, size=3))
        assert f.add(a, b) == f.add(b, a)
        assert f.mul(a, b) == f.mul(b, a)
        assert f.add(f.add(a, b), c) == f.add(a, f.add(b, c))
        assert f.mul(f.mul(a, b), c) == f.mul(a, f.mul(b, c))
        assert f.mul(a, f.add(b, c)) == f.add(f.mul(a, b), f.mul(a, c))
        assert f.mul(a, 1) == a
        assert f.add(a, f.neg(a)) == 0
        if a:
            assert f.mul(a, f.inv(a)) == 1
            assert f.inv(f.inv(a)) == a
    assert f.element_order(f.g) == order - 1


@pytest.mark.parametrize("width,order", [(8, 1 << 8), (16, 1 << 16)])
def test_binary_mul_against_carryless_oracle(width, order):
    f = make_field(order)
    rng = np.random.default_rng(width)
    for _ in range(500):
        a, b = (int(v) for v in rng.integers(0, order, size=2))
        assert f.mul(a, b) == carryless_mul(a, b, f.poly, width)


@pytest.mark.parametrize("order", [23, 1 << 8])
def test_array_ops_match_scalar(order):
    f = make_field(order)
    rng = np.random.default_rng(1)
    a = rng.integers(0, order, size=64)
    b = rng.integers(0, order, size=64)
    assert all(f.arr_add(a, b) == [f.add(int(x), int(y)) for x, y in zip(a, b)])
    assert all(f.arr_sub(a, b) == [f.sub(int(x), int(y)) for x, y in zip(a, b)])
    assert all(f.arr_mul(a, b) == [f.mul(int(x), int(y)) for x, y in zip(a, b)])
    nz = a + (a == 0)
    assert all(f.arr_inv(nz) == [f.inv(int(x)) for x in nz])
    assert int(f.arr_sum(a)) == _fold(f, a)


def _fold(f, values):
    acc = 0
    for v in values:
        acc = f.add(acc, int(v))
    return acc


def test_matmul_prime_against_dense_oracle():
    f = make_field(23)
    rng = np.random.default_rng(2)
    a = rng.integers(0, 23, size=(5, 4))
    b = rng.integers(0, 23, size=(4, 6))
    assert np.array_equal(f.matmul(a, b), np.array(dense_matmul_mod(a, b, 23)))
    batch = rng.integers(0, 23, size=(3, 4, 6))
    out = f.matmul(a, batch)
    for t in range(3):
        assert np.array_equal(out[t], np.array(dense_matmul_mod(a, batch[t], 23)))


def test_matmul_binary_against_scalar():
    f = make_field(1 << 8)
    rng = np.random.default_rng(3)
    a = rng.integers(0, 256, size=(4, 5))
    b = rng.integers(0, 256, size=(5, 3))
    out = f.matmul(a, b)
    for i in range(4):
        for j in range(3):
            acc = 0
            for t in range(5):
                acc ^= f.mul(int(a[i, t]), int(b[t, j]))
            assert out[i, j] == acc


def test_matrix_inverse_roundtrip():
    f = make_field(13)
    rng = np.random.default_rng(4)
    for _ in range(20):
        a = rng.integers(0, 13, size=(4, 4))
        try:
            inv = f.matrix_inverse(a)
        except ZeroDivisionError:
            continue
        assert np.array_equal(f.matmul(a, inv), np.eye(4, dtype=np.int64))


def test_polynomial_kernels():
    f = make_field(23)
    rng = np.random.default_rng(5)
    xs = [int(x) for x in rng.permutation(22)[:8] + 1]
    ys = [int(y) for y in rng.integers(0, 23, size=8)]
    coeffs = f.interpolate(xs, ys)
    assert len(coeffs) <= 8
    assert f.poly_eval(coeffs, xs) == ys
    # divmod identity a = q*b + r
    a = [int(v) for v in rng.integers(0, 23, size=9)]
    b = [int(v) for v in rng.integers(0, 23, size=4)]
    b[-1] = max(b[-1], 1)
    q, r = f.poly_divmod(a, b)
    recomposed = _poly_add(f, _poly_mul(f, q, b), r)
    assert recomposed == _trim(a)


def _trim(p):
    p = list(p)
    while p and p[-1] == 0:
        p.pop()
    return p


def _poly_mul(f, a, b):
    out = [0] * (len(a) + len(b) - 1 if a and b else 0)
    for i, ca in enumerate(a):
        for j, cb in enumerate(b):
            out[i + j] = f.add(out[i + j], f.mul(ca, cb))
    return out


def _poly_add(f, a, b):
    out = [0] * max(len(a), len(b))
    for i, c in enumerate(a):
        out[i] = c
    for i, c in enumerate(b):
        out[i] = f.add(out[i], c)
    return _trim(out)


def test_serialization_widths_and_roundtrip():
    assert make_field(23).symbol_width == 1
    assert make_field(251).symbol_width == 1
    assert make_field(257).symbol_width == 2
    assert make_field(1 << 16).symbol_width == 2
    f = make_field(1 << 16)
    rng = np.random.default_rng(6)
    syms = rng.integers(0, 1 << 16, size=100)
    assert np.array_equal(f.bytes_to_symbols(f.symbols_to_bytes(syms)), syms)
    # little-endian fixed width
    assert f.symbols_to_bytes(np.array([0x0102])) == b"\x02\x01"
    with pytest.raises(ValueError):
        make_field(23).bytes_to_symbols(b"\xff")


def test_tables_are_immutable():
    f = make_field(1 << 8)
    with pytest.raises(ValueError):
        f.exp_table_np[0] = 5
