from fractions import Fraction

import numpy as np
import pytest

from helpers import corrupt, corrupt_rows, dense_matmul_mod
from ratematch import product_matrix as pm
from ratematch.galois import make_field
from ratematch.product_matrix import FRACTIONAL, FULL, ParameterError
from ratematch.rs import DecodeFailure

F23 = make_field(23)
HALF = Fraction(1, 2)


@pytest.fixture(scope="module")
def small():
    params = pm.msr_params(10, 4, F23)
    return params, pm.build_encoder(params)


def test_msr_params_shape():
    params = pm.msr_params(10, 4, F23)
    assert (params.k, params.alpha, params.beta, params.B) == (3, 2, 1, 6)
    with pytest.raises(ParameterError):
        pm.msr_params(10, 5, F23)  # odd d
    with pytest.raises(ParameterError):
        pm.msr_params(4, 4, F23)  # n <= d


def test_mincut_bound_examples():
    p = pm.CodeParams(n=5, k=1, d=3, alpha=2, beta=1, B=2, fld=F23)
    assert pm.mincut_bound(p) == min(2, 3)
    msr = pm.msr_params(10, 4, F23)
    assert pm.mincut_bound(msr) == msr.k * msr.alpha == msr.B
    degenerate = pm.CodeParams(n=5, k=2, d=2, alpha=0, beta=1, B=0, fld=F23)
    assert pm.mincut_bound(degenerate) == 0


def test_operating_points():
    assert pm.msr_point(3, 3, 4) == (Fraction(1), Fraction(2))
    assert pm.msr_point(6, 3, 4) == (Fraction(2), Fraction(4))
    assert pm.mbr_point(6, 3, 4) == (Fraction(8, 3), Fraction(8, 3))
    with pytest.raises(ParameterError):
        pm.msr_point(6, 3, 2)  # k > d


def test_msr_point_witnessed_by_construction():
    # per-node storage alpha and repair bandwidth d are exactly the
    # minimum-storage operating point of the constructed code
    params = pm.msr_params(10, 4, F23)
    point = pm.msr_point(params.B, params.k, params.d)
    assert point == (Fraction(params.alpha), Fraction(params.d * params.beta))


def test_build_encoder_lambda_values():
    # worked case over F_13 (g = 2): n=6, alpha=2 gives lambda_i = 4^i
    f13 = make_field(13)
    enc = pm.build_encoder(pm.msr_params(6, 4, f13))
    assert enc.lambdas.tolist() == [1, 4, 3, 12, 9, 10]
    with pytest.raises(ParameterError):
        pm.build_encoder(pm.msr_params(10, 4, f13))  # lambda collision


def test_build_encoder_first_row_all_ones():
    f = make_field(13)
    enc = pm.build_encoder(pm.msr_params(5, 4, f))
    assert enc.psi[0].tolist() == [1, 1, 1, 1]


def test_psi_rows_are_vandermonde(small):
    params, enc = small
    for i in range(params.n):
        x = enc.points[i]
        assert enc.psi[i].tolist() == params.fld.powers(x, params.d)
    # any d rows of psi independent, any alpha rows of phi independent
    import itertools

    for rows in itertools.combinations(range(params.n), params.d):
        params.fld.matrix_inverse(enc.psi[list(rows)])
    for rows in itertools.combinations(range(params.n), params.alpha):
        params.fld.matrix_inverse(enc.phi[list(rows)])


def test_fractional_block_sizes():
    assert pm.fractional_block_size(4, HALF) == 3
    assert pm.fractional_block_size(18, Fraction(7, 18)) == 28
    assert pm.fractional_block_size(18, 1) == 90  # x=1 collapses to full rate
    assert pm.fractional_block_size(18, Fraction(2, 3)) == 45 + 3 * 4 // 2
    with pytest.raises(ParameterError):
        pm.fractional_block_size(4, Fraction(1, 3))  # xd not an integer


def test_symmetric_fill_layout():
    params = pm.msr_params(10, 6, F23)  # alpha = 3
    data = np.arange(1, 7)  # m_1..m_6, xd = 3, x = 1/2
    block = pm.make_message_block(params, FRACTIONAL, data, x=HALF)
    expect = np.array([[1, 2, 3], [2, 4, 5], [3, 5, 6]])
    assert np.array_equal(block.s1, expect)
    assert not block.s2.any()


def test_out_of_range_symbols_rejected(small):
    params, enc = small
    bad = np.zeros(params.B, dtype=np.int64)
    bad[0] = 23
    with pytest.raises(ParameterError):
        pm.make_message_block(params, FULL, bad)
    bad[0] = -1
    with pytest.raises(ParameterError):
        pm.make_message_block(params, FULL, bad)


def test_full_block_roundtrip_and_symmetry(small):
    params, enc = small
    rng = np.random.default_rng(0)
    data = rng.integers(0, 23, size=params.B)
    block = pm.make_message_block(params, FULL, data)
    assert np.array_equal(block.s1, block.s1.T)
    assert np.array_equal(block.s2, block.s2.T)
    assert np.array_equal(pm.block_to_symbols(params, block), data)


def test_encode_block_matches_dense_oracle(small):
    params, enc = small
    rng = np.random.default_rng(1)
    data = rng.integers(0, 23, size=params.B)
    block = pm.make_message_block(params, FULL, data)
    share = pm.encode_block(enc, block)
    oracle = dense_matmul_mod(enc.psi, block.matrix, 23)
    assert share.rows.tolist() == oracle


def test_encode_zero_and_s2_free_blocks(small):
    params, enc = small
    zero = pm.make_message_block(params, FULL, np.zeros(params.B, dtype=int))
    assert not pm.encode_block(enc, zero).rows.any()
    # S2 = 0: rows equal phi @ S1 and do not involve Lambda
    rng = np.random.default_rng(2)
    data = rng.integers(0, 23, size=pm.fractional_block_size(params.d, HALF))
    block = pm.make_message_block(params, FRACTIONAL, data, x=HALF)
    share = pm.encode_block(enc, block)
    expect = params.fld.matmul(enc.phi, block.s1)
    assert np.array_equal(share.rows, expect)


def test_help_symbol_cases(small):
    params, enc = small
    assert pm.help_symbol(enc, np.zeros(params.alpha, dtype=int), 3) == 0
    rng = np.random.default_rng(3)
    row = rng.integers(0, 23, size=params.alpha)
    expect = sum(int(row[t]) * int(enc.phi[5, t]) for t in range(params.alpha)) % 23
    assert pm.help_symbol(enc, row, 5) == expect


def test_help_symbol_width_one():
    params = pm.msr_params(5, 2, F23)  # alpha = 1, phi_z = (1)
    enc = pm.build_encoder(params)
    assert pm.help_symbol(enc, np.array([9]), 2) == 9


def test_regenerate_roundtrip_and_radius(small):
    params, enc = small
    rng = np.random.default_rng(4)
    radius_full = (params.n - params.d - 1) // 2
    radius_frac = (params.n - 2 - 1) // 2  # xd = 2
    for trial in range(100):
        z = int(rng.integers(0, params.n))
        data = rng.integers(0, 23, size=params.B)
        block = pm.make_message_block(params, FULL, data)
        share = pm.encode_block(enc, block)
        p = pm.help_vector(enc, share.rows, z)
        bad = [int(v) for v in rng.permutation([i for i in range(10) if i != z])[:radius_full]]
        row, flags = pm.regenerate(enc, params.d, corrupt(rng, F23, p, bad), z)
        assert np.array_equal(row, share.rows[z])
        assert flags == frozenset(bad)

        datal = rng.integers(0, 23, size=3)
        bl = pm.make_message_block(params, FRACTIONAL, datal, x=HALF)
        sl = pm.encode_block(enc, bl)
        pl = pm.help_vector(enc, sl.rows, z)
        badl = [int(v) for v in rng.permutation([i for i in range(10) if i != z])[:radius_frac]]
        rowl, flagsl = pm.regenerate(enc, 2, corrupt(rng, F23, pl, badl), z)
        assert np.array_equal(rowl, sl.rows[z])
        assert flagsl == frozenset(badl)


def test_regenerate_with_erasures(small):
    params, enc = small
    rng = np.random.default_rng(5)
    data = rng.integers(0, 23, size=params.B)
    share = pm.encode_block(enc, pm.make_message_block(params, FULL, data))
    z = 0
    p = pm.help_vector(enc, share.rows, z)
    # budget: 2t + e <= n - 1 - d = 5
    received = corrupt(rng, F23, p, [4])
    row, flags = pm.regenerate(enc, params.d, received, z, erasures={1, 2, 7})
    assert np.array_equal(row, share.rows[z])
    assert flags == {4}


def test_reconstruct_full_and_fractional(small):
    params, enc = small
    rng = np.random.default_rng(6)
    for trial in range(60):
        data = rng.integers(0, 23, size=params.B)
        block = pm.make_message_block(params, FULL, data)
        share = pm.encode_block(enc, block)
        bad = [int(v) for v in rng.permutation(10)[:3]]  # radius floor((10-2-1)/2)
        s1, s2, flags = pm.reconstruct(enc, FULL, corrupt_rows(rng, F23, share.rows, bad))
        assert np.array_equal(s1, block.s1) and np.array_equal(s2, block.s2)
        assert flags == frozenset(bad)

        datal = rng.integers(0, 23, size=3)
        bl = pm.make_message_block(params, FRACTIONAL, datal, x=HALF)
        sl = pm.encode_block(enc, bl)
        badl = [int(v) for v in rng.permutation(10)[:4]]  # radius floor((10-2)/2)
        s1l, _, flagsl = pm.reconstruct(
            enc, FRACTIONAL, corrupt_rows(rng, F23, sl.rows, badl), x=HALF
        )
        assert np.array_equal(s1l, bl.s1)
        assert flagsl == frozenset(badl)


def test_reconstruct_high_rate_fractional():
    params = pm.msr_params(12, 6, F23)  # alpha = 3
    enc = pm.build_encoder(params)
    x = Fraction(2, 3)  # xd = 4 > alpha -> dense S1, padded S2
    rng = np.random.default_rng(7)
    data = rng.integers(0, 23, size=pm.fractional_block_size(6, x))
    block = pm.make_message_block(params, FRACTIONAL, data, x=x)
    share = pm.encode_block(enc, block)
    bad = [2, 9, 11, 4]  # radius floor((12-3-1)/2) = 4
    s1, s2, flags = pm.reconstruct(
        enc, FRACTIONAL, corrupt_rows(rng, F23, share.rows, bad), x=x
    )
    assert np.array_equal(s1, block.s1) and np.array_equal(s2, block.s2)
    assert flags == frozenset(bad)


def test_reconstruct_with_declared_erasures(small):
    params, enc = small
    rng = np.random.default_rng(8)
    data = rng.integers(0, 23, size=params.B)
    block = pm.make_message_block(params, FULL, data)
    share = pm.encode_block(enc, block)
    received = share.rows.copy()
    received[3] = 0  # dead node, declared
    received = corrupt_rows(rng, F23, received, [7])
    s1, s2, flags = pm.reconstruct(enc, FULL, received, erasures={3})
    assert np.array_equal(s1, block.s1) and np.array_equal(s2, block.s2)
    assert flags == {7}


def test_regenerate_agrees_with_nearest_codeword_oracle():
    # tiny instance: the regeneration decode equals exhaustive nearest-
    # codeword search on the punctured help-symbol code
    from helpers import nearest_codewords

    f7 = make_field(7)
    params = pm.msr_params(5, 2, f7)  # alpha = 1, dim d = 2, radius 1
    enc = pm.build_encoder(params)
    rng = np.random.default_rng(10)
    z = 2
    keep = [i for i in range(5) if i != z]
    for _ in range(150):
        data = rng.integers(0, 7, size=params.B)
        share = pm.encode_block(enc, pm.make_message_block(params, FULL, data))
        p = pm.help_vector(enc, share.rows, z)
        word = corrupt(rng, f7, p, [int(rng.choice(keep))])
        dist, hits = nearest_codewords(
            7, enc.points, params.d, [int(v) for v in word], erasures={z}
        )
        try:
            row, flags = pm.regenerate(enc, params.d, word, z)
        except DecodeFailure:
            assert dist > 1 or len(hits) > 1
            continue
        assert dist <= 1 and len(hits) == 1
        expect = pm.row_from_help_message(enc, hits[0][0], z)
        assert np.array_equal(row, expect)


def test_lowrate_zero_padding_violation_detected(small):
    # a share matrix whose columns are all valid codewords but whose
    # implied message has data in the zero-padded region must be refused
    params, enc = small
    rng = np.random.default_rng(11)
    s1_bad = np.zeros((params.alpha, params.alpha), dtype=np.int64)
    s1_bad[:2, :2] = [[1, 2], [2, 3]]
    s1_bad[0, 1] = 4  # asymmetric on top of the violation below
    s1_bad[1, 0] = 4
    s1_bad[0, params.alpha - 1] = 7  # data where zero padding belongs
    received = params.fld.matmul(enc.phi, s1_bad)
    with pytest.raises(pm.InconsistentFlags):
        pm.reconstruct(enc, FRACTIONAL, received, x=HALF)


def test_decode_reentrancy_across_threads(small):
    # codec objects are immutable; concurrent decodes must not interfere
    from concurrent.futures import ThreadPoolExecutor

    params, enc = small
    rng = np.random.default_rng(12)
    jobs = []
    for _ in range(64):
        z = int(rng.integers(0, params.n))
        data = rng.integers(0, 23, size=params.B)
        share = pm.encode_block(enc, pm.make_message_block(params, FULL, data))
        p = pm.help_vector(enc, share.rows, z)
        bad = [int(v) for v in rng.permutation([i for i in range(10) if i != z])[:2]]
        jobs.append((corrupt(rng, F23, p, bad), z, share.rows[z], frozenset(bad)))

    def work(job):
        word, z, expect, bad = job
        row, flags = pm.regenerate(enc, params.d, word, z)
        return np.array_equal(row, expect) and flags == bad

    with ThreadPoolExecutor(max_workers=8) as pool:
        assert all(pool.map(work, jobs))


def test_batch_decode_blocks_guard_and_verify(small):
    params, enc = small
    rng = np.random.default_rng(9)
    m_t = pm.build_message_tensor(params, FULL, None, rng.integers(0, 23, size=(6, params.B)))
    shares = pm.encode_message_tensor(enc, m_t)
    ok, m_est = pm.batch_decode_blocks(enc, params.d, shares, max_errors=3)
    assert ok.all() and np.array_equal(m_est, m_t)
    # unsound request: more residual errors than the verification can pin
    ok2, _ = pm.batch_decode_blocks(enc, params.d, shares, max_errors=7)
    assert not ok2.any()
    # dirty block rejected
    dirty = shares.copy()
    dirty[4, 8, 1] = (dirty[4, 8, 1] + 1) % 23
    ok3, _ = pm.batch_decode_blocks(enc, params.d, dirty, max_errors=3)
    assert ok3.tolist() == [True, True, True, True, False, True]
