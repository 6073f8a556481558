from fractions import Fraction

import numpy as np
import pytest

from ratematch import m_layer as ml
from ratematch import product_matrix as pm
from ratematch.galois import make_field
from ratematch.product_matrix import ParameterError

F64K = make_field(1 << 16)


def test_recurrence_examples():
    assert ml.correction_capability(30, (17,)) == (6,)
    assert ml.correction_capability(30, (17, 17, 17)) == (6, 9, 10)
    assert ml.correction_capability(30, (16, 17, 17)) == (6, 9, 10)
    assert ml.correction_capability(30, (16, 16, 16)) == (6, 9, 11)
    with pytest.raises(ml.InfeasibleLayering):
        ml.correction_capability(30, (5, 17, 28))
    with pytest.raises(ParameterError):
        ml.correction_capability(30, (17, 16, 16))  # not nondecreasing


def test_recurrence_matches_slack_bit_expansion():
    # the floor recurrence equals the expansion with explicit parity bits
    rng = np.random.default_rng(0)
    for _ in range(300):
        n = int(rng.integers(5, 40))
        m = int(rng.integers(1, 5))
        ds = sorted(int(v) for v in rng.integers(1, n, size=m))
        try:
            ts = ml.correction_capability(n, tuple(ds))
        except ml.InfeasibleLayering:
            continue
        t = 0
        for i, d in enumerate(ds):
            eps = (n - d - 1 - t) % 2
            t = (n - d - 1 - t - eps) // 2 + t
            assert ts[i] == t


def test_optimize_layers_flagship_case():
    plan = ml.optimize_layers(30, 3, 50)
    assert plan.d_list == (16, 17, 17)
    assert plan.t_list == (6, 9, 10)
    assert plan.d_tilde == 17
    assert plan.t_m >= plan.worst_case_bound
    assert plan.t_m >= Fraction(77, 8)  # the equal-degree form at d~=17


def test_optimize_layers_m1_passthrough():
    plan = ml.optimize_layers(30, 1, 18)
    assert plan.d_list == (18,)
    assert plan.t_list == ((30 - 18 - 1) // 2,)


def test_optimize_layers_even_requirement():
    with pytest.raises(ParameterError):
        ml.optimize_layers(30, 3, 50, require_even=True)
    plan = ml.optimize_layers(30, 3, 48, require_even=True)
    assert plan.d_list == (16, 16, 16)


def test_equal_split_is_optimal_small_scale():
    rng_checked = 0
    for n in range(6, 16):
        for m in range(2, 4):
            for d0 in range(m, min(20, 3 * n // 2)):
                split = ml.equal_split(d0, m)
                if split[-1] >= n:
                    continue
                best, argmax = ml.best_t_by_enumeration(n, m, d0)
                assert ml.correction_capability(n, split)[-1] == best, (n, m, d0)
                rng_checked += 1
    assert rng_checked > 100


def test_dual_optimization():
    dual = ml.max_degree_for_correction(30, 3, 10)
    assert dual.d_tilde == 17
    assert dual.satisfies_remark_bound
    assert ml.max_degree_for_correction(30, 3, 0).d_tilde == 29
    with pytest.raises(ParameterError):
        ml.max_degree_for_correction(6, 2, 50)


def test_efficiency_values():
    assert ml.error_correction_efficiency(30, 3, 17) == Fraction(77, 240)
    assert ml.baseline_correction_efficiency(30, 17) == Fraction(1, 5)
    ratio = ml.error_correction_efficiency(30, 3, 17) / ml.baseline_correction_efficiency(30, 17)
    assert ratio == Fraction(77, 48)
    assert float(ratio) > 1.5
    # m = 1 collapse
    assert ml.error_correction_efficiency(30, 1, 17) == Fraction(30 - 17 - 2, 60)


def test_efficiency_monotone_in_m():
    for d_tilde in (5, 10, 17):
        values = [ml.error_correction_efficiency(30, m, d_tilde) for m in range(2, 17)]
        assert all(b > a for a, b in zip(values, values[1:]))


def test_efficiency_99_percent_of_limit():
    limit = Fraction(30 - 10 - 2, 30)
    assert ml.error_correction_efficiency(30, 7, 10) / limit >= Fraction(99, 100)


def test_storage_capacity():
    assert ml.storage_capacity((2,)) == 2
    assert ml.storage_capacity((4, 4, 4)) == 18
    with pytest.raises(ParameterError):
        ml.storage_capacity((3, 4))


def test_capacity_extremes_equal_split_minimizes():
    audit = ml.capacity_extremes(12, 3)
    assert audit.maximizers == ((2, 2, 8),)
    assert audit.max_capacity == 24
    assert audit.minimizers == ((4, 4, 4),)
    assert audit.min_capacity == 18
    assert audit.equal_capacity == 18


def test_lattice_shapes():
    assert ml.plan_lattice(1, 1).rho == 1
    assert ml.plan_lattice(12, 3).rho == 4
    lat = ml.plan_lattice(13, 3)
    assert lat.rho == 5 and lat.padding == 2
    assert lat.block_at(0, 0) == 0
    assert lat.block_at(2, 4) is None  # padding slot
    assert lat.layer_of(5) == 2 and lat.column_of(5) == 1


@pytest.fixture(scope="module")
def coded():
    params = pm.msr_params(30, 16, F64K)
    enc = pm.build_encoder(params)
    rng = np.random.default_rng(1)
    data = rng.integers(0, 1 << 16, size=3 * params.B)
    shares, theta = ml.encode_file(enc, data)
    lattice = ml.plan_lattice(theta, 3)
    return enc, data, shares, lattice


def test_encode_roundtrip_and_dense_row(coded):
    enc, data, shares, lattice = coded
    out, flags = ml.reconstruct_file(enc, lattice, shares, len(data))
    assert np.array_equal(out, data) and not flags
    # node row equals the per-block product psi_i @ M
    params = enc.params
    m_t = pm.build_message_tensor(params, pm.FULL, None, data.reshape(3, params.B))
    for b in range(3):
        expect = params.fld.matmul(enc.psi, m_t[b])
        assert np.array_equal(shares[:, b, :], expect)


def test_zero_data_zero_shares():
    params = pm.msr_params(12, 6, make_field(23))
    enc = pm.build_encoder(params)
    shares, theta = ml.encode_file(enc, np.zeros(2 * params.B, dtype=np.int64))
    assert theta == 2 and not shares.any()


def _staircase(rng, lattice, attackers, onsets, word, order, per_row=None):
    for node, onset in zip(attackers, onsets):
        for b in range(lattice.theta):
            if lattice.layer_of(b) >= onset:
                if per_row is None:
                    word[node, b] ^= int(rng.integers(1, order))
                else:
                    word[node, b] ^= rng.integers(1, order, size=per_row)


def test_layered_regen_beats_single_layer(coded):
    enc, data, shares, lattice = coded
    rng = np.random.default_rng(2)
    z = 11
    hv = pm.help_vector(enc, shares.transpose(1, 0, 2), z).T
    t_seq = ml.correction_capability(30, (16, 16, 16))
    attackers = [i for i in range(30) if i != z][:10]
    onsets = [0] * 6 + [1] * 3 + [2]
    word = hv.copy()
    _staircase(rng, lattice, attackers, onsets, word, 1 << 16)
    rows, flags = ml.regenerate_node(enc, lattice, word, z)
    assert np.array_equal(rows, shares[z])
    assert flags == frozenset(attackers)
    with pytest.raises(ml.LayeredDecodeFailure) as err:
        ml.regenerate_node(enc, lattice, word, z, propagate_flags=False)
    # independent decoding corrects only the first-layer attackers
    assert err.value.flags == frozenset(attackers[:6])
    assert err.value.failed_blocks == (1, 2)


def test_layer_m_only_attack_is_the_weak_spot(coded):
    # hitting only the last layer reduces correction to the single-block
    # radius floor((n - d - 1)/2) = 6
    enc, data, shares, lattice = coded
    rng = np.random.default_rng(3)
    z = 4
    hv = pm.help_vector(enc, shares.transpose(1, 0, 2), z).T
    attackers = [i for i in range(30) if i != z][:7]
    word = hv.copy()
    _staircase(rng, lattice, attackers, [2] * 7, word, 1 << 16)
    with pytest.raises(ml.LayeredDecodeFailure):
        ml.regenerate_node(enc, lattice, word, z)
    word_ok = hv.copy()
    _staircase(rng, lattice, attackers[:6], [2] * 6, word_ok, 1 << 16)
    rows, flags = ml.regenerate_node(enc, lattice, word_ok, z)
    assert np.array_equal(rows, shares[z])
    assert flags == frozenset(attackers[:6])


def test_layered_reconstruction_beats_single_block(coded):
    # single-block reconstruction radius is floor((30-8-1)/2) = 10; the
    # layered schedule pushes past it with staircase onsets
    enc, data, shares, lattice = coded
    rng = np.random.default_rng(4)
    attackers = list(range(11))
    onsets = [0] * 10 + [1]
    recv = shares.copy()
    _staircase(rng, lattice, attackers, onsets, recv, 1 << 16,
               per_row=enc.params.alpha)
    out, flags = ml.reconstruct_file(enc, lattice, recv, len(data))
    assert np.array_equal(out, data)
    assert flags == frozenset(attackers)
    with pytest.raises(ml.LayeredDecodeFailure):
        ml.reconstruct_file(enc, lattice, recv, len(data), propagate_flags=False)


def test_flags_propagate_monotonically(coded):
    enc, data, shares, lattice = coded
    rng = np.random.default_rng(5)
    recv = shares.copy()
    # one attacker corrupting everything: flagged in layer 1, erased after
    _staircase(rng, lattice, [9], [0], recv, 1 << 16, per_row=enc.params.alpha)
    out, flags = ml.reconstruct_file(enc, lattice, recv, len(data))
    assert np.array_equal(out, data) and flags == {9}


def test_global_flag_union_crosses_columns():
    # flags found in one column are applied to other columns at the next
    # layer boundary: nodes 0,1 are flagged by (layer 0, column 0); the
    # (layer 1, column 1) block carries three errors, beyond its radius 2,
    # and decodes only because those cross-column flags arrive as erasures
    fld = make_field(23)
    params = pm.msr_params(12, 6, fld)  # per-block budget n-1-d = 5
    enc = pm.build_encoder(params)
    rng = np.random.default_rng(6)
    data = rng.integers(0, 23, size=6 * params.B)
    shares, theta = ml.encode_file(enc, data)
    lattice = ml.plan_lattice(theta, 3)
    assert lattice.rho == 2
    z = 11
    hv = pm.help_vector(enc, shares.transpose(1, 0, 2), z).T
    word = hv.copy()
    b_early = lattice.block_at(0, 0)
    b_late = lattice.block_at(1, 1)
    for node in (0, 1):
        word[node, b_early] = fld.add(int(word[node, b_early]), 5)
    for node in (0, 1, 2):
        word[node, b_late] = fld.add(int(word[node, b_late]), 9)
    rows, flags = ml.regenerate_node(enc, lattice, word, z)
    assert np.array_equal(rows, shares[z])
    assert flags == frozenset({0, 1, 2})
    with pytest.raises(ml.LayeredDecodeFailure) as err:
        ml.regenerate_node(enc, lattice, word, z, propagate_flags=False)
    assert err.value.failed_blocks == (b_late,)
