"""m-layer rate-matched MSR code.

Generalizes the 2-layer idea to m full-rate codes with repair degrees
d_1 <= ... <= d_m decoded in order: nodes flagged by earlier layers are
erased in later ones, so the cumulative correction capability follows the
floor recurrence

    t_1 = floor((n - d_1 - 1)/2)
    t_i = floor((n - d_i - 1 - t_(i-1))/2) + t_(i-1),

subject to n - d_i - 1 >= t_(i-1) at every layer. For a fixed degree
budget sum(d_i) = d_0, the near-equal split d_i = Round(d_0/m) maximizes
t_m (checked against an exhaustive composition search at desk scale, the
stand-in for a simplex solver). With equal degrees, every block uses one
encoder and layer identity is purely a decode-order role, so large files
are scheduled on an m x rho lattice: columns decode in parallel, the m
layers within a column decode sequentially with flag propagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ratematch import product_matrix as pm
from ratematch.product_matrix import FULL, ParameterError
from ratematch.rs import DecodeFailure, rs_decode


class InfeasibleLayering(ParameterError):
    """A layer's erasure load exceeds its budget (n - d_i - 1 < t_(i-1))."""


class LayeredDecodeFailure(DecodeFailure):
    """Some blocks stayed undecodable; carries the partial results."""

    def __init__(self, message, flags=frozenset(), failed_blocks=()):
        super().__init__(message)
        self.flags = frozenset(flags)
        self.failed_blocks = tuple(failed_blocks)


def correction_capability(n, d_list):
    """The cumulative correctable-node counts t_1..t_m."""
    if not d_list:
        raise ParameterError("need at least one layer")
    if any(d_list[i] > d_list[i + 1] for i in range(len(d_list) - 1)):
        raise ParameterError(f"repair degrees must be nondecreasing: {d_list}")
    if any(not 1 <= d < n for d in d_list):
        raise ParameterError(f"each d_i must satisfy 1 <= d_i < n: {d_list}")
    t = 0
    out = []
    for i, d in enumerate(d_list):
        if i > 0 and n - d - 1 < t:
            raise InfeasibleLayering(
                f"layer {i + 1}: erasure load t={t} exceeds budget n-d-1={n - d - 1}"
            )
        t = (n - d - 1 - t) // 2 + t
        out.append(t)
    return tuple(out)


def _round_half_up(x):
    return math.floor(x + Fraction(1, 2))


def equal_split(d_0, m):
    """Nondecreasing d_i with |d_i - d_0/m| <= 1 and exact sum d_0."""
    base, rem = divmod(d_0, m)
    return tuple([base] * (m - rem) + [base + 1] * rem)


def worst_case_t(n, m, d_tilde):
    """Lower bound on t_m for the exactly equal split (all slacks = 1)."""
    return Fraction((2**m - 1) * (n - d_tilde) - 2 ** (m + 1) + 2, 2**m)


def worst_case_t_split(n, d_list):
    """Lower bound on t_m for arbitrary degrees (all parity slacks = 1).

    Unfolding the recurrence with slack bits epsilon_i in {0, 1} gives
    t_m = (sum 2^(j-1)(n - d_j) - sum 2^(j-1) eps_j - 2^m + 1)/2^m, so
    taking every eps_j = 1 bounds it from below. The popular equal-degree
    form of this bound is only valid when the split is exactly equal.
    """
    m = len(d_list)
    weighted = sum(2**j * (n - d) for j, d in enumerate(d_list))
    return Fraction(weighted - 2 ** (m + 1) + 2, 2**m)


@dataclass(frozen=True)
class MLayerPlan:
    """Layer degrees and correction capabilities for one budget d_0."""

    n: int
    m: int
    d_0: int
    d_list: tuple
    t_list: tuple
    d_tilde: int
    worst_case_bound: Fraction

    @property
    def t_m(self):
        return self.t_list[-1]

    @property
    def all_even(self):
        return all(d % 2 == 0 for d in self.d_list)


def optimize_layers(n, m, d_0, require_even=False):
    """Equal-split optimum for max t_m under sum(d_i) = d_0.

    require_even rejects splits containing odd degrees (an actual encoder
    needs alpha = d/2 integral); the recurrence math itself is fine with
    odd degrees.
    """
    if m < 1:
        raise ParameterError(f"need m >= 1, got {m}")
    if d_0 < m:
        raise ParameterError(f"budget d_0={d_0} cannot give every layer d_i >= 1")
    d_list = equal_split(d_0, m)
    if require_even and any(d % 2 for d in d_list):
        raise ParameterError(
            f"split {d_list} contains odd degrees; choose d_0 a multiple of 2m "
            f"(e.g. {2 * m * round(d_0 / (2 * m))}) or drop require_even"
        )
    t_list = correction_capability(n, d_list)
    d_tilde = _round_half_up(Fraction(d_0, m))
    bound = worst_case_t_split(n, d_list)
    plan = MLayerPlan(
        n=n, m=m, d_0=d_0, d_list=d_list, t_list=t_list,
        d_tilde=d_tilde, worst_case_bound=bound,
    )
    assert plan.t_m >= bound, f"recurrence fell below the worst-case bound: {plan}"
    return plan


@dataclass(frozen=True)
class DualOptimum:
    """Largest equal degree whose capability still reaches t_target."""

    n: int
    m: int
    t_target: int
    d_tilde: int
    t_list: tuple
    remark_bound: Fraction
    satisfies_remark_bound: bool


def max_degree_for_correction(n, m, t_target):
    """Dual optimization: maximize the code rate at fixed correction power.

    Scans equal splits for the largest d_tilde with t_m >= t_target and
    reports it against the worst-case bound
    d >= n - (2^m t_0 + 2^(m+1) - 2)/(2^m - 1).
    """
    if t_target < 0:
        raise ParameterError("t_target must be nonnegative")
    for d_tilde in range(n - 1, 0, -1):
        t_list = correction_capability(n, (d_tilde,) * m)
        if t_list[-1] >= t_target:
            bound = n - Fraction(2**m * t_target + 2 ** (m + 1) - 2, 2**m - 1)
            return DualOptimum(
                n=n, m=m, t_target=t_target, d_tilde=d_tilde, t_list=t_list,
                remark_bound=bound, satisfies_remark_bound=d_tilde >= bound,
            )
    raise ParameterError(f"t_target={t_target} unachievable even at d=1 for n={n}")


def error_correction_efficiency(n, m, d_tilde):
    """delta_C: worst-case correctable fraction of the network, exact."""
    if not 0 < d_tilde < n:
        raise ParameterError(f"need 0 < d_tilde < n, got {d_tilde}")
    return Fraction((2**m - 1) * (n - d_tilde) - 2 ** (m + 1) + 2, 2**m * n)


def baseline_correction_efficiency(n, d_tilde):
    """delta'_C of the universally resilient code at the same rate."""
    return Fraction(n - d_tilde - 1, 2 * n)


def storage_capacity(d_list):
    """Total data symbols stored by one block per layer: sum alpha(alpha+1)."""
    if any(d % 2 for d in d_list):
        raise ParameterError(f"storage capacity needs even degrees, got {d_list}")
    return sum((d // 2) * (d // 2 + 1) for d in d_list)


def compositions(d_0, m, min_part=1, step=1):
    """Nondecreasing compositions of d_0 into m parts (parts >= min_part)."""
    out = []

    def rec(prefix, remaining, low):
        slots = m - len(prefix)
        if slots == 0:
            if remaining == 0:
                out.append(tuple(prefix))
            return
        part = low
        while part * slots <= remaining:
            rec(prefix + [part], remaining - part, part)
            part += step

    rec([], d_0, min_part)
    return out


@dataclass(frozen=True)
class CapacityAudit:
    """Extremizers of the per-layer storage sum over even compositions."""

    d_0: int
    m: int
    maximizers: tuple
    minimizers: tuple
    max_capacity: int
    min_capacity: int
    equal_split: tuple
    equal_capacity: int


def capacity_extremes(d_0, m):
    """Enumerate even compositions and report where capacity peaks.

    The summand (d/2)(d/2+1) is convex, so the equal split minimizes the
    total and the most skewed composition maximizes it; this audit is the
    recorded evidence for that behavior.
    """
    combos = compositions(d_0, m, min_part=2, step=2)
    if not combos:
        raise ParameterError(f"no even compositions of {d_0} into {m} parts")
    values = {c: storage_capacity(c) for c in combos}
    hi = max(values.values())
    lo = min(values.values())
    eq = equal_split(d_0, m)
    return CapacityAudit(
        d_0=d_0, m=m,
        maximizers=tuple(c for c, v in values.items() if v == hi),
        minimizers=tuple(c for c, v in values.items() if v == lo),
        max_capacity=hi, min_capacity=lo,
        equal_split=eq,
        equal_capacity=storage_capacity(eq) if all(d % 2 == 0 for d in eq) else None,
    )


def best_t_by_enumeration(n, m, d_0):
    """Exhaustive composition search for max t_m (the simplex stand-in)."""
    best = -1
    argmax = []
    for combo in compositions(d_0, m, min_part=1):
        if any(d >= n for d in combo):
            continue
        try:
            t = correction_capability(n, combo)[-1]
        except InfeasibleLayering:
            continue
        if t > best:
            best, argmax = t, [combo]
        elif t == best:
            argmax.append(combo)
    if best < 0:
        raise ParameterError(f"no feasible composition of {d_0} into {m} parts")
    return best, argmax


# ---------------------------------------------------------------------------
# lattice schedule


@dataclass(frozen=True)
class Lattice:
    """m x rho decode schedule; columns parallel, layers sequential."""

    m: int
    rho: int
    theta: int

    def __post_init__(self):
        if self.m < 1 or self.rho < 1:
            raise ParameterError("lattice needs m >= 1 and rho >= 1")
        if self.theta > self.m * self.rho:
            raise ParameterError(
                f"{self.theta} blocks do not fit an {self.m} x {self.rho} lattice"
            )

    @property
    def padding(self):
        return self.m * self.rho - self.theta

    def block_at(self, layer, col):
        """Block id in the given grid cell, or None for a padding slot."""
        j = col * self.m + layer
        return j if j < self.theta else None

    def layer_of(self, block):
        return block % self.m

    def column_of(self, block):
        return block // self.m


def plan_lattice(theta, m, rho=None):
    """Schedule theta blocks; rho defaults to ceil(theta/m) (min padding)."""
    if theta < 1:
        raise ParameterError("need at least one block")
    if rho is None:
        rho = math.ceil(theta / m)
    return Lattice(m=m, rho=rho, theta=theta)


# ---------------------------------------------------------------------------
# encode / repair / read


def encode_file(enc, data):
    """Encode a file as theta = ceil(B_F / B) full-rate blocks.

    Returns (shares with shape (n, theta, alpha), theta). The last block
    is zero-padded; callers keep the true symbol count for reads.
    """
    data = np.asarray(data, dtype=np.int64).ravel()
    b = enc.params.B
    theta = max(1, math.ceil(len(data) / b))
    padded = np.zeros(theta * b, dtype=np.int64)
    padded[: len(data)] = data
    m_tensor = pm.build_message_tensor(enc.params, FULL, None, padded.reshape(theta, b))
    shares = np.ascontiguousarray(pm.encode_message_tensor(enc, m_tensor).transpose(1, 0, 2))
    shares.flags.writeable = False
    return shares, theta


def _schedule(lattice):
    """Per-layer lists of (block id, column)."""
    layers = []
    for layer in range(lattice.m):
        cells = []
        for col in range(lattice.rho):
            block = lattice.block_at(layer, col)
            if block is not None:
                cells.append((block, col))
        layers.append(cells)
    return layers


def _layered_decode(enc, lattice, erasures, propagate_flags, decode_one, batch_one):
    """Shared driver for Algs. 4/5: layer loop, per-column flag state.

    decode_one(block, ers) -> flags (stores its result as a side effect);
    batch_one(blocks, ers) -> boolean ok-mask for an optimistic pass.
    Returns the accumulated global flag set; raises LayeredDecodeFailure
    if any block never decodes.
    """
    col_flags = [set() for _ in range(lattice.rho)]
    global_flags = set()
    failed = []
    for cells in _schedule(lattice):
        layer_base = frozenset(global_flags)
        new_flags = set()
        groups = {}
        for block, col in cells:
            if propagate_flags:
                ers = frozenset(erasures) | layer_base | frozenset(col_flags[col])
            else:
                ers = frozenset(erasures)
            groups.setdefault(ers, []).append((block, col))
        for ers, members in sorted(groups.items(), key=lambda kv: sorted(kv[0])):
            blocks = [b for b, _ in members]
            ok = batch_one(blocks, ers)
            for (block, col), good in zip(members, ok):
                if good:
                    continue
                try:
                    fl = decode_one(block, ers)
                except DecodeFailure:
                    failed.append(block)
                    continue
                col_flags[col] |= fl
                new_flags |= fl
        global_flags |= new_flags
    if failed:
        raise LayeredDecodeFailure(
            f"{len(failed)} blocks undecodable", flags=global_flags,
            failed_blocks=sorted(failed),
        )
    return frozenset(global_flags)


def regenerate_node(enc, lattice, help_matrix, z, erasures=(), propagate_flags=True):
    """Repair node z layer by layer on the lattice schedule.

    help_matrix: (n, theta) help symbols by helper node and block (row z
    ignored). propagate_flags=False decodes every block independently
    (the single-layer baseline). Returns (node share (theta, alpha),
    flagged nodes).
    """
    params = enc.params
    n, d = params.n, params.d
    help_matrix = np.asarray(help_matrix, dtype=np.int64)
    if help_matrix.shape != (n, lattice.theta):
        raise ParameterError(
            f"help matrix must be {(n, lattice.theta)}, got {help_matrix.shape}"
        )
    erasures = frozenset(erasures)
    if z in erasures:
        raise ParameterError("the failed node cannot also be erased")
    rows = np.zeros((lattice.theta, params.alpha), dtype=np.int64)

    def decode_one(block, ers):
        out = rs_decode(enc.code_for_dim(d), help_matrix[:, block], ers | {z})
        rows[block] = pm.row_from_help_message(enc, out.message, z)
        return set(out.error_positions)

    def batch_one(blocks, ers):
        full_ers = ers | {z}
        budget = max((n - len(full_ers) - d) // 2, 0)
        stacked = np.ascontiguousarray(help_matrix[:, blocks].T)[:, :, None]
        ok, m_est = pm.batch_decode_blocks(enc, d, stacked, full_ers, budget)
        if m_est is not None:
            for i, block in enumerate(blocks):
                if ok[i]:
                    rows[block] = pm.row_from_help_message(enc, m_est[i, :, 0], z)
        return ok

    flags = _layered_decode(enc, lattice, erasures, propagate_flags, decode_one, batch_one)
    return rows, flags


def reconstruct_file(enc, lattice, shares, file_symbols, erasures=(), propagate_flags=True):
    """Layered reconstruction; returns (file data, flagged nodes)."""
    params = enc.params
    n, alpha, d = params.n, params.alpha, params.d
    shares = np.asarray(shares, dtype=np.int64)
    if shares.shape != (n, lattice.theta, alpha):
        raise ParameterError(
            f"shares must be {(n, lattice.theta, alpha)}, got {shares.shape}"
        )
    erasures = frozenset(erasures)
    m_all = np.zeros((lattice.theta, d, alpha), dtype=np.int64)

    def decode_one(block, ers):
        s1, s2, fl = pm.reconstruct(enc, FULL, shares[:, block, :], ers)
        m_all[block] = np.vstack([s1, s2])
        return set(fl)

    def batch_one(blocks, ers):
        budget = max((n - len(ers) - alpha - 1) // 2, 0)
        stacked = np.ascontiguousarray(shares[:, blocks, :].transpose(1, 0, 2))
        ok, m_est = pm.batch_decode_blocks(enc, d, stacked, ers, budget)
        if m_est is not None:
            for i, block in enumerate(blocks):
                if ok[i]:
                    m_all[block] = m_est[i]
        return ok

    flags = _layered_decode(enc, lattice, erasures, propagate_flags, decode_one, batch_one)
    data = pm.extract_message_tensor(params, FULL, None, m_all).ravel()
    return data[:file_symbols], flags
