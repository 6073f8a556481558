"""2-layer rate-matched MSR code.

A file is split between theta_h full-rate blocks (storage efficiency) and
theta_l fractional-rate blocks (malicious-node detection), all encoded
under one product-matrix encoder and concatenated in a secret seeded
permutation. Rate matching fixes the fractional dimension so that its
error radius equals the full-rate code's erasure budget:

    floor((n - xd - 1)/2) = n - d - 1 = M,

which pins d = n - M - 1 and x = (n - 2M - 1)/(n - M - 1). The remaining
knobs theta_l (ceiling of the closed-form detection requirement) and
theta_h (ceiling of the residual file size) maximize storage efficiency
for the required detection probability.

Repair and read run detect-then-erase: fractional blocks first (flagging
corrupt nodes), then full-rate blocks with the flagged nodes erased.
Flags accumulate monotonically for the whole session.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ratematch import product_matrix as pm
from ratematch.product_matrix import FRACTIONAL, FULL, ParameterError
from ratematch.rs import DecodeFailure, rs_decode


def rate_match(n, M):
    """Solve the rate-matching identities for (d, x).

    Works for any n > 2M + 1 >= 3; evenness of d (needed to build an
    actual encoder) is checked by plan_parameters, not here.
    """
    if M < 1:
        raise ParameterError(f"need at least one tolerated malicious node, got M={M}")
    if n <= 2 * M + 1:
        raise ParameterError(f"need n > 2M+1, got n={n}, M={M}")
    d = n - M - 1
    x = Fraction(n - 2 * M - 1, n - M - 1)
    return d, x


def detection_probability(P, theta_l, M):
    """Probability that all M malicious nodes touch >= 1 fractional symbol."""
    if not 0 <= P <= 1:
        raise ParameterError(f"P must be in [0, 1], got {P}")
    if theta_l < 0 or M < 0:
        raise ParameterError("theta_l and M must be nonnegative")
    return (1.0 - (1.0 - P) ** theta_l) ** M


def min_fractional_blocks(P, P_det, M):
    """Smallest theta_l with detection_probability >= P_det (clamped to 1)."""
    if not 0 < P < 1 or not 0 < P_det < 1:
        raise ParameterError("need 0 < P < 1 and 0 < P_det < 1")
    arg = 1.0 - P_det ** (1.0 / M)
    theta_l = 1 if arg <= 0 else max(1, math.ceil(math.log(arg, 1.0 - P)))
    # the closed form can land one off at float boundaries; pin minimality
    while detection_probability(P, theta_l, M) < P_det:
        theta_l += 1
    while theta_l > 1 and detection_probability(P, theta_l - 1, M) >= P_det:
        theta_l -= 1
    return theta_l


@dataclass(frozen=True)
class TwoLayerPlan:
    """Optimized {d, x, theta_l, theta_h} for given {n, M, P, P_det, B_F}."""

    n: int
    M: int
    P: float
    P_det: float
    B_F: int
    d: int
    xd: int
    alpha: int
    B_H: int
    B_L: int
    theta_l: int
    theta_h: int

    @property
    def x(self):
        return Fraction(self.xd, self.d)

    @property
    def total_blocks(self):
        return self.theta_h + self.theta_l

    @property
    def full_symbols(self):
        """Data symbols carried by the full-rate blocks (before padding)."""
        return self.B_F - self.theta_l * self.B_L


def plan_parameters(n, M, P, P_det, B_F):
    """Closed-form plan: d, x from rate matching; theta_l, theta_h by ceiling."""
    d, x = rate_match(n, M)
    if d % 2:
        raise ParameterError(
            f"d = n - M - 1 = {d} is odd; pick n, M of opposite parity"
        )
    xd = n - 2 * M - 1
    alpha = d // 2
    b_h = alpha * (alpha + 1)
    b_l = pm.fractional_block_size(d, x)
    theta_l = min_fractional_blocks(P, P_det, M)
    if B_F <= theta_l * b_l:
        raise ParameterError(
            f"file too small: need B_F > theta_l*B_L = {theta_l * b_l}, got {B_F}"
        )
    theta_h = math.ceil((B_F - theta_l * b_l) / b_h)
    plan = TwoLayerPlan(
        n=n, M=M, P=P, P_det=P_det, B_F=B_F, d=d, xd=xd, alpha=alpha,
        B_H=b_h, B_L=b_l, theta_l=theta_l, theta_h=theta_h,
    )
    assert (n - xd - 1) // 2 == M == n - d - 1
    assert detection_probability(P, theta_l, M) >= P_det
    return plan


def storage_efficiency(plan):
    """delta_S: stored data over total storage, exact rational."""
    return Fraction(plan.B_F, plan.total_blocks * plan.n * plan.alpha)


def baseline_efficiency(plan):
    """delta'_S of the universally resilient code with equal regen radius."""
    return Fraction(plan.xd + 2, 2 * plan.n)


def efficiency_ratio(plan):
    return storage_efficiency(plan) / baseline_efficiency(plan)


def build_plan_encoder(plan, fld):
    return pm.build_encoder(pm.msr_params(plan.n, plan.d, fld))


# ---------------------------------------------------------------------------
# permutation record


class RecordDropped(RuntimeError):
    """The replacement node already erased its permutation record."""


_RECORD_HEADER = struct.Struct("<4sHIIddQQQQ")
_RECORD_MAGIC = b"RM2L"


class PermutationRecord:
    """The secure server's permutation of fractional/full block positions.

    Canonical block ids are 0..theta_h-1 (full rate) followed by
    theta_h..theta-1 (fractional); block_at(position) maps a stored column
    position to its canonical id. The order is regenerated from the seed,
    so serialization carries only the plan header and the seed.
    """

    def __init__(self, plan, seed):
        self.plan = plan
        self.seed = int(seed)
        order = np.random.default_rng(self.seed).permutation(plan.total_blocks)
        order.flags.writeable = False
        self._order = order

    @property
    def order(self):
        if self._order is None:
            raise RecordDropped("permutation record was dropped")
        return self._order

    def block_at(self, position):
        return int(self.order[position])

    def kind_at(self, position):
        return FULL if self.block_at(position) < self.plan.theta_h else FRACTIONAL

    def positions_of_kind(self, kind):
        order = self.order
        mask = order < self.plan.theta_h
        if kind == FRACTIONAL:
            mask = ~mask
        return np.nonzero(mask)[0]

    def clone(self):
        return PermutationRecord(self.plan, self.seed)

    def drop(self):
        """Erase the order information (replacement node, post-repair)."""
        self._order = None

    def to_bytes(self):
        p = self.plan
        return _RECORD_HEADER.pack(
            _RECORD_MAGIC, 1, p.n, p.M, p.P, p.P_det, p.B_F,
            self.seed, p.theta_l, p.theta_h,
        )

    @classmethod
    def from_bytes(cls, blob):
        magic, version, n, M, P, P_det, b_f, seed, theta_l, theta_h = (
            _RECORD_HEADER.unpack(blob)
        )
        if magic != _RECORD_MAGIC or version != 1:
            raise ValueError("not a permutation record")
        plan = plan_parameters(n, M, P, P_det, b_f)
        if (plan.theta_l, plan.theta_h) != (theta_l, theta_h):
            raise ValueError("record header disagrees with the recomputed plan")
        return cls(plan, seed)


# ---------------------------------------------------------------------------
# encoding


def encode_file(data, plan, enc, seed):
    """Encode B_F symbols into per-node shares plus the permutation record.

    Full-rate blocks carry the head of the file (zero-padded at the end),
    fractional blocks carry the exact theta_l*B_L tail. Returns
    (shares with shape (n, total blocks, alpha), record).
    """
    data = np.asarray(data, dtype=np.int64)
    if data.shape != (plan.B_F,):
        raise ParameterError(f"expected {plan.B_F} symbols, got {data.shape}")
    params = enc.params
    if (params.n, params.d) != (plan.n, plan.d):
        raise ParameterError("encoder does not match the plan")

    split = plan.full_symbols
    full_data = np.zeros(plan.theta_h * plan.B_H, dtype=np.int64)
    full_data[:split] = data[:split]
    frac_data = data[split:]

    m_full = pm.build_message_tensor(
        params, FULL, None, full_data.reshape(plan.theta_h, plan.B_H)
    )
    m_frac = pm.build_message_tensor(
        params, FRACTIONAL, plan.x, frac_data.reshape(plan.theta_l, plan.B_L)
    )
    blocks = np.concatenate(
        [pm.encode_message_tensor(enc, m_full), pm.encode_message_tensor(enc, m_frac)]
    )
    record = PermutationRecord(plan, seed)
    shares = np.ascontiguousarray(blocks[record.order].transpose(1, 0, 2))
    shares.flags.writeable = False
    return shares, record


# ---------------------------------------------------------------------------
# repair and read


def regenerate_node(plan, enc, record, help_matrix, z, erasures=()):
    """Repair node z: fractional blocks first (flagging), then full rate.

    help_matrix: (n, total blocks) help symbols indexed by helper node and
    stored position (row z is ignored). Returns (the node's share as a
    (total blocks, alpha) matrix, flagged nodes). Raises DecodeFailure if
    more than M nodes get flagged or an unflagged corruption exhausts the
    full-rate budget.
    """
    params = enc.params
    n, alpha, d = params.n, params.alpha, params.d
    fld = params.fld
    help_matrix = np.asarray(help_matrix, dtype=np.int64)
    if help_matrix.shape != (n, plan.total_blocks):
        raise ParameterError(
            f"help matrix must be {(n, plan.total_blocks)}, got {help_matrix.shape}"
        )
    erasures = frozenset(erasures)
    if z in erasures:
        raise ParameterError("the failed node cannot also be erased")

    rows = np.zeros((plan.total_blocks, alpha), dtype=np.int64)
    flags = set()
    steps = (
        (FRACTIONAL, plan.xd, record.positions_of_kind(FRACTIONAL)),
        (FULL, d, record.positions_of_kind(FULL)),
    )
    for kind, dim, positions in steps:
        if kind == FULL and len(flags) > plan.M:
            raise DecodeFailure(
                f"{len(flags)} nodes flagged in step 1, erasure budget is M={plan.M}"
            )
        step_ers = erasures | flags | {z}
        budget = max((n - len(step_ers) - dim) // 2, 0)
        stacked = np.ascontiguousarray(help_matrix[:, positions].T)[:, :, None]
        ok, m_est = pm.batch_decode_blocks(enc, dim, stacked, step_ers, budget)
        x_full = np.zeros((len(positions), d), dtype=np.int64)
        if m_est is not None:
            x_full[ok, :dim] = m_est[ok, :, 0]
        pending = [int(i) for i in np.nonzero(~ok)[0]]
        while pending:
            still = []
            progressed = False
            for idx in pending:
                try:
                    out = rs_decode(
                        enc.code_for_dim(dim),
                        help_matrix[:, positions[idx]],
                        erasures | flags | {z},
                    )
                except DecodeFailure:
                    still.append(idx)
                    continue
                flags |= set(out.error_positions)
                x_full[idx, :dim] = out.message
                progressed = True
            if not progressed:
                raise DecodeFailure(
                    f"{len(still)} {kind} blocks undecodable during repair"
                )
            pending = still
        rows[positions] = fld.arr_add(
            x_full[:, :alpha], fld.arr_mul(int(enc.lambdas[z]), x_full[:, alpha:])
        )
    return rows, frozenset(flags)


def reconstruct_file(plan, enc, record, shares, erasures=()):
    """Recover the file: fractional blocks first (flagging), then full rate.

    shares: (n, total blocks, alpha) indexed by node and stored position.
    Returns (B_F data symbols, flagged nodes).
    """
    params = enc.params
    n, alpha, d = params.n, params.alpha, params.d
    theta = plan.total_blocks
    shares = np.asarray(shares, dtype=np.int64)
    if shares.shape != (n, theta, alpha):
        raise ParameterError(f"shares must be {(n, theta, alpha)}, got {shares.shape}")
    erasures = frozenset(erasures)

    m_all = np.zeros((theta, d, alpha), dtype=np.int64)
    flags = set()
    lowrate = plan.x <= Fraction(1, 2)
    steps = (
        (FRACTIONAL, plan.xd, record.positions_of_kind(FRACTIONAL)),
        (FULL, d, record.positions_of_kind(FULL)),
    )
    for kind, dim, positions in steps:
        step_ers = erasures | flags
        e = len(step_ers)
        if kind == FRACTIONAL and lowrate:
            radius = max((n - e - plan.xd) // 2, 0)
        else:
            radius = max((n - e - alpha - 1) // 2, 0)
        stacked = np.ascontiguousarray(shares[:, positions, :].transpose(1, 0, 2))
        ok, m_est = pm.batch_decode_blocks(enc, dim, stacked, step_ers, radius)
        if m_est is not None:
            m_all[positions[ok], :dim, :] = m_est[ok]
        pending = [int(i) for i in np.nonzero(~ok)[0]]
        while pending:
            still = []
            progressed = False
            for idx in pending:
                try:
                    s1, s2, fl = pm.reconstruct(
                        enc, kind, stacked[idx], erasures | flags,
                        x=plan.x if kind == FRACTIONAL else None,
                    )
                except DecodeFailure:
                    still.append(idx)
                    continue
                flags |= set(fl)
                m_all[int(positions[idx])] = np.vstack([s1, s2])
                progressed = True
            if not progressed:
                raise DecodeFailure(
                    f"{len(still)} {kind} blocks undecodable during read"
                )
            pending = still

    order = record.order
    full_ids = np.nonzero(order < plan.theta_h)[0]
    frac_ids = np.nonzero(order >= plan.theta_h)[0]
    m_full = m_all[full_ids[np.argsort(order[full_ids])]]
    m_frac = m_all[frac_ids[np.argsort(order[frac_ids])]]
    full_data = pm.extract_message_tensor(params, FULL, None, m_full).ravel()
    frac_data = pm.extract_message_tensor(params, FRACTIONAL, plan.x, m_frac).ravel()
    data = np.concatenate([full_data[: plan.full_symbols], frac_data])
    return data, frozenset(flags)
