"""Product-matrix MSR component codes: full rate and fractional rate.

Both codes sit at the d = 2k-2 MSR operating point with beta = 1 and
alpha = d/2 symbols per node per block. A block is a pair of alpha x alpha
symmetric message matrices (S1, S2); the codeword matrix is
Psi @ [S1; S2] with Psi = [Phi  Lambda*Phi]. With lambda_i = g^(i*alpha)
every row of Psi is a width-d Vandermonde row at x_i = g^i, so one
evaluation codec serves regeneration, reconstruction, and all layered
schemes built on top.

The fractional-rate variant zero-pads the message matrices down to a
data dimension x*d (match factor x), trading rate for a wider
error-correction radius.

All types are immutable after construction; block-level operations are
independent and freely parallelizable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from ratematch.rs import DecodeFailure, EvalCode, rs_decode

FULL = "full"
FRACTIONAL = "fractional"


class ParameterError(ValueError):
    """Infeasible or malformed code parameters."""


class InconsistentFlags(DecodeFailure):
    """Per-column decodes produced irreconcilable malicious-node flags."""


# ---------------------------------------------------------------------------
# parameters and operating-point evaluators


@dataclass(frozen=True)
class CodeParams:
    """{n, k, d, alpha, beta, B} plus the field; one instance per code."""

    n: int
    k: int
    d: int
    alpha: int
    beta: int
    B: int
    fld: object


def msr_params(n, d, fld):
    """Build MSR-point parameters from node count and repair degree."""
    if d < 2 or d % 2:
        raise ParameterError(f"repair degree d={d} must be even and >= 2")
    if n <= d:
        raise ParameterError(f"need n > d helpers, got n={n}, d={d}")
    alpha = d // 2
    k = alpha + 1  # d = 2k - 2
    return CodeParams(n=n, k=k, d=d, alpha=alpha, beta=1, B=alpha * (alpha + 1), fld=fld)


def mincut_bound(params):
    """Largest feasible block size under the repair min-cut bound."""
    return sum(
        min(params.alpha, (params.d - i) * params.beta) for i in range(params.k)
    )


def msr_point(B, k, d):
    """(alpha, gamma) at the minimum-storage point, exact rationals."""
    if k <= 0 or d < k:
        raise ParameterError(f"need 0 < k <= d, got k={k}, d={d}")
    return Fraction(B, k), Fraction(B * d, k * (d - k + 1))


def mbr_point(B, k, d):
    """(alpha, gamma) at the minimum-bandwidth point, exact rationals."""
    if k <= 0 or d < k:
        raise ParameterError(f"need 0 < k <= d, got k={k}, d={d}")
    denom = 2 * k * d - k * k + k
    if denom == 0:
        raise ParameterError("degenerate MBR denominator")
    return Fraction(2 * B * d, denom), Fraction(2 * B * d, denom)


# ---------------------------------------------------------------------------
# encoder state


@dataclass(frozen=True, eq=False)
class EncoderMatrices:
    """Public encoding state: Phi, Lambda, Psi and the evaluation points."""

    params: CodeParams
    points: tuple
    phi: np.ndarray
    lambdas: np.ndarray
    psi: np.ndarray
    _codes: dict = field(default_factory=dict, repr=False)
    _solvers: dict = field(default_factory=dict, repr=False)

    def code_for_dim(self, dim):
        """The (n, dim) evaluation code shared by all decode paths."""
        code = self._codes.get(dim)
        if code is None:
            code = EvalCode(self.params.fld, self.points, dim)
            self._codes[dim] = code
        return code

    def solver_for(self, dim, rows):
        """Inverse of the dim x dim Vandermonde block on the given rows."""
        key = (dim, rows)
        w = self._solvers.get(key)
        if w is None:
            fld = self.params.fld
            vand = fld.vandermonde([self.points[r] for r in rows], dim)
            w = fld.matrix_inverse(vand)
            w.flags.writeable = False
            self._solvers[key] = w
        return w


def build_encoder(params):
    """Construct Phi (Vandermonde), Lambda = diag(g^(i*alpha)), Psi.

    lambda_i = g^(i*alpha) makes Psi itself a Vandermonde matrix while
    satisfying the product-matrix independence conditions; this needs
    n <= (q-1)/gcd(alpha, q-1), checked here.
    """
    fld, n, alpha, d = params.fld, params.n, params.alpha, params.d
    qm1 = fld.order - 1
    if n > qm1:
        raise ParameterError(
            f"field too small: n={n} distinct nonzero points need q-1 >= n, q={fld.order}"
        )
    if n > qm1 // math.gcd(alpha, qm1):
        raise ParameterError(
            f"field too small: lambda_i = g^(i*alpha) collide for n={n}, "
            f"alpha={alpha}, q={fld.order}"
        )
    points = tuple(fld.powers(fld.g, n))
    psi = fld.vandermonde(points, d)
    phi = np.ascontiguousarray(psi[:, :alpha])
    lambdas = np.array([fld.pow(x, alpha) for x in points], dtype=np.int64)
    if len(set(lambdas.tolist())) != n:
        raise ParameterError("lambda values collide")
    for arr in (psi, phi, lambdas):
        arr.flags.writeable = False
    return EncoderMatrices(params=params, points=points, phi=phi, lambdas=lambdas, psi=psi)


# ---------------------------------------------------------------------------
# message blocks


def fractional_block_size(d, x):
    """Data symbols per fractional block with match factor x (Eq-style split)."""
    x = Fraction(x)
    if not 0 < x <= 1:
        raise ParameterError(f"match factor must be in (0, 1], got {x}")
    xd = x * d
    if xd.denominator != 1:
        raise ParameterError(f"x*d must be an integer, got {xd}")
    xd = int(xd)
    alpha = d // 2
    if x <= Fraction(1, 2):
        return xd * (xd + 1) // 2
    w = xd - alpha
    return alpha * (alpha + 1) // 2 + w * (w + 1) // 2


def block_size(params, kind, x=None):
    if kind == FULL:
        return params.B
    return fractional_block_size(params.d, x)


def regen_dim(params, kind, x=None):
    """Dimension of the help-symbol code: d for full rate, x*d fractional."""
    if kind == FULL:
        return params.d
    xd = Fraction(x) * params.d
    if xd.denominator != 1 or xd < 1:
        raise ParameterError(f"x*d must be a positive integer, got {xd}")
    return int(xd)


def _upper_triangle(size):
    rows, cols = [], []
    for i in range(size):
        for j in range(i, size):
            rows.append(i)
            cols.append(j)
    return np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp)


def _message_layout(params, kind, x):
    """Segments (matrix index, tri rows, tri cols) of the symbol layout."""
    alpha = params.alpha
    if kind == FULL:
        tri = _upper_triangle(alpha)
        return [(0, tri), (1, tri)]
    xd = regen_dim(params, kind, x)
    if Fraction(x) <= Fraction(1, 2):
        return [(0, _upper_triangle(xd))]
    return [(0, _upper_triangle(alpha)), (1, _upper_triangle(xd - alpha))]


def build_message_tensor(params, kind, x, data):
    """Scatter (theta, B) data symbols into (theta, d, alpha) message matrices."""
    data = np.asarray(data, dtype=np.int64)
    if data.ndim == 1:
        data = data[None, :]
    expect = block_size(params, kind, x)
    if data.shape[1] != expect:
        raise ParameterError(f"block data must be {expect} symbols, got {data.shape[1]}")
    if data.size and (int(data.min()) < 0 or int(data.max()) >= params.fld.order):
        raise ParameterError("data symbols must lie in [0, field order)")
    out = np.zeros((data.shape[0], params.d, params.alpha), dtype=np.int64)
    off = 0
    for mat, (rows, cols) in _message_layout(params, kind, x):
        seg = data[:, off : off + len(rows)]
        base = mat * params.alpha
        out[:, base + rows, cols] = seg
        out[:, base + cols, rows] = seg
        off += len(rows)
    return out


def extract_message_tensor(params, kind, x, m_tensor):
    """Gather the data symbols back out of (theta, d, alpha) message matrices."""
    m_tensor = np.asarray(m_tensor, dtype=np.int64)
    segments = []
    for mat, (rows, cols) in _message_layout(params, kind, x):
        base = mat * params.alpha
        segments.append(m_tensor[:, base + rows, cols])
    return np.concatenate(segments, axis=1)


@dataclass(frozen=True)
class MessageBlock:
    """One block of data arranged into the symmetric matrices S1, S2."""

    kind: str
    x: Fraction | None
    s1: np.ndarray
    s2: np.ndarray

    @property
    def matrix(self):
        return np.vstack([self.s1, self.s2])


def make_message_block(params, kind, symbols, x=None):
    m = build_message_tensor(params, kind, x, np.asarray(symbols, dtype=np.int64))[0]
    s1 = np.ascontiguousarray(m[: params.alpha])
    s2 = np.ascontiguousarray(m[params.alpha :])
    s1.flags.writeable = False
    s2.flags.writeable = False
    return MessageBlock(kind=kind, x=None if x is None else Fraction(x), s1=s1, s2=s2)


def block_to_symbols(params, block):
    return extract_message_tensor(params, block.kind, block.x, block.matrix[None])[0]


# ---------------------------------------------------------------------------
# encoding and repair traffic


@dataclass(frozen=True)
class ShareMatrix:
    """The n x alpha codeword matrix of one block; row i lives on node i."""

    rows: np.ndarray
    kind: str
    x: Fraction | None
    block_id: int = 0


def encode_block(enc, block, block_id=0):
    rows = enc.params.fld.matmul(enc.psi, block.matrix)
    rows.flags.writeable = False
    return ShareMatrix(rows=rows, kind=block.kind, x=block.x, block_id=block_id)


def encode_message_tensor(enc, m_tensor):
    """Batched encode: (theta, d, alpha) messages -> (theta, n, alpha) shares."""
    return enc.params.fld.matmul(enc.psi, np.asarray(m_tensor, dtype=np.int64))


def help_symbol(enc, share_row, z):
    """Helper node contribution p_i = ch_i . phi_z for repairing node z."""
    return enc.params.fld.dot(np.asarray(share_row, dtype=np.int64), enc.phi[z])


def help_vector(enc, shares, z):
    """All helpers' symbols at once: shares (..., n, alpha) -> (..., n)."""
    fld = enc.params.fld
    col = enc.phi[z][:, None]
    out = fld.matmul(np.asarray(shares, dtype=np.int64), col)
    return out[..., 0]


# ---------------------------------------------------------------------------
# regeneration


def row_from_help_message(enc, message, z):
    """Turn the decoded help-code message M . phi_z^T into node z's row.

    Uses the symmetry of S1 and S2: ch_z = (S1 phi_z^T)^T + lambda_z
    (S2 phi_z^T)^T. message may be shorter than d (fractional codes);
    missing coefficients are zero.
    """
    params = enc.params
    fld = params.fld
    x_full = np.zeros(params.d, dtype=np.int64)
    x_full[: len(message)] = message
    return fld.arr_add(
        x_full[: params.alpha],
        fld.arr_mul(int(enc.lambdas[z]), x_full[params.alpha :]),
    )


def regenerate(enc, dim, received, z, erasures=()):
    """Repair node z from helper symbols.

    received: length-n vector of help symbols (entry z is ignored).
    dim: d for the full-rate code, x*d for a fractional code.
    Returns (row of node z, flagged helper nodes). Succeeds whenever
    2*errors + |erasures| <= (n-1) - dim.
    """
    outcome = rs_decode(enc.code_for_dim(dim), received, set(erasures) | {z})
    return row_from_help_message(enc, outcome.message, z), outcome.error_positions


# ---------------------------------------------------------------------------
# reconstruction


def _iterate_columns(enc, code, columns, erasures, min_successes):
    """Decode columns with monotone flag accumulation until a fixed point.

    columns: mapping key -> (received column, extra erasures for that key).
    Returns (outcomes, flags). Raises DecodeFailure if fewer than
    min_successes columns ever decode.
    """
    n = enc.params.n
    flags = set()
    outcomes = {}
    pending = set(columns)
    for _ in range(2 * n + 2):
        new_flags = set()
        progressed = False
        for key in sorted(pending):
            col, extra = columns[key]
            ers = erasures | flags | extra
            if n - len(ers) < code.k:
                continue
            try:
                out = rs_decode(code, col, ers)
            except DecodeFailure:
                continue
            outcomes[key] = out
            new_flags |= out.error_positions
            progressed = True
        pending -= outcomes.keys()
        if new_flags - flags:
            flags |= new_flags
        elif not progressed:
            break
        if not pending:
            break
    if len(outcomes) < min_successes:
        raise DecodeFailure(
            f"only {len(outcomes)} of {len(columns)} columns decodable "
            f"(needed {min_successes})"
        )
    return outcomes, flags


def _reconstruct_lowrate(enc, xd, received, erasures):
    """Match factor x <= 0.5: every stored column is an (n, xd) codeword."""
    params = enc.params
    alpha = params.alpha
    code = enc.code_for_dim(xd)
    columns = {c: (received[:, c], frozenset()) for c in range(alpha)}
    outcomes, flags = _iterate_columns(enc, code, columns, frozenset(erasures), alpha)
    if len(outcomes) < alpha:
        raise DecodeFailure("undecodable columns remain")
    s1 = np.zeros((alpha, alpha), dtype=np.int64)
    for c in range(alpha):
        msg = outcomes[c].message
        if c < xd:
            s1[:xd, c] = msg
        elif any(msg):
            raise InconsistentFlags(f"zero-padded column {c} decoded to data")
    if not np.array_equal(s1, s1.T):
        raise InconsistentFlags("recovered S1 is not symmetric")
    return s1, np.zeros_like(s1), frozenset(flags)


def _reconstruct_highrate(enc, kind, x, received, erasures):
    """Full rate and x > 0.5: pairwise solves on R'Phi^T, then column codes."""
    params = enc.params
    fld = params.fld
    n, alpha = params.n, params.alpha
    erasures = frozenset(erasures)

    rhat = fld.matmul(received, enc.phi.T)
    lam = enc.lambdas
    denom = fld.arr_sub(lam[:, None], lam[None, :])
    np.fill_diagonal(denom, 1)
    weights = fld.arr_inv(denom)
    np.fill_diagonal(weights, 0)
    d_hat = fld.arr_mul(fld.arr_sub(rhat, rhat.T), weights)
    c_hat = fld.arr_sub(rhat, fld.arr_mul(lam[:, None], d_hat))

    code = enc.code_for_dim(alpha)
    columns = {}
    for j in range(n):
        columns[(0, j)] = (c_hat[:, j], frozenset({j}))
        columns[(1, j)] = (d_hat[:, j], frozenset({j}))
    outcomes, flags = _iterate_columns(enc, code, columns, erasures, 2 * alpha)

    mats = []
    for m in (0, 1):
        js = sorted(j for (mm, j) in outcomes if mm == m)[:alpha]
        if len(js) < alpha:
            raise DecodeFailure("too few decodable columns to solve the message")
        xs = [enc.points[j] for j in js]
        shat = np.array([outcomes[(m, j)].message for j in js], dtype=np.int64).T
        s = np.zeros((alpha, alpha), dtype=np.int64)
        for r in range(alpha):
            coeffs = fld.interpolate(xs, [int(v) for v in shat[r]])
            s[r, : len(coeffs)] = coeffs
        if not np.array_equal(s, s.T):
            raise InconsistentFlags("recovered message matrix is not symmetric")
        mats.append(s)
    s1, s2 = mats

    if kind == FRACTIONAL:
        w = regen_dim(params, kind, x) - alpha
        padded = s2.copy()
        padded[:w, :w] = 0
        if padded.any():
            raise InconsistentFlags("zero padding of S2 violated")

    reenc = fld.matmul(enc.psi, np.vstack([s1, s2]))
    mismatch = {
        i
        for i in range(n)
        if i not in erasures and not np.array_equal(reenc[i], received[i])
    }
    if not mismatch <= flags:
        raise InconsistentFlags("re-encode mismatch outside flagged nodes")
    return s1, s2, frozenset(flags)


def reconstruct(enc, kind, received, erasures=(), x=None):
    """Recover (S1, S2) of one block from all n stored rows.

    received: n x alpha matrix (rows at erased positions are ignored).
    Returns (S1, S2, flagged nodes). Tolerates floor((n-alpha-1)/2)
    malicious rows for the full-rate code and x > 0.5 fractional codes,
    floor((n-xd)/2) for x <= 0.5 fractional codes.
    """
    received = np.asarray(received, dtype=np.int64)
    if received.shape != (enc.params.n, enc.params.alpha):
        raise ParameterError(f"received must be n x alpha, got {received.shape}")
    if kind == FRACTIONAL and Fraction(x) <= Fraction(1, 2):
        return _reconstruct_lowrate(enc, regen_dim(enc.params, kind, x), received, erasures)
    return _reconstruct_highrate(enc, kind, x, received, erasures)


# ---------------------------------------------------------------------------
# batched optimistic decoding (shared by the layered schemes)


def batch_decode_blocks(enc, dim, received, erasures=frozenset(), max_errors=0):
    """Optimistic no-error decode of many blocks at once.

    received: (theta, n, w) stacked columns, each column an (n, dim)
    codeword. Solves each block from the first dim non-erased rows and
    re-encode-verifies against every non-erased row. Sound as long as at
    most max_errors unflagged corrupt rows remain and
    max_errors <= (n - |erasures|) - dim; otherwise reports nothing ok.

    Returns (ok mask (theta,), messages (theta, dim, w) or None).
    """
    params = enc.params
    n = params.n
    avail = [i for i in range(n) if i not in erasures]
    if len(avail) < dim or max_errors > len(avail) - dim:
        return np.zeros(received.shape[0], dtype=bool), None
    fld = params.fld
    rows = tuple(avail[:dim])
    solver = enc.solver_for(dim, rows)
    received = np.asarray(received, dtype=np.int64)
    m_est = fld.matmul(solver, np.ascontiguousarray(received[:, rows, :]))
    reenc = fld.matmul(fld.vandermonde([enc.points[i] for i in avail], dim), m_est)
    ok = np.all(reenc == received[:, avail, :], axis=(1, 2))
    return ok, m_est
