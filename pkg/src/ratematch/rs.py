"""Generalized Reed-Solomon codec over arbitrary evaluation points.

Codewords are evaluations of polynomials of degree < K at N distinct
nonzero points. Decoding is Gao-style: interpolate the non-erased
coordinates, run a partial extended Euclid, divide out the error locator.
It corrects every pattern with 2*errors + erasures <= N - K, reports the
exact error positions, and verifies each result by re-encoding; anything
else raises DecodeFailure. Shortened codes are expressed by erasing the
missing coordinates rather than by separate code objects.

Codec objects are immutable; decode calls are reentrant.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class DecodeFailure(Exception):
    """No codeword within the guaranteed errors-and-erasures radius."""


@dataclass(frozen=True)
class EvalCode:
    """An (N, K) evaluation code over `fld` at `points`."""

    fld: object
    points: tuple
    k: int

    def __post_init__(self):
        n = len(self.points)
        if not 1 <= self.k <= n:
            raise ValueError(f"dimension {self.k} out of range for length {n}")
        seen = set()
        for x in self.points:
            if x == 0:
                raise ValueError("evaluation points must be nonzero")
            if x in seen:
                raise ValueError("evaluation points must be distinct")
            seen.add(x)

    @property
    def n(self):
        return len(self.points)

    def max_errors(self, erasure_count=0):
        """Largest t with 2t + erasures <= N - K."""
        return (self.n - self.k - erasure_count) // 2


@dataclass(frozen=True)
class DecodeOutcome:
    codeword: tuple
    message: tuple
    error_positions: frozenset = field(default_factory=frozenset)
    erasure_positions: frozenset = field(default_factory=frozenset)


def rs_encode(code, message):
    """Evaluate the degree-<K message polynomial at every point."""
    if len(message) != code.k:
        raise ValueError(f"message length {len(message)} != K={code.k}")
    return code.fld.poly_eval(list(message), list(code.points))


def rs_decode(code, received, erasures=()):
    """Joint errors-and-erasures decode.

    received: N symbols (entries at erased positions are ignored).
    erasures: positions known a priori to be unreliable.

    Returns a DecodeOutcome whenever some codeword satisfies
    2*errors + |erasures| <= N - K; raises DecodeFailure otherwise.
    """
    fld = code.fld
    n, k = code.n, code.k
    if len(received) != n:
        raise ValueError(f"received length {len(received)} != N={n}")
    erasures = frozenset(erasures)
    if any(not 0 <= e < n for e in erasures):
        raise ValueError("erasure position out of range")
    if len(erasures) > n - k:
        raise DecodeFailure(
            f"{len(erasures)} erasures exceed the budget N-K={n - k}"
        )
    keep = [i for i in range(n) if i not in erasures]
    xs = [code.points[i] for i in keep]
    ys = [int(received[i]) % fld.order for i in keep]
    np_ = len(keep)

    g0 = fld.poly_from_roots(xs)
    g1 = fld.interpolate(xs, ys)
    dstop = (np_ + k + 1) // 2
    v, r = fld.gao_reduce(g0, g1, dstop)
    if not v:
        raise DecodeFailure("degenerate locator")
    f, rem = fld.poly_divmod(r, v)
    if rem or len(f) > k:
        raise DecodeFailure("no codeword within the guaranteed radius")

    codeword = fld.poly_eval(f, list(code.points))
    errors = frozenset(i for i in keep if codeword[i] != int(received[i]) % fld.order)
    if 2 * len(errors) > np_ - k:
        # re-encode check: the candidate is outside the certified radius
        raise DecodeFailure("re-encode verification failed")
    message = tuple(f) + (0,) * (k - len(f))
    return DecodeOutcome(tuple(codeword), message, errors, erasures)
