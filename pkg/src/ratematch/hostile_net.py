"""Deterministic in-process simulation of a hostile storage network.

Roles: the secure server encodes and places shares (store_* helpers), a
replacement node repairs a failed node (fail_and_repair), the data
collector reads the file back (read_file). A Byzantine adversary controls
up to tau nodes; each response symbol from a compromised node is replaced
by x + e with probability P, where e is uniform over the nonzero field
elements. Honest nodes always answer verbatim.

Everything is message passing inside one process and fully deterministic
given the seeds: identical seeds and configs give identical traces,
reports, and recovered bytes. Each trial is independent; a Network
instance belongs to one trial.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from ratematch import m_layer as ml
from ratematch import product_matrix as pm
from ratematch import two_layer as tl
from ratematch.product_matrix import FRACTIONAL, FULL, ParameterError
from ratematch.rs import DecodeFailure

STRATEGIES = ("uniform", "fractional-only", "full-only", "layer-targeted")

TWO_LAYER = "two_layer"
M_LAYER = "m_layer"
PLAIN = "plain"


@dataclass(frozen=True)
class AdversaryConfig:
    """Which nodes are compromised and how they tamper.

    The non-uniform strategies assume the adversary somehow learned the
    block layout (the permutation or the lattice), which the design denies
    it; they exist to test exactly that assumption and require
    knows_layout=True.
    """

    compromised: frozenset
    tamper_probability: float
    seed: int = 0
    strategy: str = "uniform"
    layer_onsets: Optional[Mapping] = None
    knows_layout: bool = False

    def __post_init__(self):
        object.__setattr__(self, "compromised", frozenset(self.compromised))
        if not 0.0 <= self.tamper_probability <= 1.0:
            raise ParameterError("tamper probability must be in [0, 1]")
        if self.strategy not in STRATEGIES:
            raise ParameterError(f"unknown strategy {self.strategy!r}")
        if self.strategy != "uniform" and not self.knows_layout:
            raise ParameterError(
                f"strategy {self.strategy!r} needs layout knowledge; "
                "set knows_layout=True to grant it"
            )
        if self.strategy == "layer-targeted" and self.layer_onsets is None:
            raise ParameterError("layer-targeted strategy needs layer_onsets")


def honest_adversary(seed=0):
    return AdversaryConfig(compromised=frozenset(), tamper_probability=0.0, seed=seed)


# ---------------------------------------------------------------------------
# stored-file bundles (the secure server's view)


@dataclass
class StoredFile:
    """Ground truth of one stored file plus the scheme state to decode it.

    data is None for stores loaded back from disk (the original file is
    not stored); sym_len still records the true file length in symbols.
    """

    scheme: str
    enc: pm.EncoderMatrices
    shares: np.ndarray  # (n, blocks, alpha)
    data: Optional[np.ndarray]  # original file symbols, if known
    plan: Optional[tl.TwoLayerPlan] = None
    record: Optional[tl.PermutationRecord] = None
    lattice: Optional[ml.Lattice] = None
    sym_len: Optional[int] = None

    def __post_init__(self):
        if self.data is not None:
            self.sym_len = len(self.data)

    @property
    def n(self):
        return self.enc.params.n

    @property
    def blocks(self):
        return self.shares.shape[1]


def store_two_layer(plan, enc, data, seed):
    shares, record = tl.encode_file(data, plan, enc, seed)
    return StoredFile(
        scheme=TWO_LAYER, enc=enc, shares=shares,
        data=np.asarray(data, dtype=np.int64), plan=plan, record=record,
    )


def store_m_layer(enc, data, m, rho=None):
    shares, theta = ml.encode_file(enc, data)
    lattice = ml.plan_lattice(theta, m, rho)
    return StoredFile(
        scheme=M_LAYER, enc=enc, shares=shares,
        data=np.asarray(data, dtype=np.int64), lattice=lattice,
    )


def store_plain(enc, data):
    """Single full-rate code, blocks decoded independently (the baseline)."""
    shares, theta = ml.encode_file(enc, data)
    lattice = ml.plan_lattice(theta, 1)
    return StoredFile(
        scheme=PLAIN, enc=enc, shares=shares,
        data=np.asarray(data, dtype=np.int64), lattice=lattice,
    )


# ---------------------------------------------------------------------------
# the network


class Network:
    """One trial's view of the storage nodes, honest and compromised."""

    def __init__(self, store, adversary, trial=0, record_trace=True):
        if len(adversary.compromised) > store.n:
            raise ParameterError("adversary cannot exceed the node count")
        if any(not 0 <= i < store.n for i in adversary.compromised):
            raise ParameterError("compromised node index out of range")
        if adversary.knows_layout and adversary.strategy in (
            "fractional-only", "full-only"
        ) and store.record is None:
            raise ParameterError(f"{adversary.strategy} targets a 2-layer store")
        if adversary.strategy == "layer-targeted" and store.lattice is None:
            raise ParameterError("layer-targeted targets an m-layer store")
        self.store = store
        self.adversary = adversary
        self.trial = trial
        self.record_trace = record_trace
        self.trace = []

    def _targets(self, node):
        """Boolean mask over block positions this node is willing to hit."""
        store = self.store
        adv = self.adversary
        mask = np.ones(store.blocks, dtype=bool)
        if adv.strategy == "fractional-only":
            mask[:] = False
            mask[store.record.positions_of_kind(FRACTIONAL)] = True
        elif adv.strategy == "full-only":
            mask[:] = False
            mask[store.record.positions_of_kind(FULL)] = True
        elif adv.strategy == "layer-targeted":
            onset = adv.layer_onsets.get(node)
            if onset is None:
                mask[:] = False
            else:
                layers = np.arange(store.blocks) % store.lattice.m
                mask = layers >= onset
        return mask

    def _tamper(self, values, action, stream, exclude=()):
        """Additive nonzero corruption of a (n, blocks, ...) response array."""
        adv = self.adversary
        out = values.copy()
        fld = self.store.enc.params.fld
        rng = np.random.default_rng([adv.seed, self.trial, *stream])
        for node in sorted(adv.compromised):
            if node in exclude:
                continue
            targets = self._targets(node)
            shape = out[node].shape
            fire = rng.random(shape) < adv.tamper_probability
            fire &= targets.reshape((-1,) + (1,) * (len(shape) - 1))
            if fire.any():
                errs = rng.integers(1, fld.order, size=int(fire.sum()), dtype=np.int64)
                flat = out[node].reshape(-1)
                idx = np.nonzero(fire.reshape(-1))[0]
                flat[idx] = fld.arr_add(flat[idx], errs)
            if self.record_trace:
                hit_blocks = (
                    fire.reshape(shape[0], -1).any(axis=1)
                    if fire.ndim > 1
                    else fire
                )
                for b in range(self.store.blocks):
                    self.trace.append(
                        (self.trial, node, b, action, bool(hit_blocks[b]))
                    )
        return out

    def query_help(self, z, helpers):
        """Help symbols p_i = c_i . phi_z from each queried helper (n, blocks).

        Rows outside `helpers` (and row z) are left untampered; callers
        treat them as erasures anyway.
        """
        store = self.store
        p_true = pm.help_vector(
            store.enc, store.shares.transpose(1, 0, 2), z
        ).T  # (n, blocks)
        silent = {i for i in range(store.n) if i not in helpers}
        return self._tamper(p_true, "help", stream=(0, z), exclude=silent | {z})

    def query_shares(self):
        """Every node's stored rows, tampered per strategy (n, blocks, alpha)."""
        return self._tamper(self.store.shares, "share", stream=(1,))

    def export_trace(self, fp):
        """Line-delimited {trial, node, block, action, tampered} records."""
        close = False
        if isinstance(fp, (str, bytes)):
            fp = open(fp, "w", encoding="utf-8")
            close = True
        try:
            for trial, node, block, action, tampered in self.trace:
                fp.write(
                    json.dumps(
                        {
                            "trial": trial,
                            "node": node,
                            "block": block,
                            "action": action,
                            "tampered": tampered,
                        }
                    )
                    + "\n"
                )
        finally:
            if close:
                fp.close()


def spawn_network(store, adversary, trial=0, record_trace=True):
    """Wire a stored file to an adversary; deterministic given the seeds."""
    return Network(store, adversary, trial=trial, record_trace=record_trace)


# ---------------------------------------------------------------------------
# repair / read drivers


@dataclass(frozen=True)
class RepairReport:
    scheme: str
    success: bool
    flagged: frozenset
    true_positives: int
    false_positives: int
    downloaded_symbols: int
    wall_time_s: float
    failure: Optional[str] = None

    def summary(self):
        state = "ok" if self.success else f"FAILED ({self.failure})"
        return (
            f"{self.scheme}: {state}; flagged={sorted(self.flagged)} "
            f"(tp={self.true_positives}, fp={self.false_positives}); "
            f"downloaded={self.downloaded_symbols} symbols; "
            f"wall={self.wall_time_s:.3f}s"
        )


def _report(net, success, flagged, downloaded, started, failure=None):
    compromised = net.adversary.compromised
    flagged = frozenset(flagged)
    return RepairReport(
        scheme=net.store.scheme,
        success=bool(success),
        flagged=flagged,
        true_positives=len(flagged & compromised),
        false_positives=len(flagged - compromised),
        downloaded_symbols=int(downloaded),
        wall_time_s=time.perf_counter() - started,
        failure=failure,
    )


def fail_and_repair(net, z):
    """Simulate node z failing and being regenerated; oracle-checked.

    With no adversary configured the replacement node contacts only d
    helpers (the minimum-bandwidth repair, gamma = d*beta per block);
    under attack it contacts all n-1 survivors for correction headroom.
    Failures are reported, not raised.
    """
    store = net.store
    n = store.n
    d = store.enc.params.d
    if not 0 <= z < n:
        raise ParameterError(f"node {z} out of range")
    started = time.perf_counter()
    if net.adversary.compromised:
        helpers = [i for i in range(n) if i != z]
    else:
        helpers = [i for i in range(n) if i != z][:d]
    silent = frozenset(i for i in range(n) if i != z and i not in helpers)
    responses = net.query_help(z, frozenset(helpers))
    downloaded = len(helpers) * store.blocks

    try:
        if store.scheme == TWO_LAYER:
            record = store.record.clone()
            try:
                rows, flags = tl.regenerate_node(
                    store.plan, store.enc, record, responses, z, erasures=silent
                )
            finally:
                record.drop()  # the replacement node forgets the permutation
        else:
            propagate = store.scheme == M_LAYER
            rows, flags = ml.regenerate_node(
                store.enc, store.lattice, responses, z,
                erasures=silent, propagate_flags=propagate,
            )
    except ml.LayeredDecodeFailure as exc:
        return _report(net, False, exc.flags, downloaded, started, failure=str(exc))
    except DecodeFailure as exc:
        return _report(net, False, frozenset(), downloaded, started, failure=str(exc))
    success = np.array_equal(rows, store.shares[z])
    return _report(
        net, success, flags, downloaded, started,
        failure=None if success else "regenerated row differs from ground truth",
    )


def read_file(net):
    """Simulate the data collector reading the file; oracle-checked.

    Returns (report, recovered symbols or None).
    """
    store = net.store
    started = time.perf_counter()
    responses = net.query_shares()
    downloaded = responses.size

    try:
        if store.scheme == TWO_LAYER:
            data, flags = tl.reconstruct_file(
                store.plan, store.enc, store.record, responses
            )
        else:
            propagate = store.scheme == M_LAYER
            data, flags = ml.reconstruct_file(
                store.enc, store.lattice, responses, store.sym_len,
                propagate_flags=propagate,
            )
    except ml.LayeredDecodeFailure as exc:
        return _report(net, False, exc.flags, downloaded, started, str(exc)), None
    except DecodeFailure as exc:
        return _report(net, False, frozenset(), downloaded, started, str(exc)), None
    success = store.data is None or np.array_equal(data, store.data)
    report = _report(
        net, success, flags, downloaded, started,
        failure=None if success else "recovered data differs from ground truth",
    )
    return report, data


# ---------------------------------------------------------------------------
# Monte Carlo detection experiments


def detection_event_rate(P, theta_l, M, trials, seed):
    """Direct Bernoulli Monte Carlo of the all-nodes-detected event."""
    if trials < 1:
        raise ParameterError("need at least one trial")
    if M == 0:
        return 1.0
    if theta_l == 0:
        return 0.0
    rng = np.random.default_rng(seed)
    fires = rng.random((trials, M, theta_l)) < P
    return float(fires.any(axis=2).all(axis=1).mean())


@dataclass(frozen=True)
class MonteCarloResult:
    trials: int
    detection_rate: float
    repair_success_rate: float
    predicted_detection: float
    required_detection: float

    def summary(self):
        return (
            f"trials={self.trials}; detection={self.detection_rate:.6f} "
            f"(closed form {self.predicted_detection:.6f}, "
            f"required {self.required_detection:.6f}); "
            f"repair success={self.repair_success_rate:.6f}"
        )


def monte_carlo_detection(plan, trials, seed, fld, data=None):
    """Simulated repairs under the plan's (P, M): detection and success rates.

    Detection is the event that every compromised node tampered with at
    least one fractional-block help symbol; success is an exact repair.
    The store is built once; each trial draws its own failed node,
    compromised set, and tamper pattern.
    """
    if trials < 1:
        raise ParameterError("need at least one trial")
    enc = tl.build_plan_encoder(plan, fld)
    rng = np.random.default_rng([seed, 0xD])
    if data is None:
        data = rng.integers(0, fld.order, size=plan.B_F, dtype=np.int64)
    store = store_two_layer(plan, enc, data, seed=int(rng.integers(0, 2**63)))
    frac_positions = set(
        int(p) for p in store.record.positions_of_kind(FRACTIONAL)
    )

    detected = 0
    succeeded = 0
    for t in range(trials):
        trial_rng = np.random.default_rng([seed, 1, t])
        z = int(trial_rng.integers(0, plan.n))
        others = [i for i in range(plan.n) if i != z]
        compromised = frozenset(
            int(i) for i in trial_rng.choice(others, size=plan.M, replace=False)
        )
        adv = AdversaryConfig(
            compromised=compromised, tamper_probability=plan.P, seed=seed + 2,
        )
        net = spawn_network(store, adv, trial=t, record_trace=True)
        report = fail_and_repair(net, z)
        succeeded += report.success
        hit = {
            node
            for (_, node, block, action, tampered) in net.trace
            if tampered and action == "help" and block in frac_positions
        }
        detected += compromised <= hit
    return MonteCarloResult(
        trials=trials,
        detection_rate=detected / trials,
        repair_success_rate=succeeded / trials,
        predicted_detection=tl.detection_probability(plan.P, plan.theta_l, plan.M),
        required_detection=plan.P_det,
    )
