"""On-disk format for stored shares.

A store directory holds one share file per node plus a secure-server
record file. Share-file headers are versioned, fixed-layout little-endian
structs that round-trip bit-exactly; bodies are the node's rows, block
major, at the field's fixed symbol width.

The 2-layer permutation seed deliberately lives only in the record file:
a storage node's share carries no marker distinguishing fractional from
full-rate columns.
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass

import numpy as np

from ratematch import hostile_net as hn
from ratematch import m_layer as ml
from ratematch import product_matrix as pm
from ratematch import two_layer as tl
from ratematch.galois import make_field

MAGIC = b"RMSF"
VERSION = 1


class StoreFormatError(Exception):
    """A share or record file is malformed or inconsistent."""

_SCHEME_TAGS = {hn.PLAIN: 1, hn.TWO_LAYER: 2, hn.M_LAYER: 3}
_TAG_SCHEMES = {v: k for k, v in _SCHEME_TAGS.items()}

_COMMON = struct.Struct("<4sHBBQQHHHIQQ")
_EXTRA_TWO_LAYER = struct.Struct("<HIIdd")
_EXTRA_M_LAYER = struct.Struct("<HI")

_RECORD_M_LAYER = struct.Struct("<4sHHI")
_RECORD_PLAIN = struct.Struct("<4sH")


@dataclass(frozen=True)
class ShareHeader:
    scheme: str
    width: int
    q: int
    g: int
    n: int
    node: int
    d: int
    blocks: int
    byte_len: int
    sym_len: int
    extra: tuple

    def pack(self):
        head = _COMMON.pack(
            MAGIC, VERSION, _SCHEME_TAGS[self.scheme], self.width, self.q,
            self.g, self.n, self.node, self.d, self.blocks, self.byte_len,
            self.sym_len,
        )
        if self.scheme == hn.TWO_LAYER:
            return head + _EXTRA_TWO_LAYER.pack(*self.extra)
        if self.scheme == hn.M_LAYER:
            return head + _EXTRA_M_LAYER.pack(*self.extra)
        return head

    @classmethod
    def unpack(cls, fp):
        raw = fp.read(_COMMON.size)
        if len(raw) != _COMMON.size:
            raise StoreFormatError("truncated share file header")
        magic, version, tag, width, q, g, n, node, d, blocks, byte_len, sym_len = (
            _COMMON.unpack(raw)
        )
        if magic != MAGIC:
            raise StoreFormatError("not a share file")
        if version != VERSION:
            raise StoreFormatError(f"unsupported share file version {version}")
        scheme = _TAG_SCHEMES.get(tag)
        if scheme is None:
            raise StoreFormatError(f"unknown scheme tag {tag}")
        if scheme == hn.TWO_LAYER:
            extra = _EXTRA_TWO_LAYER.unpack(fp.read(_EXTRA_TWO_LAYER.size))
        elif scheme == hn.M_LAYER:
            extra = _EXTRA_M_LAYER.unpack(fp.read(_EXTRA_M_LAYER.size))
        else:
            extra = ()
        return cls(
            scheme=scheme, width=width, q=q, g=g, n=n, node=node, d=d,
            blocks=blocks, byte_len=byte_len, sym_len=sym_len, extra=extra,
        )


def node_path(directory, node):
    return os.path.join(directory, f"node_{node:04d}.rmsf")


def record_path(directory):
    return os.path.join(directory, "record.bin")


def bytes_to_symbols(fld, payload):
    """Fixed-width little-endian chunking, zero-padded to a whole symbol."""
    width = fld.symbol_width
    pad = (-len(payload)) % width
    return fld.bytes_to_symbols(payload + b"\x00" * pad)


def symbols_to_bytes(fld, symbols, byte_len):
    return fld.symbols_to_bytes(symbols)[:byte_len]


def _header_for(store, node, byte_len):
    fld = store.enc.params.fld
    if store.scheme == hn.TWO_LAYER:
        plan = store.plan
        extra = (plan.M, plan.theta_l, plan.theta_h, plan.P, plan.P_det)
    elif store.scheme == hn.M_LAYER:
        extra = (store.lattice.m, store.lattice.rho)
    else:
        extra = ()
    return ShareHeader(
        scheme=store.scheme, width=fld.symbol_width, q=fld.order, g=fld.g,
        n=store.n, node=node, d=store.enc.params.d, blocks=store.blocks,
        byte_len=byte_len, sym_len=store.sym_len, extra=extra,
    )


def write_node(directory, store, byte_len, node, rows):
    """Write (or rewrite, after a repair) one node's share file."""
    fld = store.enc.params.fld
    path = node_path(directory, node)
    with open(path, "wb") as fp:
        fp.write(_header_for(store, node, byte_len).pack())
        fp.write(fld.symbols_to_bytes(rows))
    return path


def write_store(directory, store, byte_len):
    """Write n share files and the secure-server record file."""
    os.makedirs(directory, exist_ok=True)
    if store.scheme == hn.TWO_LAYER:
        record_blob = store.record.to_bytes()
    elif store.scheme == hn.M_LAYER:
        record_blob = _RECORD_M_LAYER.pack(b"RMML", 1, store.lattice.m, store.lattice.rho)
    else:
        record_blob = _RECORD_PLAIN.pack(b"RMPL", 1)
    paths = [
        write_node(directory, store, byte_len, node, store.shares[node])
        for node in range(store.n)
    ]
    with open(record_path(directory), "wb") as fp:
        fp.write(record_blob)
    return paths


def load_store(directory):
    """Reassemble a StoredFile bundle from a store directory.

    The original data is not on disk, so the returned bundle has
    data=None; reads report success when decoding completes.
    Returns (store, byte_len).
    """
    first = None
    rows = {}
    node = 0
    while os.path.exists(node_path(directory, node)):
        with open(node_path(directory, node), "rb") as fp:
            header = ShareHeader.unpack(fp)
            body = fp.read()
        if first is None:
            first = header
        elif header.pack()[:6] != first.pack()[:6] or header.blocks != first.blocks:
            raise StoreFormatError("share files disagree on the store layout")
        if header.node != node:
            raise StoreFormatError(f"share file {node} carries node id {header.node}")
        fld = make_field(header.q, header.g)
        syms = fld.bytes_to_symbols(body)
        alpha = header.d // 2
        if syms.size != header.blocks * alpha:
            raise StoreFormatError(f"share body of node {node} has the wrong size")
        rows[node] = syms.reshape(header.blocks, alpha)
        node += 1
    if first is None:
        raise FileNotFoundError(f"no share files in {directory}")
    if node != first.n:
        raise StoreFormatError(f"expected {first.n} share files, found {node}")

    fld = make_field(first.q, first.g)
    params = pm.msr_params(first.n, first.d, fld)
    enc = pm.build_encoder(params)
    shares = np.stack([rows[i] for i in range(first.n)])
    shares.flags.writeable = False

    with open(record_path(directory), "rb") as fp:
        record_blob = fp.read()

    if first.scheme == hn.TWO_LAYER:
        record = tl.PermutationRecord.from_bytes(record_blob)
        plan = record.plan
        m_, theta_l, theta_h, p_, p_det = first.extra
        if (plan.M, plan.theta_l, plan.theta_h) != (m_, theta_l, theta_h):
            raise StoreFormatError("record file disagrees with the share headers")
        store = hn.StoredFile(
            scheme=hn.TWO_LAYER, enc=enc, shares=shares, data=None,
            plan=plan, record=record, sym_len=first.sym_len,
        )
    elif first.scheme == hn.M_LAYER:
        magic, version, m_, rho = _RECORD_M_LAYER.unpack(record_blob)
        if magic != b"RMML" or version != 1:
            raise StoreFormatError("bad m-layer record file")
        lattice = ml.plan_lattice(first.blocks, m_, rho)
        store = hn.StoredFile(
            scheme=hn.M_LAYER, enc=enc, shares=shares, data=None,
            lattice=lattice, sym_len=first.sym_len,
        )
    else:
        lattice = ml.plan_lattice(first.blocks, 1)
        store = hn.StoredFile(
            scheme=hn.PLAIN, enc=enc, shares=shares, data=None,
            lattice=lattice, sym_len=first.sym_len,
        )
    return store, first.byte_len
