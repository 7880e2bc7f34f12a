"""Little-endian binary persistence for features, projections, codes and indexes.

Layouts (all integers little-endian):

``STCF``  magic, u16 version, u64 M, u64 n, u64 seed, then M*n f64 row-major.
``STCW``  magic, u16 version, u8 kind (0 dense, 1 sparse), u64 n, u64 l,
          f64 s (0 for dense), u64 seed.  An optional payload may follow:
          dense -> n*l f64; sparse -> u64 nnz, nnz u64 rows, nnz u64 cols,
          nnz f64 values.  Without payload the matrix is regenerated from
          the header.
``STCC``  magic, u16 version, u8 kind (0 binary, 1 ternary), u64 M, u64 l,
          f64 lambda_x, then per item ceil(l/64) u64 words per plane
          (binary: one plane; ternary: pos plane then neg plane).
``STCI``  magic, u16 version, u64 M, u64 l, then LEB128 varints: for each
          position the +1 list as (count, first id, gaps...), then the same
          for all -1 lists.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .channel_model import FeatureMatrix
from .decoders import BINARY, TERNARY, EncodedDatabase, InvertedIndex
from .encoder import BinaryCode, TernaryCode, ThresholdPair, n_words
from .errors import FormatError
from .projection import DENSE, SPARSE, ProjectionMatrix, generate

VERSION = 1

_STCF = struct.Struct("<4sHQQQ")
_STCW = struct.Struct("<4sHBQQdQ")
_STCC = struct.Struct("<4sHBQQd")
_STCI = struct.Struct("<4sHQQ")

_PROJ_KINDS = {DENSE: 0, SPARSE: 1}
_CODE_KINDS = {BINARY: 0, TERNARY: 1}


def _header(buf: bytes, layout: struct.Struct, magic: bytes):
    if len(buf) < layout.size:
        raise FormatError(f"file too short for a {magic.decode()} header")
    fields = layout.unpack_from(buf)
    if fields[0] != magic:
        raise FormatError(f"bad magic {fields[0]!r}, expected {magic!r}")
    if fields[1] != VERSION:
        raise FormatError(f"unsupported {magic.decode()} version {fields[1]}")
    return fields[2:]


def _payload(buf: bytes, offset: int, dtype: str, count: int) -> np.ndarray:
    nbytes = np.dtype(dtype).itemsize * count
    if len(buf) < offset + nbytes:
        raise FormatError("truncated payload")
    return np.frombuffer(buf, dtype=dtype, count=count, offset=offset)


# -- varints ---------------------------------------------------------------

def encode_varints(values) -> bytes:
    v = np.asarray(values, dtype=np.uint64)
    if v.size == 0:
        return b""
    nbytes = np.ones(v.shape, dtype=np.int64)
    rest = v >> np.uint64(7)
    while rest.any():
        nbytes += rest > 0
        rest >>= np.uint64(7)
    width = int(nbytes.max())
    k = np.arange(width)
    chunks = ((v[:, None] >> (np.uint64(7) * k.astype(np.uint64))) & np.uint64(0x7F)).astype(np.uint8)
    chunks[k[None, :] < nbytes[:, None] - 1] |= 0x80
    return chunks[k[None, :] < nbytes[:, None]].tobytes()


def decode_varints(buf: bytes) -> np.ndarray:
    b = np.frombuffer(buf, dtype=np.uint8)
    if b.size == 0:
        return np.zeros(0, dtype=np.uint64)
    ends = (b & 0x80) == 0
    if not ends[-1]:
        raise FormatError("truncated varint stream")
    starts = np.flatnonzero(np.concatenate([[True], ends[:-1]]))
    group = np.cumsum(np.concatenate([[0], ends[:-1].astype(np.int64)]))
    shift = (np.arange(b.size) - starts[group]).astype(np.uint64) * np.uint64(7)
    if shift.size and shift.max() > 63:
        raise FormatError("varint longer than 64 bits")
    parts = (b & 0x7F).astype(np.uint64) << shift
    return np.bitwise_or.reduceat(parts, starts)


# -- STCF ------------------------------------------------------------------

def save_features(path, fm: FeatureMatrix) -> None:
    with open(path, "wb") as fh:
        fh.write(_STCF.pack(b"STCF", VERSION, fm.rows, fm.dim, fm.seed))
        fh.write(fm.values.astype("<f8").tobytes())


def load_features(path) -> FeatureMatrix:
    buf = Path(path).read_bytes()
    M, n, seed = _header(buf, _STCF, b"STCF")
    values = _payload(buf, _STCF.size, "<f8", M * n).reshape(M, n)
    return FeatureMatrix(values.copy(), seed=seed)


# -- STCW ------------------------------------------------------------------

def save_projection(path, W: ProjectionMatrix, payload: bool = False) -> None:
    # normalized matrices cannot be regenerated from the header
    payload = payload or W.normalized
    with open(path, "wb") as fh:
        fh.write(_STCW.pack(b"STCW", VERSION, _PROJ_KINDS[W.kind], W.n, W.l, W.s, W.seed))
        if not payload:
            return
        if W.kind == DENSE:
            fh.write(W.dense.astype("<f8").tobytes())
        else:
            fh.write(struct.pack("<Q", W.nnz))
            fh.write(W.rows.astype("<u8").tobytes())
            fh.write(W.cols.astype("<u8").tobytes())
            fh.write(W.vals.astype("<f8").tobytes())


def load_projection(path) -> ProjectionMatrix:
    buf = Path(path).read_bytes()
    kind_tag, n, l, s, seed = _header(buf, _STCW, b"STCW")
    kinds = {v: k for k, v in _PROJ_KINDS.items()}
    if kind_tag not in kinds:
        raise FormatError(f"unknown projection kind tag {kind_tag}")
    kind = kinds[kind_tag]
    off = _STCW.size
    if len(buf) == off:
        return generate(n, l, seed, kind=kind, s=s)
    if kind == DENSE:
        dense = _payload(buf, off, "<f8", n * l).reshape(n, l).copy()
        return ProjectionMatrix(n=n, l=l, kind=kind, seed=seed, normalized=True, dense=dense)
    (nnz,) = struct.unpack_from("<Q", buf, off)
    off += 8
    rows = _payload(buf, off, "<u8", nnz).astype(np.int64)
    cols = _payload(buf, off + 8 * nnz, "<u8", nnz).astype(np.int64)
    vals = _payload(buf, off + 16 * nnz, "<f8", nnz).copy()
    return ProjectionMatrix(n=n, l=l, kind=kind, seed=seed, s=s, normalized=True, rows=rows, cols=cols, vals=vals)


# -- STCC ------------------------------------------------------------------

def save_codes(path, db: EncodedDatabase) -> None:
    lambda_x = db.thresholds.lambda_x if db.thresholds is not None else 0.0
    with open(path, "wb") as fh:
        fh.write(_STCC.pack(b"STCC", VERSION, _CODE_KINDS[db.kind], db.M, db.l, lambda_x))
        if db.kind == BINARY:
            planes = db.codes.bits
        else:
            planes = np.concatenate([db.codes.pos, db.codes.neg], axis=1)
        fh.write(np.ascontiguousarray(planes, dtype="<u8").tobytes())


def load_codes(path) -> EncodedDatabase:
    buf = Path(path).read_bytes()
    kind_tag, M, l, lambda_x = _header(buf, _STCC, b"STCC")
    kinds = {v: k for k, v in _CODE_KINDS.items()}
    if kind_tag not in kinds:
        raise FormatError(f"unknown code kind tag {kind_tag}")
    kind = kinds[kind_tag]
    W = n_words(l)
    n_planes = 1 if kind == BINARY else 2
    words = _payload(buf, _STCC.size, "<u8", M * W * n_planes).reshape(M, n_planes * W).copy()
    if kind == BINARY:
        codes = BinaryCode(l, words)
    else:
        codes = TernaryCode(l, words[:, :W].copy(), words[:, W:].copy())
    return EncodedDatabase(kind, codes, ThresholdPair(lambda_x, lambda_x))


# -- STCI ------------------------------------------------------------------

def _list_stream(ptr: np.ndarray, ids: np.ndarray) -> np.ndarray:
    l = ptr.size - 1
    counts = np.diff(ptr)
    gaps = ids.astype(np.int64).copy()
    gaps[1:] -= ids[:-1]
    firsts = ptr[:-1][counts > 0]
    gaps[firsts] = ids[firsts]
    stream = np.empty(ids.size + l, dtype=np.int64)
    count_pos = ptr[:-1] + np.arange(l)
    mask = np.ones(stream.size, dtype=bool)
    mask[count_pos] = False
    stream[count_pos] = counts
    stream[mask] = gaps
    return stream


def save_index(path, index: InvertedIndex) -> None:
    stream = np.concatenate([_list_stream(index.pos_ptr, index.pos_ids), _list_stream(index.neg_ptr, index.neg_ids)])
    with open(path, "wb") as fh:
        fh.write(_STCI.pack(b"STCI", VERSION, index.M, index.l))
        fh.write(encode_varints(stream))


def _read_lists(values: np.ndarray, start: int, l: int):
    ptr = np.zeros(l + 1, dtype=np.int64)
    chunks = []
    p = start
    for j in range(l):
        if p >= values.size:
            raise FormatError("index stream ends early")
        c = int(values[p])
        gaps = values[p + 1:p + 1 + c].astype(np.int64)
        if gaps.size != c:
            raise FormatError("index stream ends early")
        chunks.append(np.cumsum(gaps))
        ptr[j + 1] = ptr[j] + c
        p += 1 + c
    ids = np.concatenate(chunks) if chunks else np.zeros(0, dtype=np.int64)
    return ptr, ids, p


def load_index(path) -> InvertedIndex:
    buf = Path(path).read_bytes()
    M, l = _header(buf, _STCI, b"STCI")
    values = decode_varints(buf[_STCI.size:])
    pos_ptr, pos_ids, p = _read_lists(values, 0, l)
    neg_ptr, neg_ids, p = _read_lists(values, p, l)
    if p != values.size:
        raise FormatError("trailing data after index lists")
    for ids in (pos_ids, neg_ids):
        if ids.size and (ids.min() < 0 or ids.max() >= M):
            raise FormatError("posting id out of range")
    return InvertedIndex(M, l, pos_ptr, pos_ids, neg_ptr, neg_ids)


def read_magic(path) -> bytes:
    with open(path, "rb") as fh:
        return fh.read(4)
