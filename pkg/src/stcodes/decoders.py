"""Exhaustive and inverted-index decoders over encoded databases, plus exact l2 search."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .channel_model import ChannelSpec, FeatureMatrix
from .encoder import (
    BinaryCode, TernaryCode, ThresholdPair, binarize, tail_mask, ternarize, unpack_bits,
)
from .errors import DomainError, ShapeError, StcWarning
from .info_theory import TransitionMatrix, VotingConstants, log_likelihood_table

BINARY = "binary"
TERNARY = "ternary"


@dataclass(frozen=True, eq=False)
class EncodedDatabase:
    kind: str
    codes: BinaryCode | TernaryCode
    thresholds: ThresholdPair | None = None
    spec: ChannelSpec | None = None

    def __post_init__(self):
        expected = BinaryCode if self.kind == BINARY else TernaryCode if self.kind == TERNARY else None
        if expected is None:
            raise DomainError(f"unknown code kind {self.kind!r}")
        if not isinstance(self.codes, expected):
            raise ShapeError(f"{self.kind} database needs {expected.__name__} codes")
        planes = self.codes.bits if self.kind == BINARY else self.codes.pos
        if planes.ndim != 2 or planes.shape[0] < 1:
            raise ShapeError("database needs a 2-d stack of at least one code")

    @property
    def M(self) -> int:
        return self.codes.count

    @property
    def l(self) -> int:
        return self.codes.length


def encode_database(projected, kind: str, lambda_x: float = 0.0,
                    thresholds: ThresholdPair | None = None, spec: ChannelSpec | None = None) -> EncodedDatabase:
    """Encode an (M, l) array of projected items."""
    projected = np.atleast_2d(np.asarray(projected, dtype=np.float64))
    if thresholds is not None:
        lambda_x = thresholds.lambda_x
    codes = binarize(projected) if kind == BINARY else ternarize(projected, lambda_x)
    return EncodedDatabase(kind, codes, thresholds, spec)


@dataclass(frozen=True, eq=False)
class DecodeResult:
    best_id: int
    score: float
    top_k: list
    scanned_postings: int
    scores: np.ndarray = field(repr=False, default=None)


def _top_k(scores: np.ndarray, k: int) -> list[tuple[int, float]]:
    """Highest ``k`` scores, ties broken by ascending id."""
    M = scores.size
    if k >= M:
        order = np.argsort(-scores, kind="stable")
    else:
        kth = np.partition(scores, M - k)[M - k]
        cand = np.flatnonzero(scores >= kth)
        order = cand[np.argsort(-scores[cand], kind="stable")][:k]
    return [(int(i), float(scores[i])) for i in order[:k]]


def _result(scores: np.ndarray, k: int, scanned: int) -> DecodeResult:
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    if k > scores.size:
        warnings.warn(f"k={k} exceeds database size {scores.size}; clamped", StcWarning, stacklevel=3)
        k = scores.size
    top = _top_k(scores, k)
    return DecodeResult(best_id=top[0][0], score=top[0][1], top_k=top, scanned_postings=scanned, scores=scores)


def hamming_decode(y: BinaryCode, db: EncodedDatabase, k: int = 1) -> DecodeResult:
    """Minimum normalized Hamming distance; score is ``1 - D_H``."""
    if db.kind != BINARY or not isinstance(y, BinaryCode):
        raise ShapeError("hamming_decode needs a binary query and database")
    if y.length != db.l or y.bits.ndim != 1:
        raise ShapeError(f"query length {y.length} does not match database length {db.l}")
    dist = np.bitwise_count(db.codes.bits ^ y.bits).sum(axis=1, dtype=np.int64)
    scores = 1.0 - dist / db.l
    return _result(scores, k, db.M * db.l)


def _planes(code: TernaryCode) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    zero = ~(code.pos | code.neg) & tail_mask(code.length)
    return code.pos, zero, code.neg


def ml_decode(y: TernaryCode, db: EncodedDatabase, P: TransitionMatrix, k: int = 1) -> DecodeResult:
    """Exhaustive maximum-likelihood scan using all nine transition log-probabilities."""
    if db.kind != TERNARY or not isinstance(y, TernaryCode):
        raise ShapeError("ml_decode needs a ternary query and database")
    if y.length != db.l or y.pos.ndim != 1:
        raise ShapeError(f"query length {y.length} does not match database length {db.l}")
    table = log_likelihood_table(P)
    xp = _planes(db.codes)
    yp = _planes(y)
    terms = []
    for a in range(3):
        for b in range(3):
            count = np.bitwise_count(xp[a] & yp[b]).sum(axis=1, dtype=np.int64)
            terms.append(count * table[a, b])
    scores = np.sum(terms, axis=0)
    return _result(scores, k, db.M * db.l)


@dataclass(frozen=True, eq=False)
class InvertedIndex:
    """Per-position posting lists in CSR layout.

    Items holding +1 at position ``j`` are ``pos_ids[pos_ptr[j]:pos_ptr[j+1]]``
    in ascending order; likewise for -1 with the ``neg_*`` arrays.
    """

    M: int
    l: int
    pos_ptr: np.ndarray
    pos_ids: np.ndarray
    neg_ptr: np.ndarray
    neg_ids: np.ndarray

    def postings(self, j: int, sign: int) -> np.ndarray:
        ptr, ids = (self.pos_ptr, self.pos_ids) if sign > 0 else (self.neg_ptr, self.neg_ids)
        return ids[ptr[j]:ptr[j + 1]]

    @property
    def total_postings(self) -> int:
        return int(self.pos_ids.size + self.neg_ids.size)

    def to_codes(self) -> TernaryCode:
        """Rebuild the indexed codes."""
        signs = np.zeros((self.M, self.l), dtype=np.int8)
        for ptr, ids, s in ((self.pos_ptr, self.pos_ids, 1), (self.neg_ptr, self.neg_ids, -1)):
            cols = np.repeat(np.arange(self.l), np.diff(ptr))
            signs[ids, cols] = s
        return TernaryCode.from_signs(signs)


def _plane_postings(plane: np.ndarray, l: int) -> tuple[np.ndarray, np.ndarray]:
    M = plane.shape[0]
    ids_parts = []
    counts = np.zeros(l, dtype=np.int64)
    for w in range(plane.shape[1]):
        width = min(64, l - 64 * w)
        block = unpack_bits(plane[:, w:w + 1], width)  # (M, width)
        j_local, i = np.nonzero(block.T)
        ids_parts.append(i)
        counts[64 * w:64 * w + width] = np.bincount(j_local, minlength=width)
    ptr = np.zeros(l + 1, dtype=np.int64)
    np.cumsum(counts, out=ptr[1:])
    ids = np.concatenate(ids_parts).astype(np.int64) if ids_parts else np.zeros(0, np.int64)
    assert ids.size == ptr[-1] and (M == 0 or ids.size == 0 or ids.max() < M)
    return ptr, ids


def build_index(db: EncodedDatabase) -> InvertedIndex:
    if db.kind != TERNARY:
        raise ShapeError("only ternary databases can be indexed")
    pos_ptr, pos_ids = _plane_postings(db.codes.pos, db.l)
    neg_ptr, neg_ids = _plane_postings(db.codes.neg, db.l)
    return InvertedIndex(db.M, db.l, pos_ptr, pos_ids, neg_ptr, neg_ids)


def _gather(ptr: np.ndarray, ids: np.ndarray, js: np.ndarray) -> np.ndarray:
    """Concatenate the posting lists of positions ``js``."""
    starts = ptr[js]
    lens = ptr[js + 1] - starts
    total = int(lens.sum())
    if total == 0:
        return ids[:0]
    offsets = np.repeat(starts - np.cumsum(lens) + lens, lens)
    return ids[offsets + np.arange(total)]


def sublinear_decode(y: TernaryCode, index: InvertedIndex, v: VotingConstants, k: int = 1) -> DecodeResult:
    """Voting over the posting lists of the query's nonzero positions.

    Same-sign postings add ``nu``, opposite-sign postings add ``nu_prime``;
    zero query positions are never visited.
    """
    if index.M == 0:
        raise ShapeError("cannot decode against an empty index")
    if y.length != index.l or y.pos.ndim != 1:
        raise ShapeError(f"query length {y.length} does not match index length {index.l}")
    signs = y.to_signs()
    pj = np.flatnonzero(signs > 0)
    nj = np.flatnonzero(signs < 0)
    match = np.concatenate([_gather(index.pos_ptr, index.pos_ids, pj), _gather(index.neg_ptr, index.neg_ids, nj)])
    mismatch = np.concatenate([_gather(index.neg_ptr, index.neg_ids, pj), _gather(index.pos_ptr, index.pos_ids, nj)])
    scores = (np.bincount(match, minlength=index.M) * v.nu
              + np.bincount(mismatch, minlength=index.M) * v.nu_prime)
    return _result(scores, k, int(match.size + mismatch.size))


def _features(features) -> np.ndarray:
    return features.values if isinstance(features, FeatureMatrix) else np.atleast_2d(np.asarray(features, dtype=np.float64))


def exact_nn(q, features) -> int:
    """Index of the row nearest to ``q`` in l2; ties go to the smallest id."""
    F = _features(features)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (F.shape[1],):
        raise ShapeError(f"query shape {q.shape} does not match feature dimension {F.shape[1]}")
    return int(np.argmin(((F - q) ** 2).sum(axis=1)))


def nn_list(q, features, epsilon: float) -> list[int]:
    """All ids within l2 distance ``epsilon * n`` of ``q``, ascending."""
    if not epsilon > 0:
        raise DomainError(f"epsilon must be positive, got {epsilon}")
    F = _features(features)
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (F.shape[1],):
        raise ShapeError(f"query shape {q.shape} does not match feature dimension {F.shape[1]}")
    dist = np.sqrt(((F - q) ** 2).sum(axis=1))
    return np.flatnonzero(dist <= epsilon * F.shape[1]).tolist()
