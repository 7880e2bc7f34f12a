"""Binary and sparse ternary encoding of projected vectors.

Codes are stored as packed 64-bit words, bit ``j`` of a code living in word
``j // 64`` at bit position ``j % 64``.  A ternary code is two disjoint bit
planes: ``pos`` marks +1 symbols and ``neg`` marks -1 symbols.

Sparsity parameters are *per sign*: ``alpha = P(X = +1) = P(X = -1)``, so the
fraction of nonzero symbols is ``2 * alpha``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel_model import ChannelSpec, q_function
from .errors import DomainError, ShapeError


def n_words(l: int) -> int:
    return (l + 63) // 64


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Pack a boolean array along its last axis into little-endian uint64 words."""
    bits = np.asarray(bits, dtype=bool)
    l = bits.shape[-1]
    pad = n_words(l) * 64 - l
    if pad:
        bits = np.concatenate([bits, np.zeros(bits.shape[:-1] + (pad,), dtype=bool)], axis=-1)
    packed = np.packbits(bits, axis=-1, bitorder="little")
    return np.ascontiguousarray(packed).view("<u8")


def unpack_bits(words: np.ndarray, l: int) -> np.ndarray:
    words = np.ascontiguousarray(words, dtype="<u8")
    return np.unpackbits(words.view(np.uint8), axis=-1, bitorder="little", count=l).astype(bool)


def tail_mask(l: int) -> np.ndarray:
    """Word mask with ones on the ``l`` valid bit positions."""
    return pack_bits(np.ones(l, dtype=bool))


@dataclass(frozen=True, eq=False)
class BinaryCode:
    """Sign code of length ``length``; bit set means +1.  ``bits`` is (W,) or (M, W)."""

    length: int
    bits: np.ndarray

    def __post_init__(self):
        if self.bits.shape[-1] != n_words(self.length):
            raise ShapeError(f"{self.bits.shape[-1]} words cannot hold a length-{self.length} code")

    def __getitem__(self, i) -> "BinaryCode":
        return BinaryCode(self.length, self.bits[i])

    @property
    def count(self) -> int:
        return 1 if self.bits.ndim == 1 else self.bits.shape[0]

    def to_signs(self) -> np.ndarray:
        return np.where(unpack_bits(self.bits, self.length), 1, -1).astype(np.int8)

    def __eq__(self, other):
        if not isinstance(other, BinaryCode):
            return NotImplemented
        return self.length == other.length and np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class TernaryCode:
    """Ternary code as two disjoint bit planes of +1 and -1 positions."""

    length: int
    pos: np.ndarray
    neg: np.ndarray

    def __post_init__(self):
        if self.pos.shape != self.neg.shape or self.pos.shape[-1] != n_words(self.length):
            raise ShapeError("pos/neg planes must share a shape matching the code length")

    def __getitem__(self, i) -> "TernaryCode":
        return TernaryCode(self.length, self.pos[i], self.neg[i])

    @property
    def count(self) -> int:
        return 1 if self.pos.ndim == 1 else self.pos.shape[0]

    def nonzero_count(self):
        c = np.bitwise_count(self.pos).sum(axis=-1) + np.bitwise_count(self.neg).sum(axis=-1)
        return int(c) if np.ndim(c) == 0 else c.astype(np.int64)

    def to_signs(self) -> np.ndarray:
        p = unpack_bits(self.pos, self.length)
        m = unpack_bits(self.neg, self.length)
        return p.astype(np.int8) - m.astype(np.int8)

    @classmethod
    def from_signs(cls, signs) -> "TernaryCode":
        signs = np.asarray(signs)
        return cls(signs.shape[-1], pack_bits(signs > 0), pack_bits(signs < 0))

    def __eq__(self, other):
        if not isinstance(other, TernaryCode):
            return NotImplemented
        return (self.length == other.length and np.array_equal(self.pos, other.pos)
                and np.array_equal(self.neg, other.neg))


@dataclass(frozen=True)
class ThresholdPair:
    lambda_x: float
    lambda_y: float

    def __post_init__(self):
        for name in ("lambda_x", "lambda_y"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise DomainError(f"{name} must be finite and >= 0, got {v}")


def binarize(v) -> BinaryCode:
    """Sign code of ``v`` (last axis); zero maps to +1."""
    v = np.asarray(v, dtype=np.float64)
    return BinaryCode(v.shape[-1], pack_bits(v >= 0))


def ternarize(v, lam: float) -> TernaryCode:
    """Threshold ``v`` to +1 (v >= lam), -1 (v <= -lam) or 0.

    With ``lam == 0`` an exact zero goes to +1, matching :func:`binarize`.
    """
    if not lam >= 0:
        raise DomainError(f"threshold must be >= 0, got {lam}")
    v = np.asarray(v, dtype=np.float64)
    pos = v >= lam
    neg = (v <= -lam) & ~pos
    return TernaryCode(v.shape[-1], pack_bits(pos), pack_bits(neg))


def _tail(lam: float, sigma: float) -> float:
    if not lam >= 0:
        raise DomainError(f"threshold must be >= 0, got {lam}")
    if math.isinf(lam):
        return 0.0
    return q_function(lam / sigma)


def alpha_of(lambda_x: float, spec: ChannelSpec) -> float:
    """Per-sign probability P(X_t = +1) = Q(lambda_x / sigma_f)."""
    return _tail(lambda_x, spec.sigma_f)


def gamma_of(lambda_y: float, spec: ChannelSpec) -> float:
    """Per-sign probability P(Y_t = +1) = Q(lambda_y / sqrt(sigma_f^2 + sigma_p^2))."""
    return _tail(lambda_y, spec.sigma_q)


def _neg_plogp(p: float) -> float:
    return 0.0 if p <= 0.0 else -p * math.log2(p)


def ternary_entropy(alpha: float) -> float:
    """Entropy in bits of a symmetric ternary symbol with per-sign probability ``alpha``."""
    if not 0.0 <= alpha <= 0.5:
        raise DomainError(f"per-sign probability must lie in [0, 0.5], got {alpha}")
    return 2.0 * _neg_plogp(alpha) + _neg_plogp(1.0 - 2.0 * alpha)


def binary_entropy_h2(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    return _neg_plogp(p) + _neg_plogp(1.0 - p)
