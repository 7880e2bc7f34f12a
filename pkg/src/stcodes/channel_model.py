"""Gaussian source and additive-noise query channel.

Database items are i.i.d. N(0, sigma_f^2) vectors; a query is an enrolled item
plus i.i.d. N(0, sigma_p^2) noise.  All sampling goes through numpy's PCG64
bit generator seeded from a 64-bit integer, so results are reproducible
bit-for-bit within this implementation.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import CapacityError, DomainError, ShapeError

_SQRT2 = math.sqrt(2.0)


def make_rng(seed, *tags: int) -> np.random.Generator:
    """PCG64 generator for ``seed``, optionally split into an independent substream by ``tags``."""
    if tags:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, tags)])))
    return np.random.Generator(np.random.PCG64(int(seed)))


def q_function(u):
    """Upper tail probability of the standard normal, ``P(Z > u)``.

    Accepts scalars or arrays; scalars come back as ``float``.
    """
    arr = np.asarray(u, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"q_function requires finite input, got {u!r}")
    out = 0.5 * erfc(arr / _SQRT2)
    return float(out) if out.ndim == 0 else out


def norm_cdf(x):
    """Standard normal CDF; infinities allowed."""
    out = 0.5 * erfc(-np.asarray(x, dtype=np.float64) / _SQRT2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ChannelSpec:
    """Source and noise standard deviations of the query channel."""

    sigma_f: float = 1.0
    sigma_p: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.sigma_f) and self.sigma_f > 0):
            raise DomainError(f"sigma_f must be positive and finite, got {self.sigma_f}")
        if not (math.isfinite(self.sigma_p) and self.sigma_p >= 0):
            raise DomainError(f"sigma_p must be non-negative and finite, got {self.sigma_p}")

    @classmethod
    def from_snr_db(cls, snr_db: float, sigma_f: float = 1.0) -> "ChannelSpec":
        if snr_db == math.inf:
            return cls(sigma_f, 0.0)
        return cls(sigma_f, sigma_f * 10.0 ** (-snr_db / 20.0))

    @property
    def sigma_q(self) -> float:
        """Standard deviation of a query coordinate, sqrt(sigma_f^2 + sigma_p^2)."""
        return math.hypot(self.sigma_f, self.sigma_p)

    @property
    def rho(self) -> float:
        return self.sigma_f / self.sigma_q

    @property
    def snr_db(self) -> float:
        if self.sigma_p == 0:
            return math.inf
        return 10.0 * math.log10(self.sigma_f**2 / self.sigma_p**2)


def rho(spec: ChannelSpec) -> float:
    """Correlation between an item coordinate and its query coordinate."""
    return spec.rho


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """``M`` real feature vectors of dimension ``n``, stored as an (M, n) float64 array."""

    values: np.ndarray
    seed: int = 0

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1 or v.shape[1] < 1:
            raise ShapeError(f"feature matrix must be 2-d with M, n >= 1, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def __len__(self) -> int:
        return self.rows

    def __eq__(self, other):
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return self.seed == other.seed and np.array_equal(self.values, other.values)


def _check_capacity(count: int, itemsize: int = 8) -> None:
    if count * itemsize > sys.maxsize:
        raise CapacityError(f"{count} elements of {itemsize} bytes exceed the addressable size")


def sample_database(spec: ChannelSpec, n: int, M: int, seed: int) -> FeatureMatrix:
    """Draw ``M`` items with ``n`` i.i.d. N(0, sigma_f^2) entries each."""
    if n < 1 or M < 1:
        raise DomainError(f"need n >= 1 and M >= 1, got n={n}, M={M}")
    _check_capacity(int(n) * int(M))
    rng = make_rng(seed)
    values = rng.standard_normal((int(M), int(n)))
    values *= spec.sigma_f
    return FeatureMatrix(values, seed=int(seed))


def sample_query(item, spec: ChannelSpec, seed: int) -> np.ndarray:
    """Return ``item`` plus i.i.d. N(0, sigma_p^2) noise.

    ``item`` may also be a 2-d batch of items; every entry gets its own noise.
    """
    item = np.asarray(item, dtype=np.float64)
    if item.size < 1:
        raise ShapeError("item must have dimension >= 1")
    if spec.sigma_p == 0:
        return item.copy()
    noise = make_rng(seed).standard_normal(item.shape)
    return item + spec.sigma_p * noise
