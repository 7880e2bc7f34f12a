"""Dense Gaussian and sparse signed random projections from R^n to R^l."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .channel_model import ChannelSpec, make_rng
from .errors import DomainError, ShapeError

DENSE = "dense_gaussian"
SPARSE = "sparse_signed"


@dataclass(frozen=True, eq=False)
class ProjectionMatrix:
    """An ``n x l`` random map.

    Dense matrices keep the full array in ``dense``; sparse ones keep
    coordinate triplets ``(rows, cols, vals)``.  Entry variance is 1/n for
    both kinds, so each column has unit squared norm in expectation.
    """

    n: int
    l: int
    kind: str
    seed: int
    s: float = 0.0
    normalized: bool = False
    dense: np.ndarray | None = None
    rows: np.ndarray | None = None
    cols: np.ndarray | None = None
    vals: np.ndarray | None = None
    _csc: sp.csc_matrix | None = field(default=None, repr=False)

    @property
    def nnz(self) -> int:
        if self.kind == DENSE:
            return self.n * self.l
        return int(self.vals.size)

    def to_dense(self) -> np.ndarray:
        if self.kind == DENSE:
            return self.dense
        out = np.zeros((self.n, self.l))
        out[self.rows, self.cols] = self.vals
        return out

    def _sparse(self) -> sp.csc_matrix:
        if self._csc is None:
            m = sp.coo_matrix((self.vals, (self.rows, self.cols)), shape=(self.n, self.l)).tocsc()
            object.__setattr__(self, "_csc", m)
        return self._csc


def _column_normalize(W: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(W, axis=0)
    norms[norms == 0] = 1.0
    return W / norms


def generate_dense(n: int, l: int, seed: int, normalize: bool = False) -> ProjectionMatrix:
    """i.i.d. N(0, 1/n) entries."""
    if n < 1 or l < 1:
        raise DomainError(f"need n, l >= 1, got n={n}, l={l}")
    W = make_rng(seed).standard_normal((n, l)) / math.sqrt(n)
    if normalize:
        W = _column_normalize(W)
    return ProjectionMatrix(n=n, l=l, kind=DENSE, seed=int(seed), normalized=normalize, dense=W)


def generate_sparse(n: int, l: int, s: float, seed: int, normalize: bool = False) -> ProjectionMatrix:
    """Entries are +sqrt(s/2n) w.p. 1/s, -sqrt(s/2n) w.p. 1/s and 0 otherwise."""
    if n < 1 or l < 1:
        raise DomainError(f"need n, l >= 1, got n={n}, l={l}")
    if not (s >= 2):
        raise DomainError(f"sparsity parameter s must be >= 2, got {s}")
    rng = make_rng(seed)
    u = rng.random((n, l))
    p = 1.0 / s
    rows, cols = np.nonzero(u < 2 * p)
    mag = math.sqrt(s / (2.0 * n))
    vals = np.where(u[rows, cols] < p, mag, -mag)
    if normalize:
        norms = np.sqrt(np.bincount(cols, weights=vals * vals, minlength=l))
        norms[norms == 0] = 1.0
        vals = vals / norms[cols]
    return ProjectionMatrix(
        n=n, l=l, kind=SPARSE, seed=int(seed), s=float(s), normalized=normalize,
        rows=rows.astype(np.int64), cols=cols.astype(np.int64), vals=vals,
    )


def generate(n: int, l: int, seed: int, kind: str = DENSE, s: float = 0.0, normalize: bool = False) -> ProjectionMatrix:
    if kind == DENSE:
        return generate_dense(n, l, seed, normalize)
    if kind == SPARSE:
        return generate_sparse(n, l, s, seed, normalize)
    raise DomainError(f"unknown projection kind {kind!r}")


def project(W: ProjectionMatrix, v) -> np.ndarray:
    """Compute ``v^T W`` for a vector of length n, or row-wise for an (M, n) batch."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != W.n or v.ndim > 2:
        raise ShapeError(f"expected trailing dimension {W.n}, got shape {v.shape}")
    if W.kind == DENSE:
        return v @ W.dense
    # (W^T v^T)^T keeps the sparse operand on the left
    return np.asarray((W._sparse().T @ v.T).T)


def projected_channel_check(W: ProjectionMatrix, spec: ChannelSpec, trials: int, seed: int = 0) -> float:
    """Empirical correlation between projected item and projected query coordinates.

    Draws enough items to collect ``trials`` coordinate pairs.
    """
    if trials < 10_000:
        raise DomainError(f"trials must be >= 1e4, got {trials}")
    items = -(-trials // W.l)
    rng = make_rng(seed)
    f = spec.sigma_f * rng.standard_normal((items, W.n))
    q = f + spec.sigma_p * rng.standard_normal((items, W.n))
    pf = project(W, f).ravel()[:trials]
    pq = project(W, q).ravel()[:trials]
    return float(np.corrcoef(pf, pq)[0, 1])
