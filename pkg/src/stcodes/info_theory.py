"""Equivalent discrete channels of the encoded data and their information measures.

Symbols are ordered ``(+1, 0, -1)`` along both axes of every 3x3 table.
Entropies and mutual informations are in bits; voting constants and
log-likelihoods use natural logarithms.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .bvn import bivariate_rect_prob
from .channel_model import ChannelSpec
from .encoder import ThresholdPair, alpha_of, binary_entropy_h2, gamma_of, ternary_entropy
from .errors import ConfigError, DomainError, StcWarning

SYMBOLS = (1, 0, -1)
PROB_FLOOR = 1e-12
UNDEFINED_BELOW = 1e-15

LAMBDA_X_STEPS = 61
LAMBDA_Y_STEPS = 301
GRID_SPAN = 3.0  # in units of the relevant standard deviation


@dataclass(frozen=True, eq=False)
class TransitionMatrix:
    """Conditional probabilities ``p[x, y] = P(Y = y | X = x)``.

    Rows whose x-marginal is below 1e-15 are undefined: ``defined[row]`` is
    False and the row is filled with zeros.
    """

    p: np.ndarray
    defined: np.ndarray
    x_marginal: np.ndarray

    def __getitem__(self, xy):
        return self.p[xy]

    def require_rows(self, *rows: int) -> None:
        missing = [SYMBOLS[r] for r in rows if not self.defined[r]]
        if missing:
            raise ConfigError(f"transition rows for x in {missing} are undefined")


@dataclass(frozen=True)
class CodingGainReport:
    lambda_x: float
    lambda_y: float
    alpha: float
    gamma: float
    h_x: float
    h_y: float
    h_xy: float
    mi: float
    gain: float
    gamma_marginal: float


@dataclass(frozen=True)
class VotingConstants:
    nu: float
    nu_prime: float
    nu_zero: float


def _bounds(t):
    """Standardized intervals for symbols +1, 0, -1 at threshold(s) ``t``."""
    t = np.asarray(t, dtype=np.float64)
    lo = np.stack([t, -t, np.full_like(t, -np.inf)], axis=-1)
    hi = np.stack([np.full_like(t, np.inf), t, -t], axis=-1)
    return lo, hi


def _joint_tables(a: float, b, rho: float) -> np.ndarray:
    """Joint probabilities P(X = x, Y = y), shape (len(b), 3, 3), for standardized thresholds."""
    b = np.atleast_1d(np.asarray(b, dtype=np.float64))
    xlo, xhi = _bounds(a)
    ylo, yhi = _bounds(b)  # (K, 3)
    K = b.size
    a1 = np.broadcast_to(xlo[None, :, None], (K, 3, 3))
    b1 = np.broadcast_to(xhi[None, :, None], (K, 3, 3))
    a2 = np.broadcast_to(ylo[:, None, :], (K, 3, 3))
    b2 = np.broadcast_to(yhi[:, None, :], (K, 3, 3))
    return bivariate_rect_prob(a1, b1, a2, b2, rho)


def _conditional(joint: np.ndarray):
    marg = joint.sum(axis=-1)
    defined = marg >= UNDEFINED_BELOW
    safe = np.where(defined, marg, 1.0)
    p = np.where(defined[..., None], joint / safe[..., None], 0.0)
    return p, defined, marg


def transition_matrix(thresholds: ThresholdPair, spec: ChannelSpec) -> TransitionMatrix:
    """Ternary channel between ``X_t`` (item code) and ``Y_t`` (query code)."""
    joint = _joint_tables(thresholds.lambda_x / spec.sigma_f, thresholds.lambda_y / spec.sigma_q, spec.rho)[0]
    p, defined, marg = _conditional(joint)
    return TransitionMatrix(p=p, defined=defined, x_marginal=marg)


def binary_flip_prob(spec: ChannelSpec) -> float:
    return math.acos(min(1.0, spec.rho)) / math.pi


def binary_mi(spec: ChannelSpec) -> float:
    return 1.0 - binary_entropy_h2(binary_flip_prob(spec))


def _neg_plogp2(p):
    p = np.asarray(p, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)


def _mi_batch(lambda_x: float, lambda_ys, spec: ChannelSpec):
    """Vectorized ternary information measures over a list of query thresholds."""
    lambda_ys = np.atleast_1d(np.asarray(lambda_ys, dtype=np.float64))
    if lambda_x < 0 or np.any(lambda_ys < 0):
        raise DomainError("thresholds must be non-negative")
    alpha = alpha_of(lambda_x, spec)
    gammas = np.array([gamma_of(float(ly), spec) for ly in lambda_ys])
    joint = _joint_tables(lambda_x / spec.sigma_f, lambda_ys / spec.sigma_q, spec.rho)
    P, _, _ = _conditional(joint)
    zero = 1.0 - 2.0 * alpha
    gamma_marg = alpha * (P[:, 0, 0] + P[:, 0, 2]) + zero * P[:, 1, 0]
    h_x = ternary_entropy(alpha)
    h_y = np.array([ternary_entropy(g) for g in gammas])
    h_xy = (
        2 * _neg_plogp2(alpha * P[:, 0, 0])
        + 2 * _neg_plogp2(alpha * P[:, 0, 1])
        + 2 * _neg_plogp2(alpha * P[:, 0, 2])
        + 2 * _neg_plogp2(zero * P[:, 1, 0])
        + _neg_plogp2(zero * P[:, 1, 1])
    )
    mi = np.clip(h_x + h_y - h_xy, 0.0, np.minimum(h_x, h_y))
    gain = mi / h_x if h_x > 0 else np.zeros_like(mi)
    return alpha, gammas, gamma_marg, h_x, h_y, h_xy, mi, gain


def _report(batch, lambda_x, lambda_ys, i) -> CodingGainReport:
    alpha, gammas, gamma_marg, h_x, h_y, h_xy, mi, gain = batch
    return CodingGainReport(
        lambda_x=float(lambda_x), lambda_y=float(lambda_ys[i]), alpha=float(alpha),
        gamma=float(gammas[i]), h_x=float(h_x), h_y=float(h_y[i]), h_xy=float(h_xy[i]),
        mi=float(mi[i]), gain=float(gain[i]), gamma_marginal=float(gamma_marg[i]),
    )


def ternary_mi(thresholds: ThresholdPair, spec: ChannelSpec) -> CodingGainReport:
    """Entropies, mutual information and coding gain of the ternary channel."""
    ly = np.array([thresholds.lambda_y])
    return _report(_mi_batch(thresholds.lambda_x, ly, spec), thresholds.lambda_x, ly, 0)


def default_lambda_x_grid(spec: ChannelSpec, steps: int = LAMBDA_X_STEPS) -> np.ndarray:
    return np.linspace(0.0, GRID_SPAN * spec.sigma_f, steps)


def default_lambda_y_grid(spec: ChannelSpec) -> tuple[float, float, int]:
    return 0.0, GRID_SPAN * spec.sigma_q, LAMBDA_Y_STEPS


def optimize_lambda_y(lambda_x: float, spec: ChannelSpec, grid=None) -> tuple[float, CodingGainReport]:
    """Grid search for the query threshold maximizing the ternary mutual information.

    ``grid`` is ``(lo, hi, steps)``; ties go to the smallest threshold.
    """
    lo, hi, steps = grid if grid is not None else default_lambda_y_grid(spec)
    if steps < 2 or not (0 <= lo < hi):
        raise DomainError(f"bad lambda_y grid {(lo, hi, steps)}")
    lambda_ys = np.linspace(lo, hi, int(steps))
    batch = _mi_batch(lambda_x, lambda_ys, spec)
    best = int(np.argmax(batch[6]))  # first occurrence wins ties
    report = _report(batch, lambda_x, lambda_ys, best)
    return report.lambda_y, report


def mi_over_grid(lambda_x: float, spec: ChannelSpec, lambda_ys) -> np.ndarray:
    """Ternary mutual information for every query threshold in ``lambda_ys``."""
    return _mi_batch(lambda_x, lambda_ys, spec)[6]


def matched_lengths(l_b: int, h_ternary: float) -> int:
    """Ternary length carrying the same entropy as ``l_b`` one-bit binary symbols (round half up)."""
    if not h_ternary > 0:
        raise DomainError(f"ternary entropy must be positive, got {h_ternary}")
    return int(math.floor(l_b / h_ternary + 0.5))


def _clamped(p: float) -> float:
    if p < PROB_FLOOR:
        warnings.warn(f"probability {p:.3g} clamped to {PROB_FLOOR:g} before log", StcWarning, stacklevel=3)
        return PROB_FLOOR
    return p


def voting_constants(P: TransitionMatrix, alpha: float) -> VotingConstants:
    """Scores for sign match, sign mismatch and the bias absorbing skipped zero transitions."""
    P.require_rows(0, 1)
    p_pp = _clamped(P.p[0, 0])
    p_pz = _clamped(P.p[0, 1])
    p_pm = _clamped(P.p[0, 2])
    p_zp = _clamped(P.p[1, 0])
    p_zz = _clamped(P.p[1, 1])
    nu_zero = -(
        2 * alpha * p_pz * math.log(p_pz)
        + (1 - 2 * alpha) * (2 * p_zp * math.log(p_zp) + p_zz * math.log(p_zz))
    )
    return VotingConstants(nu=nu_zero + math.log(p_pp), nu_prime=nu_zero + math.log(p_pm), nu_zero=nu_zero)


def log_likelihood_table(P: TransitionMatrix) -> np.ndarray:
    """Natural-log transition table with probabilities clamped at 1e-12."""
    P.require_rows(0, 1, 2)
    if np.any(P.p < PROB_FLOOR):
        warnings.warn(f"transition probabilities clamped to {PROB_FLOOR:g} before log", StcWarning, stacklevel=2)
    return np.log(np.maximum(P.p, PROB_FLOOR))
