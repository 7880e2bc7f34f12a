"""Entropy-matched coding-gain sweeps and closed-set identification benchmarks."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import projection
from .channel_model import ChannelSpec, make_rng, sample_database
from .decoders import build_index, encode_database, hamming_decode, sublinear_decode, TERNARY, BINARY
from .encoder import ThresholdPair, binarize, ternarize
from .errors import CapacityError, DomainError
from .info_theory import (
    LAMBDA_X_STEPS, LAMBDA_Y_STEPS, GRID_SPAN, binary_mi, matched_lengths, optimize_lambda_y,
    ternary_mi, transition_matrix, voting_constants,
)

log = logging.getLogger(__name__)

GAIN_COLUMNS = (
    "snr_db", "lambda_x", "lambda_y_star", "alpha", "gamma", "h_x_bits", "mi_bits", "gain",
    "l_t_matched", "scaled_mi_ternary", "scaled_mi_binary",
)
IDENTIFY_COLUMNS = (
    "scheme", "snr_db", "lambda_x", "lambda_y", "l", "memory_bits", "complexity_ratio_analytic",
    "complexity_ratio_measured", "p_correct", "ci_halfwidth", "decode_wall_time_s",
)


@dataclass
class ExperimentConfig:
    """Knobs for both experiments.

    Thresholds (``lambda_x_grid``, ``lambda_x_values``, ``ident_lambda_x``) are given in units of
    ``sigma_f``.  ``sigma_p``, when set, replaces ``snr_db_list`` with a single
    channel.  ``fixed_lambda_y`` (in units of the query standard deviation)
    skips the query-threshold search.
    """

    n: int = 500
    M: int = 10_000
    snr_db_list: tuple = (-5.0, 0.0, 5.0)
    l_b: int = 256
    lambda_x_grid: tuple = (0.0, GRID_SPAN, LAMBDA_X_STEPS)
    lambda_x_values: tuple | None = None
    lambda_y_steps: int = LAMBDA_Y_STEPS
    fixed_lambda_y: float | None = None
    ident_lambda_x: tuple = (1.0, 1.5, 2.0)
    trials: int = 2000
    seed: int = 0
    projection_kind: str = projection.DENSE
    s: float = 0.0
    k: int = 1
    sigma_f: float = 1.0
    sigma_p: float | None = None
    memory_cap_bytes: int = 4 << 30
    timing: bool = True

    def __post_init__(self):
        self.snr_db_list = tuple(float(x) for x in self.snr_db_list)
        self.lambda_x_grid = tuple(self.lambda_x_grid)
        self.ident_lambda_x = tuple(float(x) for x in self.ident_lambda_x)
        if self.lambda_x_values is not None:
            self.lambda_x_values = tuple(float(x) for x in self.lambda_x_values)
        if any(x < 0 for x in (self.lambda_x_values or ()) + self.ident_lambda_x):
            raise DomainError("thresholds must be non-negative")
        if self.projection_kind == projection.SPARSE and self.s < 2:
            raise DomainError("sparse projections need s >= 2")
        if self.trials < 1 or self.M < 2 or self.n < 1 or self.l_b < 1:
            raise DomainError("need trials >= 1, M >= 2, n >= 1 and l_b >= 1")
        lo, hi, steps = self.lambda_x_grid
        if int(steps) < 1 or lo < 0 or hi < lo:
            raise DomainError(f"bad lambda_x grid {self.lambda_x_grid}")

    def channels(self) -> list[tuple[float, ChannelSpec]]:
        if self.sigma_p is not None:
            spec = ChannelSpec(self.sigma_f, self.sigma_p)
            return [(spec.snr_db, spec)]
        return [(snr, ChannelSpec.from_snr_db(snr, self.sigma_f)) for snr in self.snr_db_list]

    def lambda_xs(self) -> np.ndarray:
        if self.lambda_x_values is not None:
            return np.asarray(self.lambda_x_values, dtype=np.float64) * self.sigma_f
        lo, hi, steps = self.lambda_x_grid
        return np.linspace(lo, hi, int(steps)) * self.sigma_f

    def to_dict(self) -> dict:
        return asdict(self)


def _query_threshold(lambda_x: float, spec: ChannelSpec, config: ExperimentConfig):
    if config.fixed_lambda_y is not None:
        report = ternary_mi(ThresholdPair(lambda_x, config.fixed_lambda_y * spec.sigma_q), spec)
        return report.lambda_y, report
    return optimize_lambda_y(lambda_x, spec, (0.0, GRID_SPAN * spec.sigma_q, config.lambda_y_steps))


def run_gain_sweep(config: ExperimentConfig) -> list[dict]:
    """One row per (SNR, lambda_x): best query threshold and entropy-matched MIs."""
    rows = []
    for snr, spec in config.channels():
        mi_b = binary_mi(spec)
        for lx in config.lambda_xs():
            ly, rep = _query_threshold(float(lx), spec, config)
            l_t = matched_lengths(config.l_b, rep.h_x)
            rows.append({
                "snr_db": snr, "lambda_x": float(lx), "lambda_y_star": ly, "alpha": rep.alpha,
                "gamma": rep.gamma, "h_x_bits": rep.h_x, "mi_bits": rep.mi, "gain": rep.gain,
                "l_t_matched": l_t, "scaled_mi_ternary": l_t * rep.mi, "scaled_mi_binary": config.l_b * mi_b,
            })
    return rows


def complexity_ratio(scheme: str, l: int, alpha: float, gamma: float, n: int) -> float:
    """Decoder work per item relative to ``n``: ``l/n`` for binary, ``4*alpha*gamma*l/n`` for ternary."""
    if scheme == BINARY:
        return l / n
    if scheme == TERNARY:
        if not (0 < alpha <= 0.5 and 0 < gamma <= 0.5):
            raise DomainError("per-sign probabilities must lie in (0, 0.5]")
        return 4.0 * alpha * gamma * l / n
    raise DomainError(f"unknown scheme {scheme!r}")


def memory_bits(l: int, h_per_symbol: float) -> float:
    if h_per_symbol < 0:
        raise DomainError("entropy must be non-negative")
    return l * h_per_symbol


def ci_halfwidth(trials: int) -> float:
    """Worst-case 95% binomial half-width, 1.96 * sqrt(0.25 / trials)."""
    return 1.96 * math.sqrt(0.25 / trials)


@dataclass
class TradeoffPoint:
    scheme: str
    snr_db: float
    lambda_x: float
    lambda_y: float
    l: int
    memory_bits: float
    complexity_ratio: float
    complexity_ratio_measured: float
    p_correct: float
    ci_halfwidth: float
    wall_time: float
    extra: dict = field(default_factory=dict, repr=False)

    def row(self) -> dict:
        return {
            "scheme": self.scheme, "snr_db": self.snr_db, "lambda_x": self.lambda_x,
            "lambda_y": self.lambda_y, "l": self.l, "memory_bits": self.memory_bits,
            "complexity_ratio_analytic": self.complexity_ratio,
            "complexity_ratio_measured": self.complexity_ratio_measured,
            "p_correct": self.p_correct, "ci_halfwidth": self.ci_halfwidth,
            "decode_wall_time_s": self.wall_time,
        }


@dataclass
class _Plan:
    snr: float
    spec: ChannelSpec
    lambda_x: float
    lambda_y: float
    l_t: int
    s_t: float
    alpha: float
    gamma: float
    h_x: float


def _ternary_s(config: ExperimentConfig, l_t: int) -> float:
    """Sparsity parameter giving the ternary projection the binary one's nonzero budget."""
    if config.projection_kind == projection.SPARSE:
        return max(2.0, config.s * l_t / config.l_b)
    # dense binary projection costs n*l_b; sparse ternary costs 2*n*l_t/s
    return max(2.0, 2.0 * l_t / config.l_b)


def _plans(config: ExperimentConfig) -> list[_Plan]:
    plans = []
    for snr, spec in config.channels():
        for lx in config.ident_lambda_x:
            lam = lx * spec.sigma_f
            ly, rep = _query_threshold(lam, spec, config)
            l_t = matched_lengths(config.l_b, rep.h_x)
            plans.append(_Plan(snr, spec, lam, ly, l_t, _ternary_s(config, l_t), rep.alpha, rep.gamma, rep.h_x))
    return plans


def estimate_bytes(config: ExperimentConfig, plans: list[_Plan]) -> dict:
    """Rough peak allocation of :func:`run_identification`."""
    l_max = max([config.l_b] + [p.l_t for p in plans])
    nnz_max = max([config.n * config.l_b] + [2 * config.n * p.l_t / p.s_t for p in plans])
    est = {
        "features": 8 * config.M * config.n,
        "projected": 8 * config.M * l_max,
        "projection": 24 * int(nnz_max),
        "generation": 8 * config.n * l_max,
        "queries": 8 * config.trials * (config.n + l_max),
        "index": 8 * max([2 * p.alpha * p.l_t * config.M for p in plans] + [0]),
    }
    est["total"] = int(sum(est.values()))
    return est


def sizing_report(config: ExperimentConfig) -> dict:
    return estimate_bytes(config, _plans(config))


def _decode_all(decode, queries_codes, truth) -> tuple[int, int, float]:
    hits = 0
    scanned = 0
    t0 = time.perf_counter()
    for i, code in enumerate(queries_codes):
        res = decode(code)
        hits += res.best_id == truth[i]
        scanned += res.scanned_postings
    return hits, scanned, time.perf_counter() - t0


def _trial_queries(config: ExperimentConfig, features: np.ndarray, spec: ChannelSpec):
    ids = np.empty(config.trials, dtype=np.int64)
    noise = np.empty((config.trials, config.n))
    for t in range(config.trials):
        rng = make_rng(config.seed, 1, t)
        ids[t] = rng.integers(config.M)
        noise[t] = rng.standard_normal(config.n)
    return ids, features[ids] + spec.sigma_p * noise


def run_identification(config: ExperimentConfig) -> list[TradeoffPoint]:
    """Closed-set identification: binary Hamming scan vs. ternary inverted-index voting at equal memory."""
    plans = _plans(config)
    est = estimate_bytes(config, plans)
    if est["total"] > config.memory_cap_bytes:
        raise CapacityError(f"estimated {est['total']} bytes exceed cap {config.memory_cap_bytes}: {est}")

    base = ChannelSpec(config.sigma_f, 0.0)
    features = sample_database(base, config.n, config.M, config.seed).values
    W_b = projection.generate(config.n, config.l_b, make_seed(config.seed, 2), config.projection_kind, config.s)
    db_b = encode_database(projection.project(W_b, features), BINARY)
    ci = ci_halfwidth(config.trials)
    points = []

    for snr, spec in config.channels():
        truth, queries = _trial_queries(config, features, spec)
        q_b = binarize(projection.project(W_b, queries))
        hits, _, wall = _decode_all(lambda c: hamming_decode(c, db_b, config.k), (q_b[i] for i in range(config.trials)), truth)
        points.append(TradeoffPoint(
            BINARY, snr, 0.0, 0.0, config.l_b, memory_bits(config.l_b, 1.0),
            complexity_ratio(BINARY, config.l_b, 0.5, 0.5, config.n), config.l_b / config.n,
            hits / config.trials, ci, wall if config.timing else 0.0,
        ))
        log.info("binary snr=%s p=%.4f", snr, hits / config.trials)

        for plan in (p for p in plans if p.snr == snr):
            W_t = projection.generate_sparse(config.n, plan.l_t, plan.s_t, make_seed(config.seed, 3, plan.l_t))
            th = ThresholdPair(plan.lambda_x, plan.lambda_y)
            db_t = encode_database(projection.project(W_t, features), TERNARY, thresholds=th, spec=spec)
            index = build_index(db_t)
            P = transition_matrix(th, spec)
            votes = voting_constants(P, plan.alpha)
            q_t = ternarize(projection.project(W_t, queries), plan.lambda_y)
            hits, scanned, wall = _decode_all(
                lambda c: sublinear_decode(c, index, votes, config.k), (q_t[i] for i in range(config.trials)), truth
            )
            points.append(TradeoffPoint(
                TERNARY, snr, plan.lambda_x, plan.lambda_y, plan.l_t, memory_bits(plan.l_t, plan.h_x),
                complexity_ratio(TERNARY, plan.l_t, plan.alpha, plan.gamma, config.n),
                scanned / config.trials / (config.M * config.n),
                hits / config.trials, ci, wall if config.timing else 0.0,
                extra={"s": plan.s_t, "nu": votes.nu, "nu_prime": votes.nu_prime},
            ))
            log.info("ternary snr=%s lx=%.3f p=%.4f", snr, plan.lambda_x, hits / config.trials)
    return points


def make_seed(seed: int, *tags: int) -> int:
    """Derive a 64-bit seed for a named substream."""
    return int(np.random.SeedSequence([int(seed), *tags]).generate_state(1, dtype=np.uint64)[0])
