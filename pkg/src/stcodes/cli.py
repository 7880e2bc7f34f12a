"""``stc`` command line: gain curves, identification benchmarks and an encode/index/query pipeline.

Exit codes: 0 success, 1 I/O failure, 2 bad arguments, 3 resource cap
exceeded, 4 file magic/version mismatch, 5 dimension mismatch or empty index.
"""
from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys
import warnings
from pathlib import Path

import numpy as np

from . import formats, projection
from .channel_model import ChannelSpec, FeatureMatrix, sample_database, sample_query
from .decoders import BINARY, TERNARY, build_index, encode_database, hamming_decode, ml_decode, sublinear_decode
from .encoder import ThresholdPair, binarize, ternarize
from .errors import CapacityError, DomainError, FormatError, ShapeError, StcWarning
from .experiment import (
    GAIN_COLUMNS, IDENTIFY_COLUMNS, ExperimentConfig, run_gain_sweep, run_identification,
)
from .info_theory import alpha_of, optimize_lambda_y, transition_matrix, voting_constants

log = logging.getLogger("stcodes")

_KINDS = {"dense": projection.DENSE, "sparse": projection.SPARSE}

EXIT_IO, EXIT_USAGE, EXIT_CAPACITY, EXIT_FORMAT, EXIT_SHAPE = 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


def _write_csv(path, columns, rows, config: dict) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("# " + json.dumps(config, sort_keys=True) + "\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row[c]) for c in columns])


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


# -- config plumbing ---------------------------------------------------------

def _resolved(args: argparse.Namespace) -> dict:
    skip = {"func", "config_json", "show_config", "verbose"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _subcommand_defaults(parser: argparse.ArgumentParser, command: str) -> dict:
    sub = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    return {a.dest: a.default for a in sub.choices[command]._actions if a.dest != "help"}


def _apply_config_json(parser: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Fill flags still at their defaults from ``--config-json`` (inline JSON or a file path)."""
    raw = args.config_json
    if not raw:
        return
    text = Path(raw).read_text() if not raw.lstrip().startswith("{") else raw
    try:
        overrides = json.loads(text)
    except json.JSONDecodeError as exc:
        raise UsageError(f"--config-json is not valid JSON: {exc}") from exc
    defaults = _subcommand_defaults(parser, args.command)
    for key, value in overrides.items():
        key = key.replace("-", "_")
        if key not in defaults:
            raise UsageError(f"unknown config key {key!r}")
        if getattr(args, key) == defaults[key]:
            setattr(args, key, value)


def _experiment_config(args, sweep: str, **extra) -> ExperimentConfig:
    if args.lambda_x is not None:
        extra[sweep] = tuple(args.lambda_x)
    try:
        return ExperimentConfig(
            n=args.n, M=args.m, snr_db_list=tuple(args.snr_db), l_b=args.lb,
            lambda_x_grid=tuple(args.lambda_x_grid),
            sigma_f=args.sigma_f, sigma_p=args.sigma_p, seed=args.seed, **extra,
        )
    except (DomainError, TypeError, ValueError) as exc:
        raise UsageError(str(exc)) from exc


# -- subcommands ---------------------------------------------------------------

def cmd_gain(args) -> int:
    lo, hi, steps = args.lambda_x_grid
    if not (0 <= lo <= hi) or int(steps) < 1 or (int(steps) > 1 and lo == hi):
        raise UsageError(f"bad --lambda-x-grid {args.lambda_x_grid}")
    config = _experiment_config(args, "lambda_x_values", fixed_lambda_y=args.lambda_y, lambda_y_steps=args.lambda_y_steps)
    resolved = {"command": "gain", **config.to_dict()}
    if args.show_config:
        print(json.dumps(resolved, sort_keys=True, indent=2))
        return 0
    rows = run_gain_sweep(config)
    _write_csv(args.out, GAIN_COLUMNS, rows, resolved)
    log.info("wrote %d rows to %s", len(rows), args.out)
    return 0


def cmd_identify(args) -> int:
    extra = dict(trials=args.trials, projection_kind=_KINDS[args.projection], s=args.s, k=args.k,
                 memory_cap_bytes=int(args.memory_cap_mb * (1 << 20)), timing=args.timing)
    if args.projection == "sparse" and args.s < 2:
        raise UsageError("--s must be >= 2 for sparse projections")
    config = _experiment_config(args, "ident_lambda_x", **extra)
    resolved = {"command": "identify", **config.to_dict()}
    if args.show_config:
        print(json.dumps(resolved, sort_keys=True, indent=2))
        return 0
    points = run_identification(config)
    rows = []
    for p in points:
        row = p.row()
        if not config.timing:
            row["decode_wall_time_s"] = None
        rows.append(row)
    _write_csv(args.out, IDENTIFY_COLUMNS, rows, resolved)
    return 0


def cmd_sample(args) -> int:
    if args.show_config:
        print(json.dumps(_resolved(args), sort_keys=True, indent=2))
        return 0
    fm = sample_database(ChannelSpec(args.sigma_f, 0.0), args.n, args.m, args.seed)
    formats.save_features(args.out, fm)
    return 0


def cmd_perturb(args) -> int:
    if args.show_config:
        print(json.dumps(_resolved(args), sort_keys=True, indent=2))
        return 0
    fm = formats.load_features(args.features)
    if not 0 <= args.row < fm.rows:
        raise ShapeError(f"row {args.row} outside [0, {fm.rows})")
    q = sample_query(fm.values[args.row], ChannelSpec(args.sigma_f, args.sigma_p), args.seed)
    formats.save_features(args.out, FeatureMatrix(q[None, :], seed=args.seed))
    return 0


def cmd_encode(args) -> int:
    if args.show_config:
        print(json.dumps(_resolved(args), sort_keys=True, indent=2))
        return 0
    fm = formats.load_features(args.features)
    if args.projection_in:
        W = formats.load_projection(args.projection_in)
        if W.n != fm.dim:
            raise ShapeError(f"projection expects n={W.n}, features have n={fm.dim}")
    else:
        if args.projection == "sparse" and args.s < 2:
            raise UsageError("--s must be >= 2 for sparse projections")
        W = projection.generate(fm.dim, args.l, args.seed, _KINDS[args.projection], args.s)
    kind = args.kind
    th = ThresholdPair(args.lambda_x, args.lambda_x) if kind == TERNARY else None
    db = encode_database(projection.project(W, fm.values), kind, thresholds=th)
    formats.save_codes(args.out, db)
    if args.projection_out:
        formats.save_projection(args.projection_out, W)
    return 0


def cmd_index(args) -> int:
    if args.show_config:
        print(json.dumps(_resolved(args), sort_keys=True, indent=2))
        return 0
    db = formats.load_codes(args.codes)
    if db.kind != TERNARY:
        raise ShapeError("only ternary codes can be indexed")
    formats.save_index(args.out, build_index(db))
    return 0


def _load_query(path, row: int) -> np.ndarray:
    if formats.read_magic(path) == b"STCF":
        fm = formats.load_features(path)
        if not 0 <= row < fm.rows:
            raise ShapeError(f"query row {row} outside [0, {fm.rows})")
        return fm.values[row]
    try:
        return np.loadtxt(path, dtype=np.float64, ndmin=1)
    except ValueError as exc:
        raise FormatError(f"cannot parse query vector file {path}: {exc}") from exc


def cmd_query(args) -> int:
    if args.show_config:
        print(json.dumps(_resolved(args), sort_keys=True, indent=2))
        return 0
    db = formats.load_codes(args.codes)
    W = formats.load_projection(args.projection)
    index = formats.load_index(args.index) if args.index else None
    q = _load_query(args.query, args.row)
    if q.shape != (W.n,):
        raise ShapeError(f"query has dimension {q.shape[-1]}, projection expects {W.n}")
    if W.l != db.l:
        raise ShapeError(f"projection length {W.l} does not match code length {db.l}")
    projected = projection.project(W, q)

    if db.kind == BINARY:
        result = hamming_decode(binarize(projected), db, args.k)
    else:
        spec = ChannelSpec(args.sigma_f, args.sigma_p)
        lambda_x = db.thresholds.lambda_x
        lambda_y = args.lambda_y if args.lambda_y is not None else optimize_lambda_y(lambda_x, spec)[0]
        th = ThresholdPair(lambda_x, lambda_y)
        P = transition_matrix(th, spec)
        y = ternarize(projected, lambda_y)
        if args.decoder == "ml":
            result = ml_decode(y, db, P, args.k)
        else:
            if index is None:
                raise UsageError("the sublinear decoder needs --index")
            if index.M == 0:
                raise ShapeError("index is empty")
            if index.l != db.l:
                raise ShapeError(f"index length {index.l} does not match code length {db.l}")
            result = sublinear_decode(y, index, voting_constants(P, alpha_of(lambda_x, spec)), args.k)
    for rank, (i, score) in enumerate(result.top_k, start=1):
        print(json.dumps({"rank": rank, "id": i, "score": score}))
    return 0


# -- parser --------------------------------------------------------------------

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="RNG seed")
    p.add_argument("--threads", type=int, default=None, help="cap on BLAS/OpenMP worker threads")
    p.add_argument("--config-json", default=None, help="JSON object (inline or file path) overriding defaults")
    p.add_argument("--show-config", action="store_true", help="print the resolved configuration and exit")
    p.add_argument("-v", "--verbose", action="count", default=0)


def _experiment_flags(p: argparse.ArgumentParser, trials: bool) -> None:
    d = ExperimentConfig()
    p.add_argument("--snr-db", type=float, nargs="+", default=list(d.snr_db_list), help="SNR list in dB")
    p.add_argument("--sigma-f", type=float, default=d.sigma_f, help="source standard deviation")
    p.add_argument("--sigma-p", type=float, default=None, help="noise standard deviation (overrides --snr-db)")
    p.add_argument("--lb", type=int, default=d.l_b, help="binary code length")
    p.add_argument("--n", type=int, default=d.n, help="feature dimension")
    p.add_argument("--m", type=int, default=d.M, help="database size")
    p.add_argument("--lambda-x", type=float, nargs="+", default=None,
                   help="explicit item threshold(s) in units of sigma_f (replaces the grid for gain, "
                        "the identification settings for identify)")
    p.add_argument("--lambda-x-grid", type=float, nargs=3, default=list(d.lambda_x_grid),
                   metavar=("LO", "HI", "STEPS"), help="item threshold grid in units of sigma_f")
    if trials:
        p.add_argument("--trials", type=int, default=d.trials, help="identification trials per setting")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = argparse.ArgumentParser(prog="stc", description=__doc__.splitlines()[0], formatter_class=fmt)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gain", help="coding-gain sweep at entropy parity", formatter_class=fmt)
    _experiment_flags(p, trials=False)
    p.add_argument("--lambda-y", type=float, default=None,
                   help="fixed query threshold in units of the query std dev (default: grid search)")
    p.add_argument("--lambda-y-steps", type=int, default=ExperimentConfig().lambda_y_steps)
    p.add_argument("--out", default="gain.csv")
    _common(p)
    p.set_defaults(func=cmd_gain)

    p = sub.add_parser("identify", help="identification benchmark, binary vs ternary", formatter_class=fmt)
    _experiment_flags(p, trials=True)
    p.add_argument("--projection", choices=sorted(_KINDS), default="dense",
                   help="binary projection kind; ternary always uses a sparse map with the same nonzero budget")
    p.add_argument("--s", type=float, default=0.0, help="sparsity parameter for sparse binary projections")
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--memory-cap-mb", type=float, default=4096.0)
    p.add_argument("--timing", action="store_true", help="record decode wall time (makes output non-reproducible)")
    p.add_argument("--out", default="identify.csv")
    _common(p)
    p.set_defaults(func=cmd_identify)

    p = sub.add_parser("sample", help="write a synthetic feature database (STCF)", formatter_class=fmt)
    p.add_argument("--m", type=int, default=1000)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--sigma-f", type=float, default=1.0)
    p.add_argument("--out", default="features.stcf")
    _common(p)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("perturb", help="write a noisy query for one database row (STCF)", formatter_class=fmt)
    p.add_argument("--features", required=True)
    p.add_argument("--row", type=int, default=0)
    p.add_argument("--sigma-f", type=float, default=1.0)
    p.add_argument("--sigma-p", type=float, default=0.0)
    p.add_argument("--out", default="query.stcf")
    _common(p)
    p.set_defaults(func=cmd_perturb)

    p = sub.add_parser("encode", help="project and encode a feature database (STCC)", formatter_class=fmt)
    p.add_argument("--features", required=True)
    p.add_argument("--kind", choices=[BINARY, TERNARY], default=TERNARY)
    p.add_argument("--l", type=int, default=512, help="code length")
    p.add_argument("--lambda-x", type=float, default=1.5, help="item threshold (projected units)")
    p.add_argument("--projection", choices=sorted(_KINDS), default="dense")
    p.add_argument("--s", type=float, default=0.0)
    p.add_argument("--projection-in", default=None, help="reuse an existing STCW projection")
    p.add_argument("--projection-out", default=None, help="write the projection (STCW)")
    p.add_argument("--out", default="codes.stcc")
    _common(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("index", help="build an inverted index (STCI) over ternary codes", formatter_class=fmt)
    p.add_argument("--codes", required=True)
    p.add_argument("--out", default="codes.stci")
    _common(p)
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("query", help="decode one query vector; prints JSON lines", formatter_class=fmt)
    p.add_argument("--codes", required=True)
    p.add_argument("--index", default=None)
    p.add_argument("--projection", required=True)
    p.add_argument("--query", required=True, help="STCF file or whitespace-separated floats")
    p.add_argument("--row", type=int, default=0, help="row of an STCF query file")
    p.add_argument("--sigma-f", type=float, default=1.0)
    p.add_argument("--sigma-p", type=float, default=0.0)
    p.add_argument("--lambda-y", type=float, default=None, help="query threshold (default: optimized)")
    p.add_argument("--decoder", choices=["sublinear", "ml"], default="sublinear")
    p.add_argument("--k", type=int, default=1)
    _common(p)
    p.set_defaults(func=cmd_query)
    return parser


def _thread_limit(threads):
    if not threads:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=threads)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    if args.verbose == 0:
        warnings.simplefilter("ignore", StcWarning)
    try:
        _apply_config_json(parser, args)
        with _thread_limit(args.threads):
            return args.func(args)
    except UsageError as exc:
        print(f"stc {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except CapacityError as exc:
        print(f"stc {args.command}: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except FormatError as exc:
        print(f"stc {args.command}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except ShapeError as exc:
        print(f"stc {args.command}: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except DomainError as exc:
        print(f"stc {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"stc {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
