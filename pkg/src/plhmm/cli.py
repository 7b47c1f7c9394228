"""Command-line interface.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numeric/estimation error.
Diagnostics go to stderr at the level named by ``PLHMM_LOG``.
"""
import argparse
import json
import logging
import os
from pathlib import Path
import sys

from . import io
from .bench import bench
from .errors import DataError, EstimationError, NumericError
from .generator import sample
from .lattice import viterbi
from .model import HERMITE, MONOMIAL
from .recognizer import find_detections, score_windows
from .training import ECG_ORDERS, TrainConfig, fit

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4

log = logging.getLogger("plhmm")

_LEVELS = {"error": logging.ERROR, "warn": logging.WARNING, "warning": logging.WARNING,
           "info": logging.INFO, "debug": logging.DEBUG}
_FAMILIES = {"hermite": HERMITE, "monomial": MONOMIAL}


def _int_list(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def build_parser():
    p = argparse.ArgumentParser(prog="plhmm", description="Piecewise linear hidden semi-Markov models")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a model to one exemplar series")
    t.add_argument("--input", required=True)
    t.add_argument("--states", type=int, default=7)
    t.add_argument("--orders", type=_int_list, default=list(ECG_ORDERS))
    t.add_argument("--duration", choices=["discrete", "gamma"], default="discrete")
    t.add_argument("--dmin", type=_int_list)
    t.add_argument("--dmax", type=_int_list)
    t.add_argument("--mode", choices=["soft", "viterbi"], default="soft")
    t.add_argument("--iters", type=int)
    t.add_argument("--tol", type=float, default=1e-6)
    t.add_argument("--basis", choices=sorted(_FAMILIES), default="hermite")
    t.add_argument("--scale", type=float, default=3.0)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.add_argument("--trace")

    s = sub.add_parser("score", help="sliding-window log-likelihood of a strip")
    s.add_argument("--model", required=True)
    s.add_argument("--input", required=True)
    s.add_argument("--width", type=int, default=260)
    s.add_argument("--stride", type=int, default=1)
    s.add_argument("--out", required=True)
    s.add_argument("--detect", type=float, metavar="THRESHOLD")
    s.add_argument("--min-sep", type=int, default=1)
    s.add_argument("--out-detections")

    g = sub.add_parser("sample", help="draw a synthetic series from a model")
    g.add_argument("--model", required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--max-length", type=int)
    g.add_argument("--out", required=True)
    g.add_argument("--path")

    v = sub.add_parser("segment", help="most probable segmentation of a series")
    v.add_argument("--model", required=True)
    v.add_argument("--input", required=True)
    v.add_argument("--out", required=True)

    b = sub.add_parser("bench", help="time training in three duration settings")
    b.add_argument("--inputs", required=True)
    b.add_argument("--states", type=int, default=7)
    b.add_argument("--orders", type=_int_list, default=list(ECG_ORDERS))
    b.add_argument("--dmin", type=_int_list)
    b.add_argument("--dmax", type=_int_list)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    return p


class UsageError(Exception):
    pass


def _cmd_train(args):
    if (args.dmin is None) != (args.dmax is None):
        raise UsageError("--dmin and --dmax go together")
    if args.iters is not None and args.iters < 1:
        raise UsageError("--iters must be >= 1")
    if len(args.orders) != args.states:
        raise UsageError(f"--orders needs {args.states} entries, got {len(args.orders)}")
    series = io.load_series(args.input)
    cfg = TrainConfig(n_states=args.states, orders=tuple(args.orders), duration=args.duration,
                      d_min=args.dmin, d_max=args.dmax, mode=args.mode, max_iters=args.iters,
                      loglik_tol=args.tol, seed=args.seed, basis_family=_FAMILIES[args.basis],
                      scale=args.scale)
    model, trace = fit(series, cfg)
    io.save_model(model, args.out)
    if args.trace:
        io.save_trace(trace, args.trace)
    log.info("final loglik %.6f after %d iterations", trace.logliks[-1], trace.iterations)


def _cmd_score(args):
    if args.min_sep < 1:
        raise UsageError("--min-sep must be >= 1")
    if args.width < 1 or args.stride < 1:
        raise UsageError("--width and --stride must be >= 1")
    model = io.load_model(args.model)
    strip = io.load_series(args.input)
    track = score_windows(model, strip, args.width, args.stride)
    io.save_track(track, args.out)
    if args.detect is not None:
        dets = find_detections(track, args.detect, args.min_sep)
        if args.out_detections:
            io.save_detections(dets, track, args.out_detections)
        else:
            json.dump(io.detections_to_list(dets, track), sys.stdout, indent=2)
            sys.stdout.write("\n")


def _cmd_sample(args):
    if args.max_length is not None and args.max_length < 1:
        raise UsageError("--max-length must be >= 1")
    model = io.load_model(args.model)
    path = sample(model, args.seed, args.max_length)
    io.save_series(path.series, args.out)
    if args.path:
        io.save_segmentation(path.segmentation, args.path)


def _cmd_segment(args):
    model = io.load_model(args.model)
    series = io.load_series(args.input)
    io.save_segmentation(viterbi(model, series), args.out)


def _cmd_bench(args):
    if (args.dmin is None) != (args.dmax is None):
        raise UsageError("--dmin and --dmax go together")
    if len(args.orders) != args.states:
        raise UsageError(f"--orders needs {args.states} entries, got {len(args.orders)}")
    paths = [x for x in args.inputs.split(",") if x]
    inputs = [(Path(p).stem, io.load_series(p)) for p in paths]
    report = bench(inputs, n_states=args.states, orders=tuple(args.orders),
                   d_min=args.dmin, d_max=args.dmax, seed=args.seed)
    report.save(args.out)
    print(report.format_table())


_COMMANDS = {"train": _cmd_train, "score": _cmd_score, "sample": _cmd_sample,
             "segment": _cmd_segment, "bench": _cmd_bench}


def _configure_logging():
    level = _LEVELS.get(os.environ.get("PLHMM_LOG", "warn").lower(), logging.WARNING)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("plhmm: %(levelname)s: %(message)s"))
    log.handlers[:] = [handler]
    log.setLevel(level)
    log.propagate = False


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        _COMMANDS[args.command](args)
    except UsageError as err:
        parser.print_usage(sys.stderr)
        print(f"plhmm {args.command}: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (EstimationError, NumericError) as err:
        log.error("%s", err)
        return EXIT_NUMERIC
    except (DataError, OSError) as err:
        log.error("%s", err)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
