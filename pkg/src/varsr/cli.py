"""Command-line interface.

Exit status: 0 success, 1 usage error, 2 IO error, 3 numeric failure.
Diagnostics go to stderr; stdout carries only tables and counts.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import __version__
from .analysis import DEFAULT_SOBEL_THRESHOLD, METHODS, compare, edge_count, run_method, sobel_magnitude
from .baselines import TvFilterConfig
from .image import PGMError, downsample_block, load_pgm, save_pgm
from .pipeline import INIT_METHODS, SRConfig, super_resolve
from .weights import NumericalError, SolverConfig, estimate_weights, save_vwf

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("varsr")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    d = SolverConfig()
    g = p.add_argument_group("weight solver")
    g.add_argument("--lambda", dest="lam", type=float, default=d.lam, help="fidelity weight")
    g.add_argument("--dt", type=float, default=d.dt, help="maximum time step")
    g.add_argument("--eps", type=float, default=d.eps, help="TV regularization floor")
    g.add_argument("--iters", type=int, default=d.max_iters, help="maximum iterations")
    g.add_argument("--tol", type=float, default=d.stop_tol, help="stop when max update < tol")


def _add_sr_flags(p: argparse.ArgumentParser) -> None:
    d = SRConfig()
    g = p.add_argument_group("super-resolution")
    g.add_argument("--init", choices=sorted(INIT_METHODS), default=d.init_method,
                   help="initial high-resolution estimate")
    g.add_argument("--renormalize", action="store_true",
                   help="rescale weights to sum to one per pixel")
    g.add_argument("--renorm-floor", type=float, default=d.renorm_floor,
                   help="pixels with |sum of weights| below this reset to uniform")


def _add_tv_flags(p: argparse.ArgumentParser) -> None:
    d = TvFilterConfig()
    g = p.add_argument_group("digital TV filter")
    g.add_argument("--tv-lambda", type=float, default=d.lambda_fit, help="fitting weight")
    g.add_argument("--tv-eps", type=float, default=d.eps, help="gradient regularization")
    g.add_argument("--tv-iters", type=int, default=d.max_iters, help="maximum iterations")
    g.add_argument("--tv-tol", type=float, default=d.stop_tol, help="stop when max update < tol")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--threads", type=_positive_int, default=1,
                   help="worker threads (never changes results)")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="varsr", description="Single-image super-resolution with "
                     "variationally estimated neighbor weights.", formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("upscale", help="upscale a PGM image", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--method", choices=METHODS, default="ours", help="upscaling method")
    p.add_argument("--zoom", type=int, default=SRConfig().z, help="magnification factor")
    p.add_argument("--maxval", type=int, choices=(255, 65535), default=255,
                   help="maxval of the written PGM")
    _add_solver_flags(p)
    _add_sr_flags(p)
    _add_tv_flags(p)
    _add_common(p)

    p = sub.add_parser("weights", help="estimate and dump the weight field", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("output")
    _add_solver_flags(p)
    _add_common(p)

    p = sub.add_parser("compare", help="downsample a reference and compare methods",
                       formatter_class=fmt)
    p.add_argument("reference")
    p.add_argument("report")
    p.add_argument("--zoom", type=int, default=SRConfig().z, help="magnification factor")
    p.add_argument("--methods", default=",".join(METHODS), help="comma-separated method list")
    p.add_argument("--threshold", type=float, default=DEFAULT_SOBEL_THRESHOLD,
                   help="shared Sobel magnitude threshold")
    p.add_argument("--no-timing", action="store_true",
                   help="omit wall times so reports are byte-reproducible")
    _add_solver_flags(p)
    _add_sr_flags(p)
    _add_tv_flags(p)
    _add_common(p)

    p = sub.add_parser("downsample", help="block-average downsampling", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--zoom", type=int, default=SRConfig().z, help="block size")
    p.add_argument("--maxval", type=int, choices=(255, 65535), default=255,
                   help="maxval of the written PGM")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")

    p = sub.add_parser("sobel", help="binary Sobel edge map", formatter_class=fmt)
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--threshold", type=float, default=DEFAULT_SOBEL_THRESHOLD,
                   help="magnitude threshold")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    return parser


def _solver_config(a) -> SolverConfig:
    return SolverConfig(lam=a.lam, dt=a.dt, eps=a.eps, max_iters=a.iters, stop_tol=a.tol)


def _sr_config(a) -> SRConfig:
    return SRConfig(z=a.zoom, solver=_solver_config(a), init_method=a.init,
                    renormalize_weights=a.renormalize, renorm_floor=a.renorm_floor)


def _tv_config(a) -> TvFilterConfig:
    return TvFilterConfig(lambda_fit=a.tv_lambda, eps=a.tv_eps, max_iters=a.tv_iters,
                          stop_tol=a.tv_tol)


def _cmd_upscale(a) -> int:
    try:
        sr = _sr_config(a)
        tv = _tv_config(a)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    img = load_pgm(a.input)
    if a.method == "ours":
        res = super_resolve(img, sr, workers=a.threads)
        print(f"iters_run={res.iters} final_energy={res.energy:.12g}", file=sys.stderr)
        out = res.image
    else:
        out = run_method(a.method, img, a.zoom, sr, tv)
    save_pgm(out, a.output, maxval=a.maxval)
    return EXIT_OK


def _cmd_weights(a) -> int:
    try:
        cfg = _solver_config(a)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    img = load_pgm(a.input)
    est = estimate_weights(img, cfg, workers=a.threads)
    print(f"iters_run={est.iters} final_energy={est.energy:.12g}", file=sys.stderr)
    save_vwf(est.weights, a.output)
    return EXIT_OK


def _cmd_compare(a) -> int:
    methods = [m.strip() for m in a.methods.split(",") if m.strip()]
    bad = [m for m in methods if m not in METHODS]
    if not methods or bad:
        raise UsageError(f"unknown method(s) {bad}; choose from {', '.join(METHODS)}")
    try:
        sr = _sr_config(a)
        tv = _tv_config(a)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ref = load_pgm(a.reference)
    h, w = ref.shape
    if h % a.zoom or w % a.zoom:
        raise UsageError(f"reference size {w}x{h} is not divisible by zoom {a.zoom}")
    report = compare(ref, a.zoom, methods, a.threshold, sr, tv,
                     reference=os.path.basename(a.reference), workers=a.threads)
    timing = not a.no_timing
    with open(a.report, "w", encoding="utf-8") as f:
        f.write(report.to_jsonl(timing=timing))
    sys.stdout.write(report.format_table(timing=timing))
    return EXIT_OK


def _cmd_downsample(a) -> int:
    img = load_pgm(a.input)
    h, w = img.shape
    if a.zoom < 2 or h % a.zoom or w % a.zoom:
        raise UsageError(f"image size {w}x{h} is not divisible by zoom {a.zoom}")
    save_pgm(downsample_block(img, a.zoom), a.output, maxval=a.maxval)
    return EXIT_OK


def _cmd_sobel(a) -> int:
    if a.threshold < 0:
        raise UsageError("threshold must be >= 0")
    mag = sobel_magnitude(load_pgm(a.input))
    save_pgm((mag > a.threshold).astype(np.float64), a.output, maxval=255)
    print(edge_count(mag, a.threshold))
    return EXIT_OK


_COMMANDS = {
    "upscale": _cmd_upscale,
    "weights": _cmd_weights,
    "compare": _cmd_compare,
    "downsample": _cmd_downsample,
    "sobel": _cmd_sobel,
}


def run(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"varsr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, PGMError) as exc:
        print(f"varsr {args.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalError, FloatingPointError) as exc:
        print(f"varsr {args.command}: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"varsr {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main() -> None:
    sys.exit(run())
