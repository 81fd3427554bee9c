"""Command-line front end.

Five sub-commands cover the clutter analyses and detection runs::

    sarclutter series --glob 'chips/*.phx' --pixel 30,30 --out run/
    sarclutter gof    --input HB15751.phx --rect 10,10,31,31 --out run/
    sarclutter detect --input HB15751.phx --family weibull --mode global --out run/
    sarclutter fit    --input samples.csv
    sarclutter synth  --rows 64 --cols 64 --family rayleigh --param sigma=20 --out run/
"""

from __future__ import annotations

import argparse
import csv
import glob
import io
import json
import logging
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import cfar, gof, ingest, models
from .errors import ClutterError, DegenerateDataError, DomainError, UnsupportedModelError

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
EXIT_NOT_FOUND = 13

EXIT_CODES_HELP = """\
exit codes:
  0   success
  1   unclassified package error
  2   invalid command line
  3   domain error (value outside a distribution's support, bad rectangle)
  4   degenerate data (no spread to fit)
  5   iterative fit did not converge
  6   fit diverged (no finite maximum-likelihood estimate)
  7   file format error
  8   file shorter than its header declares
  9   decoded data invalid (e.g. negative magnitude)
  10  clutter family has no CFAR threshold (gamma, lognormal)
  11  CFAR window exceeds the image (strict border policy)
  12  invalid detector configuration
  13  input file or glob not found
"""


@dataclass
class RunReport:
    """Machine-readable record of one CLI run."""

    command: str
    args: dict
    seed: Optional[int] = None
    fits: list = field(default_factory=list)
    skipped: dict = field(default_factory=dict)
    thresholds: Optional[dict] = None
    detections: Optional[dict] = None
    outputs: dict = field(default_factory=dict)
    timing_s: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunReport":
        doc = json.loads(text)
        if doc.get("schema_version") != SCHEMA_VERSION:
            raise DomainError(f"unsupported report schema {doc.get('schema_version')!r}")
        return cls(**doc)


# ---------------------------------------------------------------------------
# helpers


def atomic_write(path, data) -> None:
    """Write text or bytes to ``path`` via a temporary file and rename."""
    directory = os.path.dirname(os.path.abspath(path))
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_via(path, writer):
    """Run ``writer(tmp_path)`` and move the result into place."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _ints(text, n, what):
    try:
        values = [int(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"{what} must be {n} comma-separated integers") from None
    if len(values) != n:
        raise argparse.ArgumentTypeError(f"{what} must be {n} comma-separated integers")
    return values


def pixel_arg(text):
    return _ints(text, 2, "pixel")


def rect_arg(text):
    return _ints(text, 4, "rect")


def range_arg(text):
    try:
        lo, hi = (float(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("range must be LO,HI") from None
    return [lo, hi]


def target_arg(text):
    try:
        r, c, a = text.split(",")
        return [int(r), int(c), float(a)]
    except ValueError:
        raise argparse.ArgumentTypeError("target must be ROW,COL,AMPLITUDE") from None


def param_arg(text):
    key, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError("param must be NAME=VALUE")
    try:
        return [key.strip(), float(value)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"param {key} needs a numeric value") from None


def _load(path, args):
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    image = ingest.load_image(path, "<" if args.raw_endian else ">")
    if args.gray:
        image = ingest.normalize_to_gray(image)
    return image


def _prepare(samples, args):
    x = np.asarray(samples, dtype=np.float64)
    if args.floor is not None:
        x = np.maximum(x, args.floor)
    return x


def _hist_range(args):
    if args.range is not None:
        return args.range
    if args.gray:
        return list(gof.GRAY_RANGE)
    return None


def _out_dir(args):
    if args.out is None:
        return None
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _args_echo(args):
    echo = {k: v for k, v in vars(args).items() if k not in ("func", "verbose")}
    return json.loads(json.dumps(echo))


def _curves_csv(hist, reports) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    families = [r.family for r in reports]
    writer.writerow(["gray_level", "bin_lo", "bin_hi", "empirical_prob", *families])
    masses = [gof.binned_masses(hist, r.model) for r in reports]
    for k in range(hist.bins):
        writer.writerow(
            [
                repr(float(hist.centers[k])),
                repr(float(hist.bin_edges[k])),
                repr(float(hist.bin_edges[k + 1])),
                repr(float(hist.probs[k])),
                *(repr(float(m[k])) for m in masses),
            ]
        )
    return buf.getvalue()


def _rank(samples, args, report):
    x = _prepare(samples, args)
    gof.require_spread(x)
    hist = gof.build_histogram(x, args.bins, _hist_range(args))
    fitted, skipped = gof.fit_all(x)
    report.skipped = skipped
    if not fitted:
        raise DegenerateDataError("no clutter family could be fitted: " + "; ".join(skipped.values()))
    level = None if args.pure_kl else gof.NESTED_LEVEL
    reports = gof.rank_models(hist, fitted.values(), args.raw_frequency, level)
    report.fits = gof.reports_to_dicts(reports)
    return hist, reports


def _finish(report, out, started):
    report.timing_s = round(time.perf_counter() - started, 6)
    text = report.to_json()
    if out is not None:
        atomic_write(os.path.join(out, "report.json"), text + "\n")
    print(text)
    return 0


# ---------------------------------------------------------------------------
# commands


def cmd_series(args):
    started = time.perf_counter()
    paths = sorted(glob.glob(args.glob))
    if not paths:
        raise FileNotFoundError(f"no files match {args.glob!r}")
    if len(paths) < 2:
        raise DomainError("a pixel series needs at least two images")
    images = [_load(p, args) for p in paths]
    series = ingest.stack_series(images, *args.pixel)
    report = RunReport("series", _args_echo(args), seed=args.seed)
    hist, reports = _rank(series.values, args, report)
    out = _out_dir(args)
    if out is not None:
        atomic_write(os.path.join(out, "curves.csv"), _curves_csv(hist, reports))
        buf = io.StringIO()
        series.write_csv(buf)
        atomic_write(os.path.join(out, "series.csv"), buf.getvalue())
        buf = io.StringIO()
        gof.write_histogram_csv(hist, buf)
        atomic_write(os.path.join(out, "histogram.csv"), buf.getvalue())
        report.outputs = {"curves": "curves.csv", "series": "series.csv", "histogram": "histogram.csv"}
    report.args["images"] = len(paths)
    return _finish(report, out, started)


def cmd_gof(args):
    started = time.perf_counter()
    image = _load(args.input, args)
    rect = args.rect or [0, 0, image.rows, image.cols]
    samples = ingest.region_samples(image, rect)
    report = RunReport("gof", _args_echo(args), seed=args.seed)
    hist, reports = _rank(samples, args, report)
    out = _out_dir(args)
    if out is not None:
        atomic_write(os.path.join(out, "curves.csv"), _curves_csv(hist, reports))
        buf = io.StringIO()
        gof.write_histogram_csv(hist, buf)
        atomic_write(os.path.join(out, "histogram.csv"), buf.getvalue())
        report.outputs = {"curves": "curves.csv", "histogram": "histogram.csv"}
    return _finish(report, out, started)


def _read_sample_csv(path):
    values = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or not row[0].strip():
                continue
            try:
                values.append(float(row[0]))
            except ValueError:
                if values:
                    raise DomainError(f"non-numeric sample {row[0]!r} in {path}") from None
                # header line
    return np.array(values)


def cmd_fit(args):
    started = time.perf_counter()
    if not os.path.exists(args.input):
        raise FileNotFoundError(args.input)
    if args.input.lower().endswith(".csv"):
        samples = _read_sample_csv(args.input)
    else:
        image = _load(args.input, args)
        samples = ingest.region_samples(image, args.rect or [0, 0, image.rows, image.cols])
    x = _prepare(samples, args)
    fitted, skipped = gof.fit_all(x)
    if not fitted:
        raise DegenerateDataError("no clutter family could be fitted: " + "; ".join(skipped.values()))
    report = RunReport("fit", _args_echo(args), seed=args.seed, skipped=skipped)
    for model in fitted.values():
        doc = models.model_to_dict(model)
        doc["mean"] = models.model_mean(model)
        report.fits.append(doc)
    return _finish(report, _out_dir(args), started)


def cmd_detect(args):
    started = time.perf_counter()
    family = models.model_type(args.family).family
    if family not in ("weibull", "rayleigh"):
        raise UnsupportedModelError(f"CFAR detection supports weibull and rayleigh, not {family}")
    image = _load(args.input, args)
    rect = args.rect or [0, 0, image.rows, image.cols]
    samples = _prepare(ingest.region_samples(image, rect), args)
    model = models.fit(family, samples)
    config = cfar.CfarConfig(
        train_per_wing=args.train,
        guard_per_wing=args.guard,
        pfa=args.pfa,
        stats_mode=args.mode,
        q_override=args.q,
        border=args.border,
        clutter_rect=tuple(rect),
    )
    result = cfar.detect(image, model, config)
    sidecar = result.to_dict()
    report = RunReport("detect", _args_echo(args), seed=args.seed)
    report.fits = [dict(models.model_to_dict(model), mean=models.model_mean(model))]
    report.thresholds = {k: sidecar[k] for k in ("t_a", "q", "mu_c", "sigma_c")}
    report.detections = {k: sidecar[k] for k in ("detections", "cells", "skipped_cells")}
    out = _out_dir(args)
    if out is not None:
        _atomic_via(os.path.join(out, "mask.pgm"), lambda p: ingest.write_pgm(result.mask, p))
        atomic_write(os.path.join(out, "detection.json"), json.dumps(sidecar, indent=2) + "\n")
        report.outputs = {"mask": "mask.pgm", "sidecar": "detection.json"}
    return _finish(report, out, started)


_PARAM_ALIASES = {"gamma": "gamma_loc"}


def cmd_synth(args):
    started = time.perf_counter()
    cls = models.model_type(args.family)
    params = {}
    for key, value in args.param or []:
        if cls is models.LogNormalParams:
            key = _PARAM_ALIASES.get(key, key)
        params[key] = value
    try:
        clutter = cls(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for {cls.family}: {exc}") from None
    spec = ingest.SceneSpec(args.rows, args.cols, clutter, args.target or [], args.seed)
    image = ingest.synth_scene(spec)
    report = RunReport("synth", _args_echo(args), seed=args.seed)
    report.fits = [models.model_to_dict(clutter)]
    out = _out_dir(args)
    if out is not None:
        _atomic_via(os.path.join(out, "scene.phx"), lambda p: ingest.write_mstar(image, p))
        _atomic_via(os.path.join(out, "scene.pgm"), lambda p: ingest.write_pgm(image, p))
        report.outputs = {"scene": "scene.phx", "preview": "scene.pgm"}
    return _finish(report, out, started)


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sarclutter",
        description="SAR land-clutter statistics, KL model ranking and CFAR detection.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", metavar="DIR", help="write report.json and data files here")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--floor", type=float, metavar="EPS", help="raise samples below EPS to EPS before fitting")
    common.add_argument("--gray", action="store_true", help="normalize each image to gray levels 0..255")
    common.add_argument("--raw-endian", action="store_true", help="Phoenix payload is little-endian")

    ranking = argparse.ArgumentParser(add_help=False)
    ranking.add_argument("--bins", type=int, default=gof.DEFAULT_BINS)
    ranking.add_argument("--range", type=range_arg, metavar="LO,HI", help="histogram range (default 0..max, or 0..255 with --gray)")
    ranking.add_argument("--raw-frequency", action="store_true", help="use raw counts in the KL sum (investigation only)")
    ranking.add_argument("--pure-kl", action="store_true", help="rank by KL alone, without the Weibull/Rayleigh nesting check")

    def add(name, func, parents, help_text):
        p = sub.add_parser(name, parents=parents, help=help_text, epilog=EXIT_CODES_HELP,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(func=func)
        return p

    p = add("series", cmd_series, [common, ranking], "rank models on one pixel across an image stack")
    p.add_argument("--glob", required=True)
    p.add_argument("--pixel", type=pixel_arg, required=True, metavar="R,C")

    p = add("gof", cmd_gof, [common, ranking], "rank models on a rectangular region")
    p.add_argument("--input", required=True)
    p.add_argument("--rect", type=rect_arg, metavar="R0,C0,R1,C1", help="half-open region (default whole image)")

    p = add("fit", cmd_fit, [common], "fit all four families to samples")
    p.add_argument("--input", required=True, help="CSV of samples (first column) or an image")
    p.add_argument("--rect", type=rect_arg, metavar="R0,C0,R1,C1")

    p = add("detect", cmd_detect, [common], "CFAR detection with a fitted clutter model")
    p.add_argument("--input", required=True)
    p.add_argument("--family", required=True, choices=models.FAMILIES)
    p.add_argument("--rect", type=rect_arg, metavar="R0,C0,R1,C1", help="clutter region for fitting and global stats")
    p.add_argument("--pfa", type=float, default=1e-6)
    p.add_argument("--train", type=int, default=15)
    p.add_argument("--guard", type=int, default=5)
    p.add_argument("--mode", choices=["windowed", "global"], default="windowed")
    p.add_argument("--border", choices=[b.value for b in cfar.BorderPolicy], default="shrink")
    p.add_argument("--q", type=float, help="override the design parameter Q")

    p = add("synth", cmd_synth, [common], "synthesize a clutter scene with point targets")
    p.add_argument("--rows", type=int, required=True)
    p.add_argument("--cols", type=int, required=True)
    p.add_argument("--family", required=True, choices=models.FAMILIES)
    p.add_argument("--param", type=param_arg, action="append", metavar="NAME=VALUE")
    p.add_argument("--target", type=target_arg, action="append", metavar="R,C,AMP")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ClutterError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code
    except FileNotFoundError as exc:
        print(f"error: not found: {exc}", file=sys.stderr)
        return EXIT_NOT_FOUND


if __name__ == "__main__":
    sys.exit(main())
