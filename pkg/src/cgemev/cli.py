"""Command line interface: ``mcgev <subcommand> ...``.

Exit codes: 0 when everything ran (and every gated comparison passed),
1 on a statistical failure, 2 on a runtime or input error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from .api import method_tag, run_method
from .estimators import KernelFactory, SearchBox
from .exceptions import CGEMError, ExclusionRateExceeded
from .harness import ExperimentConfig, compare_report, run_experiment, write_outputs
from .quadrature import (
    TABLE_COLUMNS,
    asymptotic_report,
    ineff_closed_form,
    ineff_fraction,
    inefficiency_table,
)
from .simulation import SimulationSpec, simulate_observations
from .spectral import ModelParams, spectrum_table
from .toeplitz import cgem_parts, log_likelihood
from .validation import check_series

MAGIC = b"MCGEV001"
EXIT_OK, EXIT_STAT, EXIT_RUNTIME = 0, 1, 2
TABLE_NU = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0)


def _float_list(text):
    return [float(v) for v in text.replace(",", " ").split()]


def _csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _emit(text, path):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return str(obj)


def _dumps(obj):
    # NaN is not JSON; write null instead
    def clean(x):
        if isinstance(x, float) and not math.isfinite(x):
            return None
        if isinstance(x, dict):
            return {k: clean(v) for k, v in x.items()}
        if isinstance(x, (list, tuple)):
            return [clean(v) for v in x]
        return x

    return json.dumps(clean(obj), indent=2, default=_json_default) + "\n"


# --------------------------------------------------------------------------
# series I/O


def write_binary(path, values):
    """``MCGEV001`` followed by little-endian float64 values."""
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.asarray(values, dtype="<f8").tobytes())


def read_series(path):
    """Observations from a ``MCGEV001`` binary file or a CSV.

    A CSV with a header uses its ``y`` column (or its only column); a
    headerless CSV must hold one number per line.
    """
    raw = Path(path).read_bytes()
    if raw.startswith(MAGIC):
        body = raw[len(MAGIC):]
        if len(body) % 8:
            raise ValueError(f"{path}: binary payload is not a whole number of float64 values")
        return check_series(np.frombuffer(body, dtype="<f8").copy())
    lines = [ln for ln in raw.decode().splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines:
        raise ValueError(f"{path}: no data")
    rows = list(csv.reader(lines))
    try:
        float(rows[0][0])
        header = None
    except ValueError:
        header, rows = [h.strip() for h in rows[0]], rows[1:]
    if header is None:
        if any(len(r) != 1 for r in rows):
            raise ValueError(f"{path}: headerless CSV must have a single column")
        col = 0
    elif "y" in header:
        col = header.index("y")
    elif len(header) == 1:
        col = 0
    else:
        raise ValueError(f"{path}: CSV header has no 'y' column")
    return check_series([float(r[col]) for r in rows])


# --------------------------------------------------------------------------
# subcommands


def cmd_ineff(args):
    rows = []
    for nu in args.nu or TABLE_NU:
        frac = ineff_fraction(nu)
        rows.append([f"{nu:g}", repr(ineff_closed_form(nu)), "" if frac is None else str(frac)])
    _emit(_csv_text(["nu", "ineff", "exact"], rows), args.output)
    return EXIT_OK


def cmd_asymptotics(args):
    if args.table:
        nus = _float_list(args.nu_list) if args.nu_list else list(TABLE_NU)
        deltas = _float_list(args.delta_list)
        table = inefficiency_table(nus, deltas, b0=args.b0, theta0=args.theta0)
        rows = [[repr(r[c]) if isinstance(r[c], float) else r[c] for c in TABLE_COLUMNS] for r in table]
        _emit(_csv_text(TABLE_COLUMNS, rows), args.output)
        failed = [r for r in table if r["error"]]
        for r in failed:
            print(f"nu={r['nu']:g} delta={r['delta']:g}: {r['error']}", file=sys.stderr)
        return EXIT_RUNTIME if failed else EXIT_OK
    params = ModelParams(args.nu, args.b0, args.theta0, args.delta)
    if args.dump_spectrum:
        lam = np.linspace(0.0, np.pi, args.points)
        spec = spectrum_table(params, lam)
        cols = list(spec)
        rows = [[repr(float(spec[c][i])) for c in cols] for i in range(lam.size)]
        Path(args.dump_spectrum).write_text(_csv_text(cols, rows))
    _emit(_dumps(asymptotic_report(params).to_dict()), args.output)
    return EXIT_OK


def cmd_simulate(args):
    params = ModelParams(args.nu, args.b0, args.theta0, args.delta)
    spec = SimulationSpec(
        params, args.n, seed=args.seed, method=args.method, replicate=args.replicate,
        signal=not args.no_signal,
    )
    series = simulate_observations(spec)
    if args.format == "binary":
        if not args.output:
            raise ValueError("binary output needs --output")
        write_binary(args.output, series.y)
        return EXIT_OK
    rows = [[i, repr(float(z)), repr(float(y))] for i, (z, y) in enumerate(zip(series.z, series.y))]
    _emit(_csv_text(["index", "z", "y"], rows), args.output)
    return EXIT_OK


def _parse_box(text, scan_points, grid_points):
    vals = _float_list(text)
    if len(vals) != 4:
        raise ValueError("--box needs b_lo,b_hi,theta_lo,theta_hi")
    return SearchBox(*vals, scan_points=scan_points, grid_points=grid_points)


def _diagnostics(result, y, nu, delta, box, kf):
    """Profile of the CGEM statistic and log-likelihood over the theta scan at ``b_hat``."""
    header = ["theta", "cgem_normalized", "loglik"]
    b = result.b_hat
    if not (math.isfinite(b) and b > 0):
        return _csv_text(header, [])
    rows = []
    for theta in box.theta_grid():
        kernel = kf(theta)
        quad, trA = cgem_parts(b, kernel, y, "levinson")
        rows.append([repr(float(theta)), repr((quad - trA) / trA), repr(log_likelihood(b, kernel, y, "levinson"))])
    return _csv_text(header, rows)


def cmd_estimate(args):
    y = read_series(args.input)
    tag = method_tag(args.method)
    box = _parse_box(args.box, args.scan_points, args.grid_points)
    kf = KernelFactory(args.nu, args.delta, y.size)
    res = run_method(tag, y, args.nu, args.delta, box, b0=args.b0, c0=args.c0, kernel_factory=kf)
    if args.dump_diagnostics:
        Path(args.dump_diagnostics).write_text(_diagnostics(res, y, args.nu, args.delta, box, kf))
    doc = res.to_dict()
    doc["n"] = int(y.size)
    doc["delta"] = args.delta
    _emit(_dumps(doc), args.output)
    return EXIT_OK


def cmd_mc_compare(args):
    cfg = ExperimentConfig.from_file(args.config)
    overrides = {}
    if args.threads:
        overrides["threads"] = args.threads
    if args.output_dir:
        overrides["output_dir"] = args.output_dir
    if overrides:
        cfg = ExperimentConfig.from_mapping({**_config_mapping(cfg), **overrides})
    status = EXIT_OK
    for cell in cfg.cells():
        try:
            result = run_experiment(cell, reuse=args.reuse)
        except ExclusionRateExceeded as exc:
            print(f"{cell.tag()}: {exc}", file=sys.stderr)
            status = EXIT_STAT
            continue
        report = None if cell.mode == "psi" else asymptotic_report(cell.params0)
        comparison = compare_report(result.summary, report, z_threshold=cell.z_threshold)
        write_outputs(result, comparison)
        print(comparison.to_text())
        print()
        if not comparison.passed:
            status = EXIT_STAT
    return status


def _config_mapping(cfg):
    d = dict(cfg.canonical())
    d["threads"] = cfg.threads
    d["output_dir"] = cfg.output_dir
    return d


# --------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="mcgev", description="Matérn-plus-nugget CGEM-EV and ML estimation tools."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def model_args(p, delta=True):
        p.add_argument("--nu", type=float, default=0.5)
        p.add_argument("--b0", type=float, default=1.0)
        p.add_argument("--theta0", type=float, default=1.0)
        if delta:
            p.add_argument("--delta", type=float, default=0.01)

    p = sub.add_parser("ineff", help="closed-form small-step inefficiency limit")
    p.add_argument("--nu", type=float, action="append", help="repeatable; default 1/2..4")
    p.add_argument("--output")
    p.set_defaults(func=cmd_ineff)

    p = sub.add_parser("asymptotics", help="asymptotic variances and inefficiencies")
    model_args(p)
    p.add_argument("--table", action="store_true", help="CSV of I0..I4 over a (nu, delta) grid")
    p.add_argument("--nu-list", help="comma separated, for --table")
    p.add_argument("--delta-list", default="0.1,0.03,0.01,0.003", help="for --table")
    p.add_argument("--dump-spectrum", metavar="PATH", help="write g*, g, a, h on [0, pi] as CSV")
    p.add_argument("--points", type=int, default=257, help="frequencies in --dump-spectrum")
    p.add_argument("--output")
    p.set_defaults(func=cmd_asymptotics)

    p = sub.add_parser("simulate", help="exact draw of a noisy Matérn series")
    model_args(p)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--replicate", type=int, default=0)
    p.add_argument("--method", choices=("circulant", "dense", "auto"), default="circulant")
    p.add_argument("--no-signal", action="store_true", help="pure noise (b0 = 0)")
    p.add_argument("--format", choices=("csv", "binary"), default="csv")
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="fit one series and print the result as JSON")
    p.add_argument("--method", required=True, help="ev|gev|ml|ml0|ge0|mlc|hybrid")
    p.add_argument("--input", required=True, help="CSV (column y) or MCGEV001 binary")
    p.add_argument("--nu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    known = p.add_mutually_exclusive_group()
    known.add_argument("--b0", type=float, help="known variance for ml0/ge0")
    known.add_argument("--c0", type=float, help="known microergodic parameter for mlc")
    p.add_argument("--box", default="0.01,100,0.01,100", help="b_lo,b_hi,theta_lo,theta_hi")
    p.add_argument("--scan-points", type=int, default=64)
    p.add_argument("--grid-points", type=int, default=16)
    p.add_argument("--dump-diagnostics", metavar="PATH", help="CSV profile over the theta scan")
    p.add_argument("--output")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("mc-compare", help="Monte Carlo run checked against quadrature")
    p.add_argument("--config", required=True, help="flat key = value file")
    p.add_argument("--threads", type=int, default=0, help="workers, capped by MCGEV_THREADS")
    p.add_argument("--output-dir")
    p.add_argument("--reuse", action="store_true", help="reuse raw tables with the same config hash")
    p.set_defaults(func=cmd_mc_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (CGEMError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
