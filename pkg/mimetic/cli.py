"""
Command line front-end.

    mimetic solve --case lid2d --elements 2 --degree 8
    mimetic converge --degrees 2 3 --elements 2 4 8 16
    mimetic check

Exit codes: 0 success, 1 compute failure (or a failed check), 2 usage error.
"""
import argparse
import csv
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from mimetic.analysis import FAULTS, convergence_study, error_norms, structure_checks
from mimetic.errors import ConfigurationError, ConvergenceError, MimeticError
from mimetic.mimetic import grid
from mimetic.model import (CASES, ERROR_COLUMNS, CaseConfig, StokesCase, threads_from_environment)
from mimetic.solver import sample, sample_slices, solve_case
from mimetic.topology import DIRECTIONS, coboundary, export_matrix

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DIVERGENCE_TOLERANCE = 1e-10
LOG_FORMAT = "%(levelname)s %(name)s: %(message)s"


def _number(value):
    return "%.12e" % value


#################################################
# WRITERS                                       #
#################################################

def _components(array, vector):
    return list(array) if vector else [array]


def write_fields_csv(path, sampled, dim):
    coords = grid(sampled.axes)
    omega = _components(sampled.omega, dim == 3)
    names = list("xyz"[:dim])
    names += ["omega_%s" % a for a in "xyz"] if dim == 3 else ["omega"]
    names += ["u_%s" % a for a in "xyz"[:dim]] + ["p", "div_u"]
    columns = coords + omega + list(sampled.velocity) + [sampled.pressure, sampled.divergence]
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(names)
        for row in zip(*[np.ravel(c) for c in columns]):
            writer.writerow([_number(v) for v in row])


def write_vtk(path, sampled, dim, title):
    """
    Legacy ASCII structured-points file, x fastest.
    """
    axes = list(sampled.axes) + [np.zeros(1)] * (3 - dim)
    shape = [len(a) for a in axes]
    spacing = [(a[-1] - a[0]) / (len(a) - 1) if len(a) > 1 else 1.0 for a in axes]
    count = int(np.prod(shape))

    def vectors(array):
        parts = [np.ravel(c) for c in array] + [np.zeros(count)] * (3 - dim)
        return ["%s %s %s" % tuple(_number(v) for v in row) for row in zip(*parts)]

    def scalars(array):
        return [_number(v) for v in np.ravel(array)]

    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET STRUCTURED_POINTS",
             "DIMENSIONS %d %d %d" % tuple(shape),
             "ORIGIN %s %s %s" % tuple(_number(a[0]) for a in axes),
             "SPACING %s %s %s" % tuple(_number(s) for s in spacing),
             "POINT_DATA %d" % count]
    if dim == 3:
        lines += ["VECTORS omega double"] + vectors(sampled.omega)
    else:
        lines += ["SCALARS omega double 1", "LOOKUP_TABLE default"] + scalars(sampled.omega)
    lines += ["VECTORS velocity double"] + vectors(sampled.velocity)
    lines += ["SCALARS pressure double 1", "LOOKUP_TABLE default"] + scalars(sampled.pressure)
    lines += ["SCALARS div_u double 1", "LOOKUP_TABLE default"] + scalars(sampled.divergence)
    Path(path).write_text("\n".join(lines) + "\n")


def slice_columns(axis, dim):
    """
    Header of slices.csv: the slice coordinate first, then the in-plane ones.
    """
    in_plane = [DIRECTIONS[d] for d in range(dim) if d != axis]
    return ["fraction", DIRECTIONS[axis]] + in_plane + ["speed", "div_u"]


def write_slices_csv(path, slices):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        for i, s in enumerate(slices):
            if i == 0:
                writer.writerow(slice_columns(s.axis, len(s.axes) + 1))
            columns = [np.ravel(a) for a in grid(s.axes)] + [np.ravel(s.speed), np.ravel(s.divergence)]
            for row in zip(*columns):
                writer.writerow(["%g" % s.fraction, _number(s.coordinate)] + [_number(v) for v in row])


def write_errors_csv(path, report):
    """
    One row per (N, K); fitted rates as `rate` footer rows; `#` comments
    mark a partial sweep.
    """
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(ERROR_COLUMNS)
        for entry in report.entries:
            writer.writerow([v if column in ("dim", "N", "K") else _number(v)
                             for column, v in zip(ERROR_COLUMNS, entry.row())])
        for fit in report.rates:
            writer.writerow(["rate", fit.N, fit.field,
                             "" if fit.rate is None else "%.4f" % fit.rate,
                             "" if fit.residual is None else "%.3e" % fit.residual, fit.status])
        if report.partial:
            for failure in report.failures:
                f.write("# partial sweep: %s\n" % failure)


def write_summary(path, summary):
    Path(path).write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")


#################################################
# COMMANDS                                      #
#################################################

def _report_checks(results):
    for result in results:
        print(result.line())
    failed = [r for r in results if not r.passed]
    if failed:
        log.error("%d of %d checks failed", len(failed), len(results))
    return 1 if failed else 0


def _export_matrices(out, solution):
    c = solution.complex
    names = ("rot", "D") if c.dim == 2 else ("G", "C", "D")
    for k, name in enumerate(names):
        export_matrix(out / ("%s.mtx" % name), coboundary(c, k, outer=True))
    solution.system.export(out / "system.mtx")


def cmd_solve(config):
    if config.structure_check and _report_checks(structure_checks()) != 0:
        return 1
    case = StokesCase.create(config.case)
    solution = solve_case(case, config.mesh_elements, config.degree)
    c = solution.complex
    sampled = sample(solution, config.resolution)

    max_velocity = float(np.max(np.sqrt(np.sum(sampled.velocity ** 2, axis=0))))
    max_div = float(np.max(np.abs(sampled.divergence)))
    n_w, n_free, n_p, n_gauge = solution.system.sizes
    summary = {
        "schema_version": SCHEMA_VERSION,
        "case": config.case,
        "dim": c.dim,
        "elements": list(c.spec.elements),
        "degree": c.degree,
        "resolution": config.resolution,
        "dofs": {"vorticity": n_w, "velocity": c.counts[c.dim - 1], "velocity_free": n_free,
                 "pressure": n_p, "unknowns": n_w + n_free + n_p + n_gauge},
        "solver": {"residual": solution.residual, "factor_nnz": solution.stats["factor_nnz"]},
        "max_div": max_div,
        "max_velocity": max_velocity,
        "relative_max_div": max_div / max_velocity if max_velocity > 0 else max_div,
        "divergence_free": max_div <= DIVERGENCE_TOLERANCE * max(max_velocity, 1e-300),
    }
    if case.exact is not None:
        entry = error_norms(solution, case.exact)
        summary["errors"] = dict(zip(ERROR_COLUMNS, entry.row()))

    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    title = "mimetic %s K=%s N=%d" % (config.case, "x".join(str(k) for k in c.spec.elements), c.degree)
    write_fields_csv(out / "fields.csv", sampled, c.dim)
    write_vtk(out / "fields.vtk", sampled, c.dim, title)
    if c.dim == 3:
        write_slices_csv(out / "slices.csv", sample_slices(solution, resolution=config.resolution))
    if config.export_matrices:
        _export_matrices(out, solution)
    write_summary(out / "summary.json", summary)
    log.info("max |div u_h| = %.3e, max |u_h| = %.3e; wrote %s", max_div, max_velocity, out)
    return 0


def cmd_converge(config):
    case = StokesCase.create(config.case)
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    try:
        report = convergence_study(case, config.degrees, config.elements, threads=config.threads)
    except ConvergenceError as e:
        write_errors_csv(out / "errors.csv", e.report)
        raise
    write_errors_csv(out / "errors.csv", report)
    for fit in report.rates:
        log.info("N=%d %s: rate %s (%s)", fit.N, fit.field,
                 "n/a" if fit.rate is None else "%.3f" % fit.rate, fit.status)
    log.info("wrote %s", out / "errors.csv")
    return 0


def cmd_check(config):
    return _report_checks(structure_checks(inject_fault=config.inject_fault))


COMMANDS = {"solve": cmd_solve, "converge": cmd_converge, "check": cmd_check}


#################################################
# ENTRY POINT                                   #
#################################################

def build_parser():
    parser = argparse.ArgumentParser(prog="mimetic",
                                     description="Mimetic spectral element Stokes solver.")
    commands = parser.add_subparsers(dest="command", required=True)

    def common(sub):
        sub.add_argument("--config", help="JSON file with defaults; flags override it")
        sub.add_argument("--out", help="output directory (default: out)")
        sub.add_argument("--verbose", action="store_true", default=None, help="debug logging")
        sub.add_argument("--inject-fault", choices=FAULTS, default=None, help=argparse.SUPPRESS)

    solve = commands.add_parser("solve", help="solve one case and write fields")
    common(solve)
    solve.add_argument("--case", choices=sorted(CASES))
    solve.add_argument("--elements", type=int, nargs="+", help="elements per direction (1 or dim counts)")
    solve.add_argument("--degree", type=int, help="polynomial degree N")
    solve.add_argument("--resolution", type=int, help="sampling intervals per direction (default 50)")
    solve.add_argument("--paper-size", action="store_true", default=None, help="K=2, N=8 for the lid cases")
    solve.add_argument("--structure-check", action="store_true", default=None,
                       help="run the check suite before solving")
    solve.add_argument("--export-matrices", action="store_true", default=None,
                       help="write incidence matrices and the system in Matrix Market format")

    converge = commands.add_parser("converge", help="h-convergence sweep of the manufactured case")
    common(converge)
    converge.add_argument("--case", choices=sorted(CASES))
    converge.add_argument("--elements", type=int, nargs="+", help="element counts K to sweep")
    converge.add_argument("--degrees", type=int, nargs="+", help="polynomial degrees N to sweep")

    check = commands.add_parser("check", help="run the structural invariant suite")
    common(check)
    return parser


def _configure_logging(verbose):
    logger = logging.getLogger("mimetic")
    for handler in [h for h in logger.handlers if getattr(h, "_mimetic_cli", False)]:
        logger.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    handler._mimetic_cli = True
    logger.addHandler(handler)
    logger.setLevel(logging.DEBUG if verbose else logging.INFO)


def _load_config(path):
    try:
        with open(path) as f:
            values = json.load(f)
    except (OSError, ValueError) as e:
        raise ConfigurationError("Cannot read configuration %s: %s" % (path, e))
    if not isinstance(values, dict):
        raise ConfigurationError("Configuration %s must hold a JSON object." % path)
    return values


def merged_config(args, environ):
    """
    Defaults < JSON file < flags; MIMETIC_THREADS sets the worker count.
    """
    values = _load_config(args.config) if args.config else {}
    for key, value in vars(args).items():
        if key not in ("command", "config") and value is not None:
            values[key] = value
    if environ.get("MIMETIC_THREADS"):
        values["threads"] = threads_from_environment(environ)
    return CaseConfig.create(values, args.command)


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        try:
            config = merged_config(args, os.environ)
        except ConfigurationError as e:
            parser.error(str(e))
    except SystemExit as e:
        return e.code
    _configure_logging(config.verbose)
    try:
        return COMMANDS[config.command](config)
    except MimeticError as e:
        log.error("%s", e)
        return 1
