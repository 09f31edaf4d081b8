"""Command-line entry points: ``penpath {path, limit, mc, check}``.

Exit codes: 0 success, 1 usage or validation error, 2 computational
failure, 3 a statistical threshold failed (the report is still written).
Diagnostics go to standard error; ``check`` prints a JSON summary on
standard output.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import checks, limitprocess, montecarlo, pathsolvers
from .contrasts import ContrastSpec
from .errors import (
    CostLimitError,
    GuardError,
    IndefiniteMatrixError,
    SolverError,
    UnsupportedModelError,
    ValidationError,
)
from .linmodel import read_csv
from .penalties import PenaltySpec

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_COMPUTE = 2
EXIT_STATISTICAL = 3

COMPUTE_ERRORS = (SolverError, GuardError, CostLimitError, IndefiniteMatrixError, UnsupportedModelError)


class UsageError(Exception):
    """Bad command-line usage; maps to exit status 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_penalty(text):
    """``l1``, ``l2``, ``l0`` or ``lq:<gamma>`` to an exponent."""
    named = {"l1": 1.0, "l2": 2.0, "l0": 0.0}
    if text in named:
        return named[text]
    if text.startswith("lq:"):
        try:
            gamma = float(text[3:])
        except ValueError:
            raise UsageError(f"bad penalty exponent in {text!r}") from None
        if not gamma >= 0:
            raise UsageError(f"penalty exponent must be >= 0, got {text!r}")
        return gamma
    raise UsageError(f"unknown penalty {text!r}; use l1, l2, l0 or lq:<gamma>")


def _parse_beta(text):
    try:
        beta = np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise UsageError(f"--beta must be a comma-separated list of numbers, got {text!r}") from None
    if not np.all(np.isfinite(beta)):
        raise UsageError("--beta entries must be finite")
    return beta


def _parse_cov(text, p):
    """``identity:<p>`` or a CSV file holding the p x p design second moment."""
    if text.startswith("identity:"):
        try:
            dim = int(text.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad identity dimension in {text!r}") from None
        if dim != p:
            raise UsageError(f"--cov identity:{dim} does not match --beta of length {p}")
        return np.eye(p)
    path = Path(text)
    if not path.is_file():
        raise UsageError(f"covariance file not found: {text}")
    try:
        cov = np.loadtxt(path, delimiter=",", ndmin=2)
    except ValueError as exc:
        raise UsageError(f"cannot parse covariance file {text}: {exc}") from None
    if cov.shape != (p, p):
        raise UsageError(f"covariance must be {p}x{p}, got {cov.shape[0]}x{cov.shape[1]}")
    if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
        raise UsageError("covariance must be symmetric")
    return cov


def _grid(tmax, count):
    if tmax is None or not tmax > 0:
        raise UsageError("--tmax must be a positive number")
    if count < 2:
        raise UsageError("--tgrid needs at least 2 points")
    return pathsolvers.TGrid.uniform(tmax, count)


def _with_midpoints(sol, contrast, sample):
    """Re-evaluate an exact path at its knots and at the midpoint of every segment.

    Between knots the lasso path is linear and the l0 path constant, so these
    rows describe the whole path.
    """
    knots = sol.tgrid.points
    pts = np.unique(np.concatenate([knots, 0.5 * (knots[1:] + knots[:-1])]))
    grid = pathsolvers.TGrid(pts, "breakpoints")
    if sol.diagnostics.get("solver") == "homotopy":
        dense = pathsolvers.lasso_path(sample, lambda_n=sol.diagnostics["lambda_n"], tgrid=grid)
    else:
        dense = pathsolvers.l0_path(contrast, sample, float(pts[-1]), tgrid=grid)
    return dataclasses.replace(dense, breakpoints=sol.breakpoints)


def cmd_path(args) -> int:
    data = Path(args.data)
    if not data.is_file():
        raise UsageError(f"data file not found: {data}")
    sample = read_csv(data)
    contrast = ContrastSpec.parse(args.contrast)
    gamma = _parse_penalty(args.penalty)
    exact = args.exact
    if exact and not (gamma == 0 or (gamma == 1 and contrast.kind == "least_squares")):
        raise UsageError("--exact is available for --penalty l0 and for --contrast ls with --penalty l1")
    if gamma == 0:
        if args.tmax is None or not args.tmax > 0:
            raise UsageError("--tmax must be a positive number")
        tgrid = None if exact else _grid(args.tmax, args.tgrid)
        sol = pathsolvers.l0_path(contrast, sample, args.tmax, tgrid=tgrid)
    elif gamma == 1 and contrast.kind == "least_squares":
        if exact:
            if args.tmax is not None and not args.tmax > 0:
                raise UsageError("--tmax must be a positive number")
            sol = pathsolvers.lasso_path(sample, t_max=args.tmax)
        else:
            sol = pathsolvers.lasso_path(sample, tgrid=_grid(args.tmax, args.tgrid))
    elif gamma == 2 and contrast.kind == "least_squares":
        sol = pathsolvers.ridge_path(sample, tgrid=_grid(args.tmax, args.tgrid))
    else:
        if gamma not in (1.0, 2.0):
            raise UsageError("path solves support the exponents 0, 1 and 2")
        penalty = PenaltySpec(int(gamma), sample.n)
        sol = pathsolvers.grid_path(contrast, penalty, sample, _grid(args.tmax, args.tgrid), args.tol)
    if exact:
        sol = _with_midpoints(sol, contrast, sample)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pathsolvers.write_path_csv(sol, out / "path.csv", out / "breakpoints.json")
    print(f"wrote {out / 'path.csv'} ({len(sol.tgrid)} rows)", file=sys.stderr)
    return EXIT_OK


def cmd_limit(args) -> int:
    if args.draws < 1:
        raise UsageError("--draws must be at least 1")
    beta = _parse_beta(args.beta)
    cov = _parse_cov(args.cov, beta.size)
    if not args.sigma2 > 0:
        raise UsageError("--sigma2 must be positive")
    if not args.gamma >= 0:
        raise UsageError("--gamma must be >= 0")
    tgrid = _grid(args.tmax, args.tgrid)
    draws = limitprocess.sample_lasso_limit_paths(beta, cov, args.sigma2, args.gamma, tgrid, args.draws, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    limitprocess.write_limit_csv(draws, out / "limit_draws.csv")
    print(f"wrote {out / 'limit_draws.csv'} ({args.draws} draws)", file=sys.stderr)
    return EXIT_OK


def cmd_mc(args) -> int:
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    try:
        cfg = montecarlo.ExperimentConfig.load(args.config)
    except montecarlo.ConfigError as exc:
        where = exc.pointer or "/"
        print(f"config error at {where}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    report = montecarlo.run_experiment(cfg, workers=args.workers)
    montecarlo.write_report(report, args.out)
    for check in report["checks"]:
        status = "pass" if check["passed"] else "FAIL"
        print(f"{status} {check['name']}: {check['value']!r} (threshold {check['threshold']!r})", file=sys.stderr)
    return EXIT_OK if report["passed"] else EXIT_STATISTICAL


def cmd_check(args) -> int:
    names = args.suite or list(checks.SUITES)
    unknown = [n for n in names if n not in checks.SUITES]
    if unknown:
        raise UsageError(f"unknown suite {unknown[0]!r}; valid suites: {', '.join(checks.SUITES)}")
    results = checks.run_suites(names)
    passed = all(r["passed"] for rows in results.values() for r in rows)
    summary = {
        "passed": passed,
        "suites": {
            name: {"passed": all(r["passed"] for r in rows), "results": rows} for name, rows in results.items()
        },
    }
    print(json.dumps(summary, indent=2, sort_keys=True))
    for name, rows in results.items():
        for r in rows:
            if not r["passed"]:
                print(f"FAIL {r['name']}: {r['value']!r} (threshold {r['threshold']!r})", file=sys.stderr)
    return EXIT_OK if passed else EXIT_COMPUTE


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="penpath", description="Penalized regularization paths and their limit processes.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("path", help="compute a regularization path from a data CSV")
    p.add_argument("--data", required=True, help="CSV with header y,x1,...,xp")
    p.add_argument("--contrast", choices=["ls", "lad", "logistic", "poisson"], default="ls")
    p.add_argument("--penalty", default="l1", help="l1, l2, l0 or lq:<gamma>")
    p.add_argument("--tmax", type=float, default=None, help="largest t (exact lasso paths default to t_zero)")
    grid = p.add_mutually_exclusive_group()
    grid.add_argument("--tgrid", type=int, default=pathsolvers.DEFAULT_GRID_POINTS, help="number of uniform grid points")
    grid.add_argument("--exact", action="store_true", help="exact breakpoints (lasso homotopy or l0 envelope)")
    p.add_argument("--seed", type=int, default=0, help="accepted for a uniform interface; path solves use no randomness")
    p.add_argument("--tol", type=float, default=1e-8, help="KKT tolerance of grid solves")
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_path)

    p = sub.add_parser("limit", help="sample limit-process paths of the least-squares contrast")
    p.add_argument("--beta", required=True, help="comma-separated true coefficients")
    p.add_argument("--cov", required=True, help="identity:<p> or a CSV file with the design second moment")
    p.add_argument("--sigma2", type=float, default=1.0, help="noise variance")
    p.add_argument("--gamma", type=float, required=True, help="penalty exponent")
    p.add_argument("--draws", type=int, required=True)
    p.add_argument("--tmax", type=float, default=5.0)
    p.add_argument("--tgrid", type=int, default=pathsolvers.DEFAULT_GRID_POINTS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_limit)

    p = sub.add_parser("mc", help="run a Monte Carlo experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default=".", help="output directory")
    p.set_defaults(func=cmd_mc)

    p = sub.add_parser("check", help="run the invariant suites")
    p.add_argument("--suite", action="append", help=f"one of {', '.join(checks.SUITES)} (repeatable)")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ValidationError) as exc:
        print(f"penpath {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except COMPUTE_ERRORS as exc:
        print(f"penpath {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
