"""Command-line interface: ``afc <command> [options]``.

Commands are simulate, fit, moments, validate, density-grid and replicate.
Exit status is 0 on success, 2 for configuration and input errors and 3 for
runtime failures. Two-column ``x,y`` CSV carries samples and versioned JSON
carries structured results. Errors are reported as a JSON object on stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import __version__
from .errors import (
    AFCError,
    CalibrationError,
    ConfigError,
    DensityBugError,
    DomainError,
    InsufficientDataError,
    MmeNotApplicable,
    MomentExistenceError,
    NoRootError,
    NonConvergenceError,
    NumericOverflowError,
    OutOfRangeError,
    UnsupportedFamilyError,
)
from .estimation import Method, compare_families, mle, mme, replication_study
from .families import FamilyKind, ModelParams, joint_density, marginal_quantile_x, marginal_quantile_y
from .io import SCHEMA_VERSION, dump_json, preprocess, read_sample_csv, write_grid_csv, write_json, write_sample_csv
from .moments import (
    CLOSED_FORM_FAMILIES,
    correlation_bounds,
    hoeffding_covariance_numeric,
    theoretical_moments,
)
from .sampling import (
    CopulaConfig,
    MhConfig,
    sample_copula,
    sample_exponential_inverse_transform,
    sample_mh,
)
from .validation import validate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3

_CONFIG_ERRORS = (
    ConfigError,
    DomainError,
    UnsupportedFamilyError,
    MmeNotApplicable,
    InsufficientDataError,
    OutOfRangeError,
)
_RUNTIME_ERRORS = (
    NonConvergenceError,
    NumericOverflowError,
    CalibrationError,
    NoRootError,
    MomentExistenceError,
    DensityBugError,
)


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of printing usage and exiting."""

    def error(self, message):
        raise ConfigError(message)


def _add_params(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_argument_group("model parameters")
    g.add_argument("--family", required=required, help="exponential, lomax, weibull, loglogistic, halfcauchy or gamma")
    g.add_argument("--alpha", type=float, help="X rate")
    g.add_argument("--gamma", type=float, help="Y rate at x = 0")
    g.add_argument("--tau", type=float, help="dependence parameter in [0, 1]")
    g.add_argument("--lambda", dest="lam", type=float, help="X shape")
    g.add_argument("--nu", type=float, help="Y shape")


def _params_from(args, diagnostic: bool = False) -> ModelParams:
    fam = FamilyKind.parse(args.family)
    missing = [n for n in ("alpha", "gamma", "tau") if getattr(args, n) is None]
    if fam.has_shapes:
        missing += [("lambda" if n == "lam" else n) for n in ("lam", "nu") if getattr(args, n) is None]
    if missing:
        raise ConfigError(f"missing parameters for {fam.value}: {', '.join('--' + m for m in missing)}")
    if not fam.has_shapes and (args.lam is not None or args.nu is not None):
        raise ConfigError(f"the {fam.value} family takes no shape parameters")
    return ModelParams(
        fam,
        alpha=args.alpha,
        gamma=args.gamma,
        tau=args.tau,
        lam=args.lam if fam.has_shapes else None,
        nu=args.nu if fam.has_shapes else None,
        diagnostic=diagnostic,
    )


def _seed_from(args) -> tuple[int, bool]:
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError("--seed must be non-negative")
        return int(args.seed), False
    # no silent nondeterminism: draw one and report it
    return int(np.random.SeedSequence().entropy % (2**63)), True


def _threads(args) -> int:
    env = os.environ.get("AFC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError(f"AFC_THREADS must be an integer, got {env!r}") from None
    elif args.threads is not None:
        n = args.threads
    else:
        n = os.cpu_count() or 1
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


# ---------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    p = _params_from(args)
    seed, generated = _seed_from(args)
    method = args.method or ("inverse" if p.family is FamilyKind.EXPONENTIAL else "mh")
    if method == "inverse":
        if p.family is not FamilyKind.EXPONENTIAL:
            raise ConfigError("--method inverse is available for the exponential family only")
        sample = sample_exponential_inverse_transform(p, args.n, seed)
    elif method == "copula":
        if p.family not in CLOSED_FORM_FAMILIES:
            raise ConfigError(f"--method copula needs a closed-form correlation, which {p.family.value} lacks")
        sample = sample_copula(p, args.n, CopulaConfig(v_c=args.copula_df), seed)
    else:
        sample = sample_mh(p, MhConfig(target_n=args.n, burn_in=args.burn_in, thin=args.thin), seed)
    write_sample_csv(sample, args.output)
    meta = {
        "command": "simulate",
        "tool_version": __version__,
        "seed": seed,
        "seed_generated": generated,
        "method": method,
        "provenance": sample.provenance.value,
        "metadata": sample.metadata,
    }
    meta_path = args.metadata
    if meta_path is None and args.output not in (None, "-"):
        meta_path = str(args.output) + ".meta.json"
    if meta_path is not None:
        write_json(meta, meta_path)
    elif generated:
        print(json.dumps({"seed": seed, "seed_generated": True}), file=sys.stderr)
    return EXIT_OK


def _load_data(args):
    sample = read_sample_csv(args.input, drop_invalid=args.drop_nonpositive)
    cols = {"x": ["x"], "y": ["y"], "both": ["x", "y"], None: []}
    sample = preprocess(sample, scale=cols[args.scale], log=cols[args.log], drop_nonpositive=args.drop_nonpositive)
    if sample.n < 2:
        raise InsufficientDataError("fewer than two usable rows after preprocessing")
    return sample


def cmd_fit(args) -> int:
    data = _load_data(args)
    if args.compare_all:
        rows = compare_families(data, with_mme=args.method in ("mme", "both"))
        write_json(
            {
                "command": "fit",
                "tool_version": __version__,
                "n": data.n,
                "compare_all": True,
                "ranking": [r["family"] for r in rows],
                "flagged": [r["family"] for r in rows if r.get("mle") and r["mle"]["boundary_flags"]],
                "rows": rows,
            },
            args.output,
        )
        return EXIT_OK
    if args.family is None:
        raise ConfigError("fit needs --family or --compare-all")
    fam = FamilyKind.parse(args.family)
    if args.method in ("mme", "both") and fam in (FamilyKind.HALFCAUCHY, FamilyKind.GAMMA):
        if args.method == "mme":
            raise ConfigError(f"--method mme is not available for the {fam.value} family")
    out = {"command": "fit", "tool_version": __version__, "family": fam.value, "n": data.n, "diagnostics": []}
    if args.method in ("mme", "both") and fam not in (FamilyKind.HALFCAUCHY, FamilyKind.GAMMA):
        try:
            out["mme"] = mme(fam, data).to_dict()
        except (MomentExistenceError, NoRootError) as exc:
            out["mme"] = None
            out["diagnostics"].append({"stage": "mme", "error": type(exc).__name__, "message": str(exc)})
    if args.method in ("mle", "both"):
        fit = mle(fam, data)
        out["mle"] = fit.to_dict()
        if fit.boundary_flags:
            out["boundary_flags"] = sorted(f.value for f in fit.boundary_flags)
            print(
                json.dumps({"warning": "boundary-degenerate fit", "flags": out["boundary_flags"]}),
                file=sys.stderr,
            )
    write_json(out, args.output)
    return EXIT_OK


def cmd_moments(args) -> int:
    p = _params_from(args)
    out = {"command": "moments", "tool_version": __version__, "params": p.to_dict()}
    closed = p.family in CLOSED_FORM_FAMILIES
    if closed and not args.numeric:
        out["moments"] = theoretical_moments(p).to_dict()
        lo, hi = correlation_bounds(p.family, p.lam, p.nu)
        out["correlation_bounds"] = {"rho_min": lo, "rho_max": hi}
    else:
        res = hoeffding_covariance_numeric(p, full_output=True)
        out["numeric"] = {"cov": res.cov, "error": res.error, "truncated": res.truncated, "note": res.note}
        if closed:
            out["moments"] = theoretical_moments(p).to_dict()
    write_json(out, args.output)
    return EXIT_OK


def cmd_validate(args) -> int:
    p = _params_from(args, diagnostic=args.diagnostic)
    checks = args.checks.split(",") if args.checks else None
    report = validate(p, checks)
    if args.json:
        write_json({"command": "validate", "tool_version": __version__, "report": report.to_dict()}, args.json)
    if args.format == "json":
        write_json({"command": "validate", "tool_version": __version__, "report": report.to_dict()})
    else:
        print(report.to_text())
    return EXIT_OK


def cmd_density_grid(args) -> int:
    p = _params_from(args, diagnostic=args.diagnostic)
    if args.nx < 2 or args.ny < 2:
        raise ConfigError("--nx and --ny must be at least 2")
    x_lo, x_hi = args.x_range or marginal_quantile_x(p, np.array([0.005, 0.995])).tolist()
    y_lo, y_hi = args.y_range or marginal_quantile_y(p, np.array([0.005, 0.995])).tolist()
    if not (0 < x_lo < x_hi and 0 < y_lo < y_hi):
        raise ConfigError("grid ranges must satisfy 0 < low < high")
    xs = np.linspace(x_lo, x_hi, args.nx)
    ys = np.linspace(y_lo, y_hi, args.ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    with np.errstate(all="ignore"):
        dens = np.asarray(joint_density(p, X, Y), dtype=float)
    empty = write_grid_csv(xs, ys, dens, args.output)
    meta = {
        "command": "density-grid",
        "tool_version": __version__,
        "params": p.to_dict(),
        "x_range": [x_lo, x_hi],
        "y_range": [y_lo, y_hi],
        "nx": args.nx,
        "ny": args.ny,
        "overflow_cells": empty,
        "layout": "row-major, x outer, y inner",
    }
    meta_path = args.metadata
    if meta_path is None and args.output not in (None, "-"):
        meta_path = str(args.output) + ".meta.json"
    if meta_path is not None:
        write_json(meta, meta_path)
    return EXIT_OK


def cmd_replicate(args) -> int:
    p = _params_from(args)
    seed, generated = _seed_from(args)
    method = Method(args.method)
    if method is Method.MME and p.family in (FamilyKind.HALFCAUCHY, FamilyKind.GAMMA):
        raise ConfigError(f"--method mme is not available for the {p.family.value} family")
    t0 = time.perf_counter()
    summary = replication_study(p.family, p, args.n, args.reps, method, seed=seed, threads=_threads(args))
    elapsed = time.perf_counter() - t0
    if args.format == "csv":
        fh = sys.stdout if args.output in (None, "-") else open(args.output, "w", newline="", encoding="utf-8")
        try:
            fh.write("parameter,true,mean,se,ci_low,ci_high\n")
            for r in summary.rows:
                fh.write(",".join([r["parameter"]] + [repr(float(r[k])) for k in ("true", "mean", "se", "ci_low", "ci_high")]) + "\n")
        finally:
            if fh is not sys.stdout:
                fh.close()
    else:
        write_json(
            {
                "command": "replicate",
                "tool_version": __version__,
                "seed": seed,
                "seed_generated": generated,
                "elapsed_seconds": elapsed,
                "summary": summary.to_dict(),
            },
            args.output,
        )
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="afc", description="Bivariate accelerated failure conditionals models.")
    parser.add_argument("--version", action="version", version=f"afc {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("simulate", help="draw a sample and write it as CSV")
    _add_params(s)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--method", choices=["inverse", "copula", "mh"])
    s.add_argument("--seed", type=int)
    s.add_argument("--burn-in", type=int, default=10000)
    s.add_argument("--thin", type=int, default=5)
    s.add_argument("--copula-df", type=float, default=5.0, help="degrees of freedom of the t copula")
    s.add_argument("--output", "-o", help="CSV path (default stdout)")
    s.add_argument("--metadata", help="metadata JSON path (default <output>.meta.json)")
    s.set_defaults(func=cmd_simulate)

    f = sub.add_parser("fit", help="estimate parameters from an x,y CSV")
    f.add_argument("--input", "-i", required=True)
    f.add_argument("--family")
    f.add_argument("--method", choices=["mle", "mme", "both"], default="mle")
    f.add_argument("--compare-all", action="store_true", help="fit every family and rank by AIC")
    f.add_argument("--scale", choices=["x", "y", "both"], help="divide the column(s) by their maximum")
    f.add_argument("--log", choices=["x", "y", "both"], help="log-transform the column(s) before scaling")
    f.add_argument(
        "--drop-nonpositive", action="store_true", help="drop rows that are missing or non-positive before or after transforms"
    )
    f.add_argument("--output", "-o")
    f.set_defaults(func=cmd_fit)

    m = sub.add_parser("moments", help="moments and correlation bounds")
    _add_params(m)
    m.add_argument("--numeric", action="store_true", help="use the Hoeffding quadrature")
    m.add_argument("--output", "-o")
    m.set_defaults(func=cmd_moments)

    v = sub.add_parser("validate", help="numeric validity checks")
    _add_params(v)
    v.add_argument("--diagnostic", action="store_true", help="allow out-of-contract tau for demonstration")
    v.add_argument("--checks", help="comma-separated subset of checks")
    v.add_argument("--format", choices=["text", "json"], default="text")
    v.add_argument("--json", help="also write the JSON report to this path")
    v.set_defaults(func=cmd_validate)

    d = sub.add_parser("density-grid", help="joint density on a rectangular grid")
    _add_params(d)
    d.add_argument("--nx", type=int, default=100)
    d.add_argument("--ny", type=int, default=100)
    d.add_argument("--x-range", type=float, nargs=2, metavar=("LO", "HI"))
    d.add_argument("--y-range", type=float, nargs=2, metavar=("LO", "HI"))
    d.add_argument("--diagnostic", action="store_true")
    d.add_argument("--output", "-o")
    d.add_argument("--metadata")
    d.set_defaults(func=cmd_density_grid)

    r = sub.add_parser("replicate", help="simulate-and-fit replication study")
    _add_params(r)
    r.add_argument("--n", type=int, required=True)
    r.add_argument("--reps", type=int, required=True)
    r.add_argument("--method", choices=["mle", "mme"], default="mle")
    r.add_argument("--seed", type=int)
    r.add_argument("--threads", type=int, help="worker processes (default: machine parallelism; AFC_THREADS overrides)")
    r.add_argument("--format", choices=["json", "csv"], default="json")
    r.add_argument("--output", "-o")
    r.set_defaults(func=cmd_replicate)
    return parser


def _error(exc: BaseException, code: int) -> int:
    payload = {
        "schema_version": SCHEMA_VERSION,
        "error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code},
    }
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("a command is required: " + ", ".join(
                ["simulate", "fit", "moments", "validate", "density-grid", "replicate"]))
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        return _error(exc, EXIT_CONFIG)
    except FileNotFoundError as exc:
        return _error(exc, EXIT_CONFIG)
    except _RUNTIME_ERRORS as exc:
        return _error(exc, EXIT_RUNTIME)
    except AFCError as exc:
        return _error(exc, EXIT_RUNTIME)
    except (FloatingPointError, ArithmeticError) as exc:
        return _error(exc, EXIT_RUNTIME)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
