"""Command-line front end: ``potts-sdpi <subcommand> [flags]``.

Exit codes: 0 success, 2 bad arguments, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from typing import Any, Sequence

import numpy as np

from . import __version__
from .applications import (
    ISO_COLUMNS,
    SBM_COLUMNS,
    SbmParams,
    isoperimetry_table,
    sbm_point,
    sbm_region_sweep,
)
from .contraction import (
    SWEEP_COLUMNS,
    alpha_1_lower,
    alpha_1_upper,
    alpha_2_closed,
    alpha_p,
    b_check,
    eta_kl_potts_restricted,
    eta_kl_potts_unrestricted,
    eta_kl_restricted_general,
    eta_skl_potts_symmetric,
    eta_skl_restricted,
    eta_tv,
    eta_upper_bounds,
    s_hat,
    sweep_csv,
)
from .potts_core import (
    DomainError,
    NumericalError,
    SizeError,
    b_p_curve,
    binary_asymmetric_matrix,
    check_lambda,
    coloring_matrix,
    potts_matrix,
    s_lambda_curve,
    stationary_distribution,
    uniform,
)
from .tree_recon import TreeSpec, nonreconstruction_certificate, population_dynamics

EXIT_OK, EXIT_ARGS, EXIT_NUMERIC = 0, 2, 3
SIG = 12


def fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.{SIG}g}"


def _round(x):
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return str(x)
        return float(f"{x:.{SIG}g}")
    return x


def to_json(inputs: dict, outputs: dict, meta: dict) -> str:
    doc = {"inputs": _round(inputs), "outputs": _round(outputs),
           "meta": _round({"version": __version__, **meta})}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def to_csv(columns: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r[c]) for c in columns])
    return buf.getvalue()


def vars_of(args, *names) -> dict:
    return {n: getattr(args, n, None) for n in names}


def _table(args, columns: Sequence[str], rows: Sequence[dict], inputs: dict) -> str:
    """Tabular output: CSV, or JSON with the rows under ``outputs.rows``."""
    if args.format == "csv":
        return to_csv(columns, rows)
    return to_json(inputs, {"rows": [{c: r[c] for c in columns} for r in rows]},
                   {"tol": args.tol, "threads": args.threads})


# ---------------------------------------------------------------------------
# subcommands; each returns the text to write
# ---------------------------------------------------------------------------

def _lam(args) -> float:
    if args.coloring:
        return -1.0 / (args.k - 1)
    if args.lam is None:
        raise DomainError("--lambda (or --coloring) is required")
    check_lambda(args.k, args.lam)
    return args.lam


def cmd_eta(args) -> str:
    k = args.k
    if args.sweep:
        lams = np.linspace(-1.0 / (k - 1), 1.0, args.sweep)
        rows = []
        for lam in lams:
            r = eta_kl_potts_restricted(k, lam, args.tol, args.grid)
            rows.append((k, lam, "eta_restricted", r.value, r.arg, r.tol_achieved))
            rows.append((k, lam, "eta_unrestricted", eta_kl_potts_unrestricted(k, lam), None, 0.0))
        return sweep_csv(rows)
    lam = _lam(args)
    r = eta_kl_potts_restricted(k, lam, args.tol, args.grid)
    out = {
        "restricted": r.value,
        "argmax": r.arg,
        "unrestricted": eta_kl_potts_unrestricted(k, lam),
        "tv": eta_tv(potts_matrix(k, lam)),
        "lambda_squared": lam * lam,
        "upper_bound": eta_upper_bounds(k, lam) if k >= 3 else None,
    }
    if args.format == "csv":
        return sweep_csv([(k, lam, name, v, None, 0.0) for name, v in out.items()
                          if v is not None and name != "argmax"])
    return to_json({"k": k, "lambda": lam}, out,
                   {"tol": args.tol, "grid": args.grid, "evaluations": r.evaluations,
                    "tol_achieved": r.tol_achieved})


def cmd_alpha(args) -> str:
    k, p = args.k, args.p
    r = alpha_p(k, p, args.tol, args.grid)
    out: dict[str, Any] = {"alpha_p": r.value, "argmin": r.arg}
    if p == 2:
        out["alpha_2_closed"] = alpha_2_closed(k)
    if k >= 3:
        out["alpha_1_lower"] = alpha_1_lower(k)
        out["alpha_1_upper"] = alpha_1_upper(k)
    if args.format == "csv":
        return sweep_csv([(k, p, name, v, None, 0.0) for name, v in out.items() if name != "argmin"])
    return to_json({"k": k, "p": p}, out,
                   {"tol": args.tol, "grid": args.grid, "evaluations": r.evaluations})


def cmd_curve(args) -> str:
    k = args.k
    if args.kind in ("b", "b_check"):
        if args.p is None:
            raise DomainError("--p is required for b curves")
        f, env = b_p_curve(k, args.p), b_check(k, args.p)
    else:
        lam = _lam(args)
        f, env = s_lambda_curve(k, lam), s_hat(k, lam)
    if args.breakpoints:
        if args.format == "csv":
            return env.to_csv()
        pts = [{"x": x, "y": y} for x, y in zip(env.xs, env.ys)]
        return _table(args, ("x", "y"), pts, vars_of(args, "k", "lam", "p", "kind"))
    top = env.b if args.kind in ("b", "b_check") else math.log(k)
    ys = np.linspace(0.0, top, args.points)
    fv = np.asarray(f(ys))
    ev = np.asarray(env(ys))
    rows = [{"y": y, "curve": a, "envelope": b} for y, a, b in zip(ys, fv, ev)]
    return _table(args, ("y", "curve", "envelope"), rows, vars_of(args, "k", "lam", "p", "kind"))


def cmd_compare_skl(args) -> str:
    rows = []
    if args.channel == "binary":
        for b in np.linspace(0.0, 1.0, args.points):
            M = binary_asymmetric_matrix(args.a, b)
            q = stationary_distribution(M) if args.a + b > 0 else np.array([0.5, 0.5])
            ekl = eta_kl_restricted_general(M, q, args.tol).value
            eskl = eta_skl_restricted(M, q, args.tol).value
            rows.append({"param": b, "eta_kl": ekl, "eta_skl": eskl, "diff": eskl - ekl})
    else:
        k = args.k
        for lam in np.linspace(-1.0 / (k - 1), 1.0, args.points):
            ekl = eta_kl_potts_restricted(k, lam, args.tol, args.grid).value
            eskl = eta_skl_potts_symmetric(k, lam, args.tol, args.grid).value
            rows.append({"param": lam, "eta_kl": ekl, "eta_skl": eskl, "diff": eskl - ekl})
    return _table(args, ("param", "eta_kl", "eta_skl", "diff"), rows,
                  vars_of(args, "channel", "k", "a", "points"))


def _channel(args):
    if args.coloring or (args.lam is not None and abs(args.lam + 1.0 / (args.k - 1)) < 1e-15):
        return coloring_matrix(args.k)
    return potts_matrix(args.k, _lam(args))


def cmd_tree_cert(args) -> str:
    M = _channel(args)
    tree = TreeSpec.parse(args.tree)
    c = nonreconstruction_certificate(M, uniform(args.k), tree)
    out = {"eta": c.eta, "br": c.br, "product": c.product, "certified": c.certified}
    return to_json({"k": args.k, "lambda": _lam(args), "tree": str(tree)}, out, {"tol": args.tol})


def cmd_tree_sim(args) -> str:
    M = _channel(args)
    res = population_dynamics(M, args.d, args.k, args.depth, args.pool_size, args.seed,
                              galton_watson=args.gw, threads=args.threads)
    rows = [dict(zip(("h", "I_estimate", "std_err", "N", "seed"), r)) for r in res.rows()]
    return _table(args, ("h", "I_estimate", "std_err", "N", "seed"), rows,
                  vars_of(args, "k", "lam", "d", "depth", "pool_size", "seed", "gw"))


def cmd_sbm_region(args) -> str:
    rows = sbm_region_sweep(args.k, args.a_max, args.b_max, args.step, threads=args.threads)
    return _table(args, SBM_COLUMNS, rows, vars_of(args, "k", "a_max", "b_max", "step"))


def cmd_sbm_point(args) -> str:
    if args.a is None or args.b is None:
        raise DomainError("--a and --b are required")
    out = sbm_point(SbmParams(args.a, args.b, args.k))
    return to_json({"k": args.k, "a": args.a, "b": args.b}, out, {"tol": args.tol})


def cmd_isoperimetry(args) -> str:
    return _table(args, ISO_COLUMNS, isoperimetry_table(args.k, args.n), vars_of(args, "k", "n"))


def cmd_selftest(args) -> str:
    from .selftest import run_selftest

    lines, ok = run_selftest()
    text = "".join(line + "\n" for line in lines)
    if not ok:
        raise NumericalError("selftest failed\n" + text)
    return text


# ---------------------------------------------------------------------------
# verification of emitted CSV files
# ---------------------------------------------------------------------------

def _close(a: str, b, rtol: float = 1e-9) -> bool:
    if a == "NA" or b is None:
        return a == "NA" and b is None
    if a in ("true", "false"):
        return (a == "true") == bool(b)
    x, y = float(a), float(b)
    return abs(x - y) <= rtol * max(1.0, abs(x), abs(y))


def verify_csv(text: str, limit: int = 200) -> dict:
    """Parse a CSV produced by this tool and recompute what is cheap to recompute."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DomainError("empty CSV")
    header, body = tuple(rows[0]), [r for r in rows[1:] if r]
    checked = mismatches = 0
    if header == SBM_COLUMNS:
        kind = "sbm-region"
        for r in body[:limit]:
            a, b = float(r[0]), float(r[1])
            lam = float(r[3])
            k = int(round(1 + (a - b - lam * a) / (lam * b))) if lam != 0 and b > 0 else None
            if k is None or k < 2:
                continue
            p = sbm_point(SbmParams(a, b, k))
            checked += 1
            if not all(_close(r[i], p[c], 1e-8) for i, c in enumerate(SBM_COLUMNS)):
                mismatches += 1
    elif header == ISO_COLUMNS:
        kind = "isoperimetry"
        cache: dict = {}
        for r in body[:limit]:
            k, n, m = int(r[0]), int(r[1]), int(r[2])
            if (k, n) not in cache:
                cache[(k, n)] = isoperimetry_table(k, n)
            ref = cache[(k, n)][m]
            checked += 1
            if not all(_close(r[i], ref[c], 1e-8) for i, c in enumerate(ISO_COLUMNS)):
                mismatches += 1
    elif header == SWEEP_COLUMNS:
        kind = "sweep"
        for r in body[:limit]:
            k, par, name, val = int(r[0]), float(r[1]), r[2], r[3]
            ref = {"eta_restricted": lambda: eta_kl_potts_restricted(k, par).value,
                   "restricted": lambda: eta_kl_potts_restricted(k, par).value,
                   "eta_unrestricted": lambda: eta_kl_potts_unrestricted(k, par),
                   "unrestricted": lambda: eta_kl_potts_unrestricted(k, par),
                   "alpha_p": lambda: alpha_p(k, par).value}.get(name)
            if ref is None:
                continue
            checked += 1
            if not _close(val, ref(), 1e-8):
                mismatches += 1
    elif header in (("h", "I_estimate", "std_err", "N", "seed"), ("x", "y"),
                    ("y", "curve", "envelope"), ("param", "eta_kl", "eta_skl", "diff")):
        kind = {"h": "tree-sim", "x": "breakpoints", "y": "curve", "param": "compare-skl"}[header[0]]
        for r in body:
            [float(v) for v in r]
        if kind == "compare-skl":
            for r in body:
                checked += 1
                if abs(float(r[2]) - float(r[1]) - float(r[3])) > 1e-9:
                    mismatches += 1
    else:
        raise DomainError(f"unrecognized CSV header {','.join(header)}")
    return {"kind": kind, "rows": len(body), "checked": checked, "mismatches": mismatches,
            "verified": mismatches == 0}


# ---------------------------------------------------------------------------
# parser and dispatch
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ARGS, f"{self.prog}: error: {message}\n")


def _threads_default() -> int:
    env = os.environ.get("POTTS_SDPI_THREADS")
    return int(env) if env and env.isdigit() else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--k", type=int, default=3)
    common.add_argument("--lambda", dest="lam", type=float)
    common.add_argument("--coloring", action="store_true", help="use lambda = -1/(k-1)")
    common.add_argument("--p", type=float)
    common.add_argument("--a", type=float)
    common.add_argument("--b", type=float)
    common.add_argument("--tol", type=float, default=1e-10)
    common.add_argument("--grid", type=int, default=2048)
    common.add_argument("--seed", type=int, default=1)
    common.add_argument("--threads", type=int, default=_threads_default())
    common.add_argument("--format", choices=("csv", "json"), default="json")
    common.add_argument("--output", "-o", help="output path (default: standard output)")

    p = _Parser(prog="potts-sdpi", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--from-csv", metavar="PATH", help="verify a CSV file emitted by this tool")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("eta", parents=[common], help="contraction coefficients")
    s.add_argument("--sweep", type=int, metavar="N", help="CSV sweep over N lambda values")
    s.set_defaults(func=cmd_eta)

    s = sub.add_parser("alpha", parents=[common], help="log-Sobolev constants")
    s.set_defaults(func=cmd_alpha, p=2.0)

    s = sub.add_parser("curve", parents=[common], help="tabulate b_p, s_lambda and their envelopes")
    s.add_argument("--kind", choices=("b", "s", "s_hat", "b_check"), default="s")
    s.add_argument("--points", type=int, default=201)
    s.add_argument("--breakpoints", action="store_true", help="emit envelope breakpoints instead")
    s.set_defaults(func=cmd_curve)

    s = sub.add_parser("compare-skl", parents=[common], help="SKL versus KL contraction sweeps")
    s.add_argument("--channel", choices=("binary", "potts"), default="binary")
    s.add_argument("--points", type=int, default=101)
    s.set_defaults(func=cmd_compare_skl, a=0.3)

    s = sub.add_parser("tree-cert", parents=[common], help="tree non-reconstruction certificate")
    s.add_argument("--tree", default="regular:2", help="regular:D, gw:MEAN or br:VALUE")
    s.set_defaults(func=cmd_tree_cert)

    s = sub.add_parser("tree-sim", parents=[common], help="population dynamics on trees")
    s.add_argument("--d", type=float, default=2)
    s.add_argument("--depth", type=int, default=10)
    s.add_argument("--pool-size", type=int, default=100_000)
    s.add_argument("--gw", action="store_true", help="Poisson(d) offspring instead of d-regular")
    s.set_defaults(func=cmd_tree_sim)

    s = sub.add_parser("sbm-region", parents=[common], help="SBM impossibility region sweep")
    s.add_argument("--a-max", type=float, default=15.0)
    s.add_argument("--b-max", type=float, default=15.0)
    s.add_argument("--step", type=float, default=0.075)
    s.set_defaults(func=cmd_sbm_region, k=5)

    s = sub.add_parser("sbm-point", parents=[common], help="SBM verdicts at one (a, b)")
    s.set_defaults(func=cmd_sbm_point, k=5)

    s = sub.add_parser("isoperimetry", parents=[common], help="edge isoperimetry bounds")
    s.add_argument("--n", type=int, default=2)
    s.set_defaults(func=cmd_isoperimetry)

    s = sub.add_parser("selftest", parents=[common], help="run the quick invariant suite")
    s.set_defaults(func=cmd_selftest)
    return p


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        if args.from_csv:
            with open(args.from_csv, encoding="utf-8") as fh:
                report = verify_csv(fh.read())
            sys.stdout.write(json.dumps(report, sort_keys=True) + "\n")
            return EXIT_OK if report["verified"] else EXIT_NUMERIC
        if not args.command:
            parser.print_usage(sys.stderr)
            return EXIT_ARGS
        if args.threads < 1:
            raise DomainError("--threads must be >= 1")
        if args.k < 2:
            raise DomainError("--k must be >= 2")
        _emit(args.func(args), args.output)
        return EXIT_OK
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr = open(os.devnull, "w")
        return EXIT_OK
    except (DomainError, SizeError, OSError) as e:
        sys.stderr.write(f"error: {e}\n")
        return EXIT_ARGS
    except (NumericalError, ArithmeticError) as e:
        sys.stderr.write(f"numerical failure: {e}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
