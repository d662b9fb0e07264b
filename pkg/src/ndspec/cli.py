"""Command-line interface: ``ndspec factor | verify | granger | bench-paper``.

Exit codes: 0 success, 2 input/parse error, 3 numeric failure, 4 tolerance
not met.
"""
from __future__ import annotations

import argparse
import json
import sys
import time
import warnings

import numpy as np

from . import __version__
from .driver import default_grid, full_factor, verify
from .errors import AliasError, NDSpecError, ParseError, TruncationWarning
from .harmonic import MatrixFunction, coefficient_array
from .io import (
    dumps,
    example_factor,
    file_digest,
    load_matrix,
    load_spectrum,
    read_document,
    result_document,
    write_result,
)
from .jlstep import resolve_workers
from .report import FactorizationReport

EXIT_OK, EXIT_PARSE, EXIT_NUMERIC, EXIT_TOL = 0, 2, 3, 4


def _int_list(text: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--orders", type=_int_list, help="truncation orders n1,...,nN (default: from the grid)")
    p.add_argument("--grid", type=_int_list, help="grid sizes G1,...,GN for coefficient input")
    p.add_argument("--axis-order", type=_int_list, help="permutation of the axes; first entry is the leading variable")
    p.add_argument("--threads", type=int, help="worker threads (default: $NDSPEC_THREADS or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ndspec", description="Multivariable matrix spectral factorization.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", help="factor a spectral density and write a result document")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--drop-tol", type=float, default=0.0, help="relative threshold for stored factor coefficients")
    _add_common(p)

    p = sub.add_parser("verify", help="diagnostics of a spectrum/factor pair")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--factor", required=True)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--grid", type=_int_list)

    p = sub.add_parser("granger", help="Granger causality of channel 2 on channel 1")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--horizon", type=_int_list, required=True, help="L (one variable) or L,M (two variables)")
    p.add_argument("--box", type=_int_list, help="K1,K2 bound of the two-variable index set")
    _add_common(p)

    p = sub.add_parser("bench-paper", help="factor the built-in two-variable example and compare with its known factor")
    p.add_argument("--tol", type=float, default=1e-10)
    _add_common(p)
    return parser


def _err(msg: str):
    print(f"ndspec: {msg}", file=sys.stderr)


def _print_report(rep: FactorizationReport, out=None):
    out = sys.stdout if out is None else out
    d = rep.to_dict()
    for key in ("status", "residual", "relative_residual", "scale", "analytic_leakage", "outer_gap", "logdet_gap",
                "det_drift", "unitarity_dev", "det_unitary_dev", "product_leakage", "min_f0_ratio",
                "stage_orders", "grid"):
        print(f"{key}: {d[key]}", file=out)
    if d["flagged_slices"]:
        print(f"flagged_slices: {len(d['flagged_slices'])}", file=out)
    if rep.message:
        print(f"message: {rep.message}", file=out)


def _factor_spectrum(args, S: MatrixFunction):
    return full_factor(S, orders=args.orders, axis_order=args.axis_order, workers=resolve_workers(args.threads))


def cmd_factor(args) -> int:
    provenance = {"input_sha256": None, "orders": args.orders, "grid": args.grid, "axis_order": args.axis_order}
    try:
        provenance["input_sha256"] = file_digest(args.input)
        S = load_spectrum(args.input, args.grid)
    except (ParseError, AliasError, NDSpecError, OSError) as exc:
        _err(str(exc))
        write_result(result_document(None, FactorizationReport(status="failed", message=str(exc)), provenance), args.output)
        return EXIT_PARSE
    provenance["grid"] = list(S.sizes)
    try:
        Splus, rep = _factor_spectrum(args, S)
    except AliasError as exc:
        _err(str(exc))
        write_result(result_document(None, exc.report or FactorizationReport(status="failed", message=str(exc)), provenance), args.output)
        return EXIT_PARSE
    except NDSpecError as exc:
        _err(str(exc))
        write_result(result_document(None, exc.report or FactorizationReport(status="failed", message=str(exc)), provenance), args.output)
        return EXIT_NUMERIC
    provenance["orders"] = rep.stage_orders
    write_result(result_document(Splus, rep, provenance, drop_tol=args.drop_tol), args.output)
    if not rep.passes(args.tol):
        _err(f"tolerance {args.tol:g} not met (relative residual {rep.relative_residual:.2e}, leakage {rep.analytic_leakage:.2e})")
        return EXIT_TOL
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        S = load_spectrum(args.spectrum, args.grid)
        Splus = load_matrix(args.factor, S.sizes)
    except (NDSpecError, OSError) as exc:
        _err(str(exc))
        return EXIT_PARSE
    if Splus.values.shape != S.values.shape:
        _err(f"factor shape {Splus.values.shape} does not match spectrum {S.values.shape}")
        return EXIT_PARSE
    rep = verify(S, Splus)
    _print_report(rep)
    ok = rep.passes(args.tol) and rep.outer_gap <= args.tol
    if not ok:
        _err(f"tolerance {args.tol:g} not met")
    return EXIT_OK if ok else EXIT_TOL


def cmd_granger(args) -> int:
    from .granger import granger_1d, granger_2d

    try:
        S = load_spectrum(args.spectrum, args.grid)
    except (NDSpecError, OSError) as exc:
        _err(str(exc))
        return EXIT_PARSE
    workers = resolve_workers(args.threads)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", TruncationWarning)
        try:
            if S.N == 1 and len(args.horizon) == 1:
                res = granger_1d(S, args.horizon[0], orders=args.orders, workers=workers)
            elif S.N == 2 and len(args.horizon) == 2:
                res = granger_2d(S, *args.horizon, box=args.box, orders=args.orders, workers=workers)
            else:
                _err(f"horizon {args.horizon} does not match a spectrum of N={S.N}")
                return EXIT_PARSE
        except AliasError as exc:
            _err(str(exc))
            return EXIT_PARSE
        except ValueError as exc:
            if isinstance(exc, NDSpecError):
                _err(str(exc))
                return EXIT_NUMERIC
            _err(str(exc))
            return EXIT_PARSE
        except NDSpecError as exc:
            _err(str(exc))
            return EXIT_NUMERIC
    out = res.to_dict()
    out["warnings"] = [str(w.message) for w in caught if issubclass(w.category, TruncationWarning)]
    sys.stdout.write(dumps(out))
    return EXIT_OK


def cmd_bench(args) -> int:
    doc = example_factor()
    sizes = tuple(args.grid) if args.grid else default_grid(doc.degrees(), doc.d)
    try:
        A = doc.matrix(sizes)
        S = A @ A.H()
        t0 = time.perf_counter()
        Splus, rep = _factor_spectrum(args, S)
        elapsed = time.perf_counter() - t0
    except AliasError as exc:
        _err(str(exc))
        return EXIT_PARSE
    except NDSpecError as exc:
        _err(str(exc))
        return EXIT_NUMERIC
    diff = coefficient_array(np.asarray(Splus.values) - np.asarray(A.values), axes=range(S.N))
    err = float(np.abs(diff).max())
    print(f"grid: {list(sizes)}")
    print(f"orders: {rep.stage_orders}")
    print(f"max_coefficient_error: {err:.3e}")
    print(f"relative_residual: {rep.relative_residual:.3e}")
    print(f"wall_time_s: {elapsed:.3f}")
    ok = err <= args.tol
    print("PASS" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_TOL


COMMANDS = {"factor": cmd_factor, "verify": cmd_verify, "granger": cmd_granger, "bench-paper": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
