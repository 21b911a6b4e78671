"""Command-line entry point: ``uppertri <subcommand> ...``.

Every run prints one report on stdout: compact JSON by default, aligned
text with --pretty. Exit codes:
0 success, 1 verification failure, 2 infeasible, 3 input error,
4 convergence failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from .core import (
    DimensionMismatch,
    IndefiniteError,
    NotHermitianError,
    SingularError,
    Window,
    dumps,
    matrix_from_dict,
    matrix_to_dict,
    pattern_nest_tensor,
    write_matrix,
)
from .factor import (
    cholesky_ll,
    counterexample_matrix,
    hotel_factor,
    nest_tensor_pattern_for,
    poset_feasibility,
    reverse_cholesky,
    verify_factor,
)
from .infop import (
    ConvergenceError,
    finite_column_check,
    gen_upper,
    operator_from_dict,
    truncation_study,
    window_extract,
    write_operator,
)
from .rangespace import RangeMismatch, douglas_constants, range_equal, tensornest_demo
from .rkhs import cmin, density_projection, family_gram, gram, norm_LJ, onb_polynomials
from .toeplitz import (
    AnalyticFactor,
    FactorizationError,
    Symbol,
    bauer_factor,
    fejer_riesz,
    log_integrability,
    toeplitz_matrix,
    toeplitz_operator,
    verify_toeplitz_factor,
    write_convergence_csv,
)

EXIT_OK, EXIT_VERIFY, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_CONVERGE = 0, 1, 2, 3, 4


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise InputError(message)


def _num(x):
    """JSON-safe float: NaN becomes null, infinities become strings."""
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def _index(text: str) -> tuple:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise InputError(f"bad multi-index {text!r}")


def _vector(text: str | None, c: int) -> np.ndarray:
    if text is None:
        v = np.zeros(c, dtype=complex)
        v[0] = 1.0
        return v
    try:
        v = np.array([complex(t.replace(" ", "")) for t in text.split(",")])
    except ValueError:
        raise InputError(f"bad vector {text!r}")
    if v.shape[0] != c:
        raise InputError(f"vector has {v.shape[0]} entries, block size is {c}")
    return v


def _load_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}")
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc.msg}")


def _load_matrix(path) -> np.ndarray:
    obj = _load_json(path)
    try:
        return matrix_from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path} is not a matrix file: {exc}")


def _load_operator(path):
    obj = _load_json(path)
    try:
        return operator_from_dict(obj)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path} is not an operator file: {exc}")


def _load_square(path, d: int, n: int | None):
    """Matrix file, or operator file cut to the window [0, n]^d."""
    obj = _load_json(path)
    if "columns" in obj:
        op = _load_operator(path)
        if n is None:
            raise InputError("--window is required for operator input")
        return window_extract(op, Window(op.d, n)), Window(op.d, n)
    M = _load_matrix(path)
    N = M.shape[0]
    if M.shape[1] != N:
        raise InputError(f"matrix in {path} is not square")
    side = round(N ** (1.0 / d))
    if side ** d != N:
        raise InputError(f"size {N} is not (n+1)^{d}")
    return M, Window(d, side - 1)


def _symbol(args) -> Symbol:
    if args.symbol:
        obj = _load_json(args.symbol)
        try:
            return Symbol.from_dict(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{args.symbol} is not a symbol file: {exc}")
    if args.coeffs:
        try:
            vals = [complex(t.replace(" ", "")) for t in args.coeffs.split(",")]
        except ValueError:
            raise InputError(f"bad coefficient list {args.coeffs!r}")
        return Symbol(dict(enumerate(vals)))
    raise InputError("give --symbol FILE or --coeffs c0,c1,...")


def _default_seed() -> int:
    raw = os.environ.get("UPPERTRI_SEED", "0")
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"UPPERTRI_SEED={raw!r} is not an integer")


# -- subcommands ------------------------------------------------------------
# each returns (exit code, outputs dict, residuals dict)

def cmd_gen(args):
    inst = gen_upper(args.d, args.c, args.n, args.band, args.seed)
    if args.out:
        write_operator(args.out, inst.Q)
    if args.factor_out:
        write_matrix(args.factor_out, inst.U.dense())
    _, prof = finite_column_check(inst.Q)
    outputs = {
        "blocks": len(inst.Q.upper_entries()),
        "max_column_support": max(prof.column_support.values()),
        "operator_file": args.out,
    }
    return EXIT_OK, outputs, {}


def cmd_factor(args):
    Q, w = _load_square(args.input, args.d, args.window)
    outputs: dict = {"method": args.method}
    if args.method == "cholesky":
        res = cholesky_ll(Q, args.pivot_tol)
    elif args.method == "reverse":
        res = reverse_cholesky(Q, args.pivot_tol)
    elif args.method == "poset":
        rep = poset_feasibility(Q, pattern_nest_tensor(w.d, w), args.zero_tol)
        outputs["feasible"] = rep.feasible
        outputs["certificate"] = [list(p) for p in rep.certificate]
        if not rep.feasible:
            return EXIT_INFEASIBLE, outputs, {}
        if args.out:
            write_matrix(args.out, rep.factor)
        outputs["factor"] = matrix_to_dict(rep.factor)
        return EXIT_OK, outputs, {"residual_fro": verify_factor(rep.factor, Q).residual_fro}
    else:
        extra = args.extra_cols if args.extra_cols is not None else len(w)
        res = hotel_factor(Q, w, extra)
        outputs["columns"] = [list(K) for K in res.col_indices]
    if args.out:
        write_matrix(args.out, res.factor)
    outputs.update(factor=matrix_to_dict(res.factor), rank=res.rank, canonical=res.canonical)
    return EXIT_OK, outputs, {"residual_fro": res.residual_fro}


def cmd_verify(args):
    B = _load_matrix(args.factor)
    Q, w = _load_square(args.input, args.d, args.window)
    pat = nest_tensor_pattern_for(B, w) if args.pattern == "nest-tensor" else None
    rep = verify_factor(B, Q, pat, args.tol)
    outputs = {"ok": rep.ok, "pattern_violations": [list(p) for p in rep.pattern_violations]}
    return (EXIT_OK if rep.ok else EXIT_VERIFY), outputs, {"residual_fro": rep.residual_fro}


def cmd_converge(args):
    if args.input:
        op = _load_operator(args.input)
    else:
        op = toeplitz_operator(_symbol(args))
    try:
        schedule = [int(t) for t in args.schedule.split(",")]
    except ValueError:
        raise InputError(f"bad schedule {args.schedule!r}")
    rep = truncation_study(op, schedule, Window(1, args.compare_n), args.tol)
    if args.csv:
        write_convergence_csv(args.csv, rep.rows())
    outputs = {
        "schedule": rep.schedule,
        "deltas": [_num(x) for x in rep.deltas],
        "converged": rep.converged,
        "monotone_violations": rep.monotone_violations,
    }
    residuals = {"compare_window": [_num(x) for x in rep.residuals]}
    return (EXIT_OK if rep.converged else EXIT_CONVERGE), outputs, residuals


def cmd_rkhs(args):
    op = _load_operator(args.input)
    J = _index(args.J) if args.J else (0,) * op.d
    w = Window(op.d, args.window)
    v = _vector(args.v, op.c)
    outputs: dict = {"op": args.op}
    if args.op == "gram":
        J2 = _index(args.J2) if args.J2 else J
        g = gram(op, J, v, J2, _vector(args.v2, op.c))
        outputs["value"] = [g.real, g.imag]
    elif args.op == "norm":
        r = norm_LJ(op, J, w)
        outputs.update(value=r.value, lower_bound=r.lower_bound)
    elif args.op == "cmin":
        outputs["value"] = _num(cmin(op, w, J, _vector(args.v, op.c) if args.v else None))
    elif args.op == "density":
        pt = _vector(args.point, op.d) if args.point else np.zeros(op.d)
        S = w.indices()
        p = density_projection(op, S, pt, v)
        outputs.update(error=p.error, error_sq=p.error_sq, tail_bound=p.tail_bound)
    else:
        fam = onb_polynomials(op, w.indices())
        G = family_gram(op, fam)
        outputs.update(size=len(fam.polys), norms=fam.norms,
                       gram_defect=float(np.abs(G - np.eye(G.shape[0])).max()) if G.size else 0.0)
    return EXIT_OK, outputs, {}


def cmd_toeplitz(args):
    sym = _symbol(args)
    outputs: dict = {"op": args.op, "degree": sym.degree}
    residuals: dict = {}
    code = EXIT_OK
    if args.op == "matrix":
        outputs["matrix"] = matrix_to_dict(toeplitz_matrix(sym, args.n))
    elif args.op == "fejer-riesz":
        f = fejer_riesz(sym, root_tol=args.root_tol)
        outputs["coeffs"] = [[z.real, z.imag] for z in f.coeffs]
    elif args.op == "bauer":
        res = bauer_factor(sym, args.n)
        rows = [(s.n, s.delta, s.residual) for s in res.steps]
        if args.csv:
            write_convergence_csv(args.csv, rows)
        outputs["coeffs"] = [[z.real, z.imag] for z in res.coeffs]
        outputs["steps"] = [{"n": n, "delta": _num(d), "residual": _num(r)} for n, d, r in rows]
        residuals["final_delta"] = _num(res.final_delta)
        if not res.final_delta <= args.tol:
            code = EXIT_CONVERGE
    elif args.op == "logint":
        li = log_integrability(sym, args.grid)
        outputs.update(value=_num(li.value), integrable=li.integrable, excluded=li.excluded)
    else:
        if args.factor_coeffs:
            f = AnalyticFactor(_vector(args.factor_coeffs, len(args.factor_coeffs.split(","))))
        else:
            f = fejer_riesz(sym, root_tol=args.root_tol)
        chk = verify_toeplitz_factor(sym, f, args.n, args.tol)
        outputs["ok"] = chk.ok
        residuals["residual_fro"] = chk.residual
        code = EXIT_OK if chk.ok else EXIT_VERIFY
    return code, outputs, residuals


def cmd_range(args):
    if not args.A:
        raise InputError("--A is required")
    A = _load_matrix(args.A)
    C = _load_matrix(args.C) if args.C else None
    outputs: dict = {"op": args.op}
    if args.op == "equal":
        if C is None:
            raise InputError("--C is required for equal")
        outputs["equal"] = range_equal(A, C)
    elif args.op == "constants":
        if C is None:
            raise InputError("--C is required for constants")
        dc = douglas_constants(A, C)
        outputs.update(lam=_num(dc.lam), mu=_num(dc.mu))
    else:
        N = A.shape[0]
        side = round(N ** (1.0 / args.d))
        if side ** args.d != N:
            raise InputError(f"size {N} is not (n+1)^{args.d}")
        r = tensornest_demo(A, Window(args.d, side - 1), C, args.extra_cols)
        outputs.update(path=r.path, certificate=[list(p) for p in r.certificate],
                       factor=matrix_to_dict(r.factor.factor))
        return EXIT_OK, outputs, {"residual_fro": r.factor.residual_fro}
    return EXIT_OK, outputs, {}


def cmd_demo(args):
    Q, _ = counterexample_matrix()
    w = Window(2, 1)
    U = reverse_cholesky(Q)
    rep = poset_feasibility(Q, pattern_nest_tensor(2, w))
    hotel = hotel_factor(Q, w, 4)
    check = verify_factor(hotel.factor, Q, nest_tensor_pattern_for(hotel.factor, w), tol=1e-12)
    outputs = {
        "window": [list(I) for I in w.indices()],
        "Q": matrix_to_dict(Q),
        "reverse_cholesky": matrix_to_dict(U.factor),
        "feasible": rep.feasible,
        "certificate": [list(p) for p in rep.certificate],
        "certificate_indices": [[list(I), list(K)] for I, K in rep.certificate_indices],
        "hotel_factor": matrix_to_dict(hotel.factor),
        "hotel_columns": [list(K) for K in hotel.col_indices],
        "hotel_admissible": check.ok,
    }
    residuals = {"reverse_cholesky": U.residual_fro, "hotel": hotel.residual_fro}
    return (EXIT_OK if check.ok else EXIT_VERIFY), outputs, residuals


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--no-timings", action="store_true")
    common.add_argument("--pretty", action="store_true")

    p = _Parser(prog="uppertri", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen", parents=[common])
    g.add_argument("--d", type=int, default=1)
    g.add_argument("--c", type=int, default=1)
    g.add_argument("--n", type=int, default=8)
    g.add_argument("--band", type=int, default=1)
    g.add_argument("--out")
    g.add_argument("--factor-out")
    g.set_defaults(func=cmd_gen)

    f = sub.add_parser("factor", parents=[common])
    f.add_argument("--input", required=True)
    f.add_argument("--method", choices=["cholesky", "reverse", "poset", "hotel"], default="reverse")
    f.add_argument("--pattern", choices=["nest-tensor"], default="nest-tensor")
    f.add_argument("--extra-cols", type=int)
    f.add_argument("--d", type=int, default=1)
    f.add_argument("--window", type=int)
    f.add_argument("--pivot-tol", type=float, default=1e-12)
    f.add_argument("--zero-tol", type=float, default=1e-8)
    f.add_argument("--out")
    f.set_defaults(func=cmd_factor)

    v = sub.add_parser("verify", parents=[common])
    v.add_argument("--factor", required=True)
    v.add_argument("--input", required=True)
    v.add_argument("--pattern", choices=["nest-tensor", "none"], default="none")
    v.add_argument("--d", type=int, default=1)
    v.add_argument("--window", type=int)
    v.add_argument("--tol", type=float, default=1e-10)
    v.set_defaults(func=cmd_verify)

    c = sub.add_parser("converge", parents=[common])
    c.add_argument("--input")
    c.add_argument("--symbol")
    c.add_argument("--coeffs")
    c.add_argument("--schedule", default="8,16,32,64,128")
    c.add_argument("--compare-n", type=int, default=7)
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--csv")
    c.set_defaults(func=cmd_converge)

    r = sub.add_parser("rkhs", parents=[common])
    r.add_argument("--input", required=True)
    r.add_argument("--op", choices=["gram", "norm", "cmin", "density", "onb"], required=True)
    r.add_argument("--J")
    r.add_argument("--J2")
    r.add_argument("--v")
    r.add_argument("--v2")
    r.add_argument("--point")
    r.add_argument("--window", type=int, default=4)
    r.set_defaults(func=cmd_rkhs)

    t = sub.add_parser("toeplitz", parents=[common])
    t.add_argument("--op", choices=["matrix", "fejer-riesz", "bauer", "logint", "verify"], required=True)
    t.add_argument("--symbol")
    t.add_argument("--coeffs")
    t.add_argument("--n", type=int, default=8)
    t.add_argument("--csv")
    t.add_argument("--tol", type=float, default=1e-8)
    t.add_argument("--root-tol", type=float, default=1e-6)
    t.add_argument("--grid", type=int, default=4096)
    t.add_argument("--factor-coeffs")
    t.set_defaults(func=cmd_toeplitz)

    a = sub.add_parser("range", parents=[common])
    a.add_argument("--op", choices=["equal", "constants", "demo"], required=True)
    a.add_argument("--A")
    a.add_argument("--C")
    a.add_argument("--d", type=int, default=1)
    a.add_argument("--extra-cols", type=int)
    a.set_defaults(func=cmd_range)

    dm = sub.add_parser("demo-counterexample", parents=[common])
    dm.set_defaults(func=cmd_demo)
    return p


def _fmt_matrix(obj: dict) -> list:
    M = matrix_from_dict(obj)
    cells = [[f"{z.real:.6g}" + (f"{z.imag:+.6g}j" if z.imag else "") for z in row] for row in M]
    width = max((len(c) for row in cells for c in row), default=0)
    return ["  " + " ".join(c.rjust(width) for c in row) for row in cells]


def render_text(report: dict) -> str:
    """Aligned human-readable view of a report."""
    lines = [f"{report['command']}  (uppertri {report['tool_version']}, seed {report['seed']})"]
    for section in ("outputs", "residuals"):
        items = report[section]
        if not items:
            continue
        lines.append(f"[{section}]")
        width = max(len(k) for k in items)
        for key in sorted(items):
            val = items[key]
            if isinstance(val, dict) and "data" in val:
                lines.append(f"{key.ljust(width)} : {val['rows']}x{val['cols']} matrix")
                lines.extend(_fmt_matrix(val))
            else:
                lines.append(f"{key.ljust(width)} : {json.dumps(val)}")
    if report["timings"]:
        lines.append(f"[timings] {report['timings']['total_s']:.3f}s")
    return "\n".join(lines)


def _digest(argv: list, args) -> str:
    h = hashlib.sha256()
    h.update("\0".join(a for a in argv if a not in ("--no-timings", "--pretty")).encode())
    for name in ("input", "factor", "symbol", "A", "C"):
        path = getattr(args, name, None)
        if path and os.path.exists(path):
            with open(path, "rb") as fh:
                h.update(fh.read())
    return h.hexdigest()


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.seed is None:
            args.seed = _default_seed()
    except InputError as exc:
        print(f"uppertri: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)

    t0 = time.perf_counter()
    try:
        code, outputs, residuals = args.func(args)
    except InputError as exc:
        print(f"uppertri: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ConvergenceError as exc:
        print(f"uppertri: {exc}", file=sys.stderr)
        return EXIT_CONVERGE
    except (IndefiniteError, NotHermitianError, SingularError, DimensionMismatch,
            FactorizationError, RangeMismatch, ValueError) as exc:
        print(f"uppertri: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT

    report = {
        "command": args.command,
        "inputs_digest": _digest(argv, args),
        "outputs": outputs,
        "residuals": residuals,
        "timings": None if args.no_timings else {"total_s": time.perf_counter() - t0},
        "seed": args.seed,
        "tool_version": __version__,
    }
    if args.pretty:
        print(render_text(report))
    else:
        print(dumps(report))
    return code


if __name__ == "__main__":
    sys.exit(main())
