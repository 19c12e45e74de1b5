"""Command-line front end: ``hamop check|momentum|catalog|transform|ode``."""

from __future__ import annotations

import argparse
import json
import sys
import time
from contextlib import nullcontext

from . import expr as E
from .catalog import Family, FamilyError, FamilySpec, build
from .diffop import is_hamiltonian
from .files import format_operator, format_substitution, parse_operator_file, parse_substitution_file
from .jetcalc import NEG_INFINITY, diff_order, is_translation_invariant, level
from .momentum import (
    NotHamiltonianError,
    Outcome,
    SingularPointError,
    decide_momentum,
    momentum_density_verdict,
    momentum_ode_fifth,
    momentum_ode_third,
    solve_ode,
)
from .parser import ParseError, parse
from .probe import DEFAULT_SEED, DEFAULT_TOL, DEFAULT_TRIALS, ZeroKind
from .symbridge import QuadratureError
from .transform import TransformError, k_operator, normalize_leading_coefficient, pushforward_operator

EXIT_OK, EXIT_REFUTED, EXIT_USAGE, EXIT_INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _read(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from exc


def _load_operator(path: str):
    try:
        f = parse_operator_file(_read(path))
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    return f.operator, f


def _expr(text: str, what: str, params=None):
    try:
        return parse(text, params=params)
    except ParseError as exc:
        raise UsageError(f"{what}: {exc}") from exc


def _sign(text: str) -> int:
    if text in ("+", "+1", "1"):
        return 1
    if text in ("-", "-1"):
        return -1
    raise UsageError(f"sign must be + or -, got {text!r}")


def _order_str(o) -> str:
    return "-inf" if o == NEG_INFINITY else str(o)


def _verdict_exit(kind: ZeroKind) -> int:
    if kind in (ZeroKind.EXACT_ZERO, ZeroKind.ZERO):
        return EXIT_OK
    return EXIT_INCONCLUSIVE if kind is ZeroKind.INCONCLUSIVE else EXIT_REFUTED


def _probe(args) -> dict:
    return {"trials": args.trials, "tol": args.tol, "seed": args.seed}


# ---------------------------------------------------------------------------
# commands; each returns (result dict, exit code, optional text artifact)


def cmd_check(args):
    op, _ = _load_operator(args.file)
    rep = is_hamiltonian(op, **_probe(args))
    result = {
        "operator": op.to_str(),
        "order": op.order,
        "level": level(op) if not op.is_zero() else None,
        "leading_order": _order_str(diff_order(op.leading)) if not op.is_zero() else None,
        "translation_invariant": is_translation_invariant(op),
        **rep.as_dict(),
    }
    if rep.hamiltonian:
        code = EXIT_OK
    elif rep.inconclusive:
        code = EXIT_INCONCLUSIVE
    else:
        code = EXIT_REFUTED
    return result, code, None


def cmd_momentum(args):
    op, f = _load_operator(args.file)
    rep = is_hamiltonian(op, **_probe(args))
    if not rep.hamiltonian:
        if rep.inconclusive:
            return {"hamiltonian": rep.as_dict(), "error": "Hamiltonian check inconclusive"}, EXIT_INCONCLUSIVE, None
        raise UsageError("operator is not Hamiltonian" + ("" if rep.skew_adjoint else " (not skew-adjoint)"))
    if args.density is not None:
        T = _expr(args.density, "--density", params=f.params)
        v = momentum_density_verdict(op, T, **_probe(args))
        result = {"mode": "density", "density": T.to_str(), "verified": v.is_zero, "verdict": v.as_dict()}
        return result, _verdict_exit(v.kind), None
    try:
        mv = decide_momentum(op, check_hamiltonian=False, **_probe(args))
    except NotHamiltonianError as exc:
        raise UsageError(str(exc)) from exc
    result = {"mode": "auto", **mv.as_dict()}
    if mv.outcome is Outcome.UNKNOWN:
        result["hint"] = "supply a normalizing substitution with 'hamop transform' and rerun"
    code = {Outcome.YES: EXIT_OK, Outcome.NO: EXIT_REFUTED, Outcome.UNKNOWN: EXIT_INCONCLUSIVE}[mv.outcome]
    return result, code, None


_CATALOG_PARAMS = ("f", "A", "alpha", "beta", "gamma", "rho", "b", "c")


def cmd_catalog(args):
    try:
        family = Family(args.name)
    except ValueError as exc:
        raise UsageError(f"unknown family {args.name!r}; choose from {', '.join(f.value for f in Family)}") from exc
    kw = {p: _expr(getattr(args, p), f"--{p}") for p in _CATALOG_PARAMS if getattr(args, p) is not None}
    spec = FamilySpec(family, sign=_sign(args.sign), quasiconstant=args.quasiconstant, **kw)
    try:
        op = build(spec)
    except FamilyError as exc:
        raise UsageError(str(exc)) from exc
    desc = f"{family.value} sign={args.sign} " + " ".join(f"{k}={v.to_str()}" for k, v in kw.items())
    text = format_operator(op, header=desc.strip())
    result = {"family": family.value, "sign": spec.sign, "params": {k: v.to_str() for k, v in kw.items()},
              "operator": op.to_str(), "order": op.order}
    return result, EXIT_OK, text


def cmd_transform(args):
    op, f = _load_operator(args.opfile)
    if args.subfile is None and not args.normalize:
        raise UsageError("give a substitution file or --normalize")
    result: dict = {}
    try:
        if args.normalize:
            norm = normalize_leading_coefficient(op, **_probe(args))
            sub, out = norm.substitution, norm.operator
            result["normalization"] = norm.as_dict()
        else:
            try:
                sub = parse_substitution_file(_read(args.subfile), params=f.params)
            except ParseError as exc:
                raise UsageError(f"{args.subfile}: {exc}") from exc
            rep = sub.report(**_probe(args))
            result["kind"] = sub.kind.value
            if sub.m or sub.n:
                result["special_contact"] = rep.as_dict()
            out = pushforward_operator(op, sub, **_probe(args))
            result["K"] = k_operator(sub).to_str()
    except (TransformError, NotImplementedError, QuadratureError) as exc:
        raise UsageError(str(exc)) from exc
    result["kind"] = sub.kind.value
    result["substitution"] = format_substitution(sub).strip().splitlines()
    result["operator"] = out.to_str()
    result["leading"] = out.leading.to_str() if not out.is_zero() else "0"
    code = EXIT_OK
    if args.check:
        rep = is_hamiltonian(out, **_probe(args))
        result["hamiltonian"] = rep.as_dict()
        code = EXIT_OK if rep.hamiltonian else (EXIT_INCONCLUSIVE if rep.inconclusive else EXIT_REFUTED)
    text = format_operator(out, header="transformed operator", kmax=f.kmax)
    return result, code, text


def cmd_ode(args):
    sign = _sign(args.sign)
    if args.family == "fifth":
        alpha = _expr(args.alpha or "0", "--alpha")
        beta = _expr(args.beta or "0", "--beta")
        try:
            ode = momentum_ode_fifth(alpha, beta, sign)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    else:
        try:
            ode = momentum_ode_third(_expr(args.f or "0", "--f"), sign)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    result: dict = {"ode": ode.as_dict()}
    code = EXIT_OK
    if args.solve is not None:
        init = None
        if args.init:
            vals = [v for chunk in args.init for v in chunk.replace(",", " ").split()]
            init = []
            for v in vals:
                c = _expr(v, "--init").constant_value()
                if c is None:
                    raise UsageError(f"--init value {v!r} is not a number")
                init.append(c)
        u0 = _expr(args.at, "--at").constant_value()
        if u0 is None:
            raise UsageError("--at must be a number")
        try:
            sol = solve_ode(ode, u0=u0, init=init, N=args.solve, r=args.interval, shoot=not args.no_shoot)
        except SingularPointError as exc:
            return {**result, "error": str(exc)}, EXIT_REFUTED, None
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        result["series"] = sol.as_dict()
    return result, code, None


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="probe sample points (default 64)")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL, help="relative probe tolerance (default 1e-9)")
    common.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED, help="probe seed (default 0xC0FFEE)")
    common.add_argument("--json", action="store_true", help="print one JSON document")
    common.add_argument("--kmax", type=int, default=None, help="maximum jet order (default 24)")

    p = _Parser(prog="hamop", description="Hamiltonian differential operators on the jet space.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    c = sub.add_parser("check", parents=[common], help="skew-adjointness, Jacobi identity, order, level")
    c.add_argument("file")
    c.set_defaults(run=cmd_check)

    m = sub.add_parser("momentum", parents=[common], help="verify a density or decide existence")
    m.add_argument("file")
    g = m.add_mutually_exclusive_group(required=True)
    g.add_argument("--density", help="candidate density T")
    g.add_argument("--auto", action="store_true", help="run the decision procedure")
    m.set_defaults(run=cmd_momentum)

    k = sub.add_parser("catalog", parents=[common], help="write a family member as an operator file")
    k.add_argument("name", help=", ".join(f.value for f in Family))
    k.add_argument("--sign", default="+")
    for name in _CATALOG_PARAMS:
        k.add_argument(f"--{name}")
    k.add_argument("--quasiconstant", action="store_true", help="cooke5 with quasiconstant b, c")
    k.add_argument("-o", "--output", help="write the operator file here instead of stdout")
    k.set_defaults(run=cmd_catalog)

    t = sub.add_parser("transform", parents=[common], help="push an operator through a substitution")
    t.add_argument("opfile")
    t.add_argument("subfile", nargs="?")
    t.add_argument("--normalize", action="store_true", help="find a point substitution normalizing the leading term")
    t.add_argument("--check", action="store_true", help="also run the Hamiltonian check on the image")
    t.add_argument("-o", "--output", help="write the transformed operator file here")
    t.set_defaults(run=cmd_transform)

    o = sub.add_parser("ode", parents=[common], help="momentum ODE and its series solution")
    o.add_argument("--family", choices=("fifth", "third"), required=True)
    o.add_argument("--alpha")
    o.add_argument("--beta")
    o.add_argument("--f")
    o.add_argument("--sign", default="+")
    o.add_argument("--solve", type=int, metavar="N", help="Taylor degree")
    o.add_argument("--init", nargs="+", help="y(u0), y'(u0), ... (default all zero)")
    o.add_argument("--at", default="0", help="expansion point u0 (default 0)")
    o.add_argument("--interval", type=float, default=0.5, help="half-width r of the residual interval")
    o.add_argument("--no-shoot", action="store_true", help="skip the numeric shooting cross-check")
    o.set_defaults(run=cmd_ode)
    return p


def _render(d, indent: int = 0) -> list:
    pad = "  " * indent
    lines = []
    for key, val in d.items():
        if isinstance(val, dict):
            lines.append(f"{pad}{key}:")
            lines.extend(_render(val, indent + 1))
        elif isinstance(val, list) and val and isinstance(val[0], dict):
            lines.append(f"{pad}{key}:")
            for i, item in enumerate(val, 1):
                lines.append(f"{pad}  [{i}]")
                lines.extend(_render(item, indent + 2))
        elif isinstance(val, list):
            lines.append(f"{pad}{key}: " + "; ".join(str(v) for v in val))
        else:
            lines.append(f"{pad}{key}: {val}")
    return lines


def _echo(args) -> dict:
    skip = {"run", "json", "output"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip and v is not None}


_EXPR_OPTS = {"--density", "--sign", "--at"} | {f"--{n}" for n in _CATALOG_PARAMS}


def _glue_negative_values(argv: list) -> list:
    """``--density -u^2`` would otherwise be read as an unknown option."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _EXPR_OPTS and i + 1 < len(argv) and argv[i + 1].startswith("-") and argv[i + 1] != "--":
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"hamop: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.kmax is not None and args.kmax < 1:
        print("hamop: error: --kmax must be positive", file=sys.stderr)
        return EXIT_USAGE
    start = time.perf_counter()
    try:
        with E.kmax(args.kmax) if args.kmax else nullcontext():
            result, code, artifact = args.run(args)
    except UsageError as exc:
        print(f"hamop {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except E.JetOrderError as exc:
        print(f"hamop {args.command}: error: {exc} (raise --kmax)", file=sys.stderr)
        return EXIT_USAGE
    elapsed = time.perf_counter() - start

    if artifact is not None and getattr(args, "output", None):
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(artifact)
    report = {"command": args.command, "args": _echo(args), "seed": args.seed, "exit_code": code,
              "result": result, "timings": {"seconds": round(elapsed, 4)}}
    if args.json:
        if artifact is not None and not getattr(args, "output", None):
            report["file"] = artifact
        print(json.dumps(report, indent=2, sort_keys=True, default=str))
    elif artifact is not None and not getattr(args, "output", None) and args.command == "catalog":
        sys.stdout.write(artifact)
    else:
        print("\n".join(_render({"command": args.command, **result})))
        if artifact is not None and not getattr(args, "output", None):
            print("--- transformed operator file ---")
            sys.stdout.write(artifact)
    return code


if __name__ == "__main__":
    sys.exit(main())
