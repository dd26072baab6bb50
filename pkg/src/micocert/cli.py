"""Command-line front end.

Exit codes: 0 valid / success, 1 invalid or counterexample, 2 inconclusive,
3 usage or input error.  JSON output is sorted and embeds the tolerance
set in effect, so runs with the same inputs and seed are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

import numpy as np

from . import certificate as cert_mod
from . import dual as dual_mod
from . import geometry as geo
from . import oracle
from .errors import (BudgetExceeded, DegenerateRow, Inconclusive, MicoError, ModelError,
                     NoFeasibleFiber, NoFeasiblePoint, NoValidSubset, SlaterViolated, SolverStalled,
                     StationarityResidualTooLarge)
from .problem import Problem, Tolerances, load_problem

EXIT_OK, EXIT_INVALID, EXIT_INCONCLUSIVE, EXIT_USAGE = 0, 1, 2, 3
VERDICT_EXIT = {cert_mod.VALID: EXIT_OK, cert_mod.INVALID: EXIT_INVALID,
                cert_mod.INCONCLUSIVE: EXIT_INCONCLUSIVE}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("-p", "--problem", help="problem JSON")
    common.add_argument("-c", "--certificate", help="certificate JSON")
    common.add_argument("-D", "--dual", help="dual pair JSON")
    common.add_argument("-o", "--out", help="write the JSON result here instead of stdout")
    common.add_argument("--tol-feas", type=float)
    common.add_argument("--tol-strict", type=float)
    common.add_argument("--eps-solve", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--jobs", type=int, default=1)
    common.add_argument("--rational", action="store_true",
                        help="exact arithmetic for lattice tests (affine problems only)")
    ap = _Parser(prog="micocert", description="Mixed-integer convex optimality certificates.")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)
    sub.add_parser("verify", parents=[common], help="check a certificate against a problem")
    c = sub.add_parser("construct", parents=[common], help="build and self-check a certificate")
    c.add_argument("--report", help="also write the verification report here")
    sub.add_parser("dual", parents=[common], help="derive (or load with -D) and check a dual pair")
    b = sub.add_parser("dual-bound", parents=[common], help="lower bound from polyhedron + multipliers")
    b.add_argument("--polyhedron", required=True, help="polyhedron JSON (strict rows)")
    b.add_argument("--multipliers", help="JSON matrix, one row per half-space (else -D rows)")
    sub.add_parser("brute", parents=[common], help="grid-search oracle")
    sub.add_parser("slater", parents=[common], help="mixed-integer Slater report")
    pr = sub.add_parser("project", parents=[common], help="projection property check")
    pr.add_argument("--point", required=True, help="target point y as a JSON list")
    return ap


def _tolerances(args, p: Problem) -> Tolerances:
    tol = p.tol.override(tau_feas=args.tol_feas, tau_strict=args.tol_strict,
                         eps_solve=args.eps_solve)
    if args.seed is not None:
        tol = tol.override(seed=args.seed)
    return tol


def _load(args) -> Problem:
    if not args.problem:
        raise UsageError("missing -p/--problem")
    p = load_problem(args.problem)
    p = p.with_tol(_tolerances(args, p))
    if args.rational and not p.all_affine():
        raise UsageError("--rational requires every expression to be affine")
    if args.jobs < 1:
        raise UsageError("--jobs must be at least 1")
    return p


def _need(args, name, flag):
    if not getattr(args, name):
        raise UsageError(f"missing {flag}")
    return getattr(args, name)


def _emit(args, obj, tol: Tolerances):
    obj = dict(obj)
    obj["tolerances"] = tol.as_dict()
    text = json.dumps(obj, sort_keys=True, indent=2, default=_jsonable) + "\n"
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _jsonable(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    return str(v)


def _table(rep: cert_mod.VerificationReport):
    err = sys.stderr
    err.write(f"certificate form {rep.theorem}: {rep.verdict}\n")
    order = []
    for c in rep.checks:
        if c.label not in order:
            order.append(c.label)
    for label in order:
        rows = [c for c in rep.checks if c.label == label]
        bad = [c for c in rows if not c.passed]
        state = "pass" if not bad else ("inconclusive" if all(c.inconclusive for c in bad) else "FAIL")
        note = bad[0].detail if bad else ""
        err.write(f"  {label:<14} {state:<12} {note}\n")


# -- subcommands -----------------------------------------------------------


def cmd_verify(args) -> int:
    p = _load(args)
    cert = cert_mod.load_certificate(_need(args, "certificate", "-c/--certificate"))
    rep = cert_mod.verify(p, cert, exact=args.rational)
    _table(rep)
    _emit(args, rep.to_json(), p.tol)
    return VERDICT_EXIT[rep.verdict]


def cmd_construct(args) -> int:
    p = _load(args)
    cert, rep = cert_mod.construct_certificate(p, jobs=args.jobs)
    _table(rep)
    out = cert.to_json()
    out["verdict"] = rep.verdict
    _emit(args, out, p.tol)
    if args.report:
        with open(args.report, "w") as fh:
            fh.write(json.dumps(rep.to_json(), sort_keys=True, indent=2) + "\n")
    return VERDICT_EXIT[rep.verdict]


def cmd_dual(args) -> int:
    p = _load(args)
    if args.dual:
        dp = dual_mod.load_dual(args.dual)
    else:
        cert = cert_mod.load_certificate(_need(args, "certificate", "-c/--certificate or -D/--dual"))
        if isinstance(cert, cert_mod.Thm3Certificate):
            raise UsageError("a dual pair needs a multiplier certificate, not a boundary-point one")
        dp = dual_mod.dual_from_certificate(p, cert)
    if dp.U.shape[1] != p.m:
        raise ModelError(f"dual pair has {dp.U.shape[1]} multiplier columns, problem has m = {p.m}")
    rep = dual_mod.verify_dual_pair(p, dp, jobs=args.jobs)
    out = dp.to_json()
    out["verification"] = rep.to_json()
    ok = rep.holds
    if args.rational:
        c, c0, A, b = dual_mod.linear_data(p)
        lin = dual_mod.linear_dual_check(c, A, b, p.n, p.d, dp.alpha, dp.U, dp.split_k, p.box,
                                         exact=True, c0=c0)
        out["linear_check"] = lin.to_json()
        ok = ok and lin.lattice_free
    sys.stderr.write(f"dual pair alpha = {dp.alpha:.12g}: {'holds' if ok else 'FAILS'}"
                     f" on {rep.fibers} fibers\n")
    _emit(args, out, p.tol)
    return EXIT_OK if ok else EXIT_INVALID


def cmd_dual_bound(args) -> int:
    p = _load(args)
    with open(args.polyhedron) as fh:
        P = geo.OpenPolyhedron.from_json(json.load(fh))
    if args.multipliers:
        with open(args.multipliers) as fh:
            U = np.asarray(json.load(fh), dtype=float)
    elif args.dual:
        U = dual_mod.load_dual(args.dual).U[: len(P)]
    else:
        raise UsageError("dual-bound needs --multipliers or -D/--dual")
    if U.size == 0:
        U = np.zeros((len(P), p.m))
    if U.shape != (len(P), p.m):
        raise ModelError(f"multipliers must have shape ({len(P)}, {p.m}), got {U.shape}")
    res = dual_mod.dual_bound_from_polyhedron(p, P, U)
    sys.stderr.write(f"alpha = {res.alpha:.12g}\n")
    _emit(args, res.to_json(), p.tol)
    return EXIT_OK


def cmd_brute(args) -> int:
    p = _load(args)
    try:
        res = oracle.brute_force_solve(p)
    except NoFeasiblePoint as exc:
        _emit(args, {"value": None, "argmin": None, "error": str(exc)}, p.tol)
        return EXIT_INVALID
    _emit(args, res.to_json(), p.tol)
    return EXIT_OK


def cmd_slater(args) -> int:
    p = _load(args)
    rep = cert_mod.check_mixed_slater(p, jobs=args.jobs)
    holds, point, value = cert_mod.check_slater(p)
    out = rep.to_json()
    out["standard"] = {"holds": holds, "value": value if np.isfinite(value) else None,
                       "point": None if point is None else np.asarray(point).tolist()}
    _emit(args, out, p.tol)
    if rep.stalled and not rep.violating:
        return EXIT_INCONCLUSIVE
    return EXIT_OK if rep.holds else EXIT_INVALID


def cmd_project(args) -> int:
    p = _load(args)
    y = np.asarray(json.loads(args.point), dtype=float)
    if y.shape != (p.dim,):
        raise ModelError(f"--point must have {p.dim} entries")
    q = p.with_objective(cert_mod.projection_objective(y))
    if args.certificate:
        cert = cert_mod.load_certificate(args.certificate)
    else:
        cert, _ = cert_mod.construct_certificate(q, jobs=args.jobs)
    rep = cert_mod.verify_projection_property(p, y, cert, seed=q.tol.seed)
    out = rep.to_json()
    out["certificate"] = cert.to_json()
    _emit(args, out, p.tol)
    return EXIT_OK if rep.holds else EXIT_INVALID


COMMANDS = {"verify": cmd_verify, "construct": cmd_construct, "dual": cmd_dual,
            "dual-bound": cmd_dual_bound, "brute": cmd_brute, "slater": cmd_slater,
            "project": cmd_project}


def run(argv: Optional[List[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
        return COMMANDS[args.cmd](args)
    except (UsageError, ModelError, OSError, json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except (SlaterViolated, NoFeasibleFiber, DegenerateRow) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_INVALID
    except (Inconclusive, BudgetExceeded, NoValidSubset, SolverStalled,
            StationarityResidualTooLarge) as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_INCONCLUSIVE
    except MicoError as exc:
        sys.stderr.write(f"{type(exc).__name__}: {exc}\n")
        return EXIT_USAGE


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
