"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line (shown in the terminal summary and,
with ``-s``, inline) and then asserts it.
"""

import collections
import copy
import time
from fractions import Fraction

import numpy as np
import pytest

from micocert import Affine, Box, Problem, Quad
from micocert import certificate as C
from micocert import dual as D
from micocert import geometry as geo
from micocert import oracle
from micocert.certificate import ObjectivePoint, Thm3Certificate
from micocert.errors import MicoError, NoFeasiblePoint

from instances import (crafted_exhaustive_instance, example_boundary_certificate, example_problem,
                       random_polyhedron, random_problem)

SUITE_SIZE = 200


# -- shared round-trip suite -------------------------------------------------


@pytest.fixture(scope="module")
def suite():
    """Construct, verify, solve by brute force and dualise 200 seeded instances."""
    rows = []
    for seed in range(SUITE_SIZE):
        p = random_problem(seed)
        row = {"seed": seed, "p": p, "slater": C.check_mixed_slater(p).holds,
               "cert": None, "verdict": None, "error": None}
        try:
            cert, rep = C.construct_certificate(p)
            row["cert"], row["verdict"] = cert, rep.verdict
        except MicoError as exc:
            row["error"] = type(exc).__name__
        try:
            row["oracle"] = oracle.brute_force_solve(p).value
        except NoFeasiblePoint:
            row["oracle"] = None
        if row["verdict"] == C.VALID:
            try:
                dp = D.dual_from_certificate(p, row["cert"])
                row["dual"] = (dp, D.verify_dual_pair(p, dp))
            except MicoError as exc:
                row["dual"] = (None, type(exc).__name__)
        rows.append(row)
    return rows


def _valid(rows):
    return [r for r in rows if r["verdict"] == C.VALID]


# -- criterion 1 --------------------------------------------------------------


def test_criterion_1_worked_example(criterion):
    p = example_problem()
    t0 = time.perf_counter()
    cert, rep = C.construct_certificate(p)
    verdict = C.verify_thm2(p, cert).verdict
    orc = oracle.brute_force_solve(p)
    dp = D.dual_from_certificate(p, cert)
    drep = D.verify_dual_pair(p, dp)
    elapsed = time.perf_counter() - t0
    n_fibers = len(list(p.fibers()))
    ok = (cert.k <= 4 and verdict == C.VALID and orc.value == pytest.approx(1.0, abs=1e-9)
          and orc.argmin.tolist() == [0.0, 0.0] and abs(dp.alpha - 1.0) <= 1e-6
          and drep.holds and drep.fibers == n_fibers and elapsed < 5.0)
    criterion(1, "worked example end to end", ok,
              f"k={cert.k}, verdict={verdict}, oracle={orc.value:.9g} at {orc.argmin.tolist()}, "
              f"alpha={dp.alpha:.9g}, dual holds on {drep.fibers}/{n_fibers} fibers, {elapsed:.2f}s")


# -- criterion 2 --------------------------------------------------------------


def test_criterion_2_single_multiplier_gap(criterion):
    p = example_problem()
    pts = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    grid = np.round(np.arange(0, 1001) * 0.01, 10)
    U1, U2 = np.meshgrid(grid, grid, indexing="ij")
    U = np.stack([U1.ravel(), U2.ravel()], axis=1)
    vals = np.min(np.column_stack([p.f(x) + U @ p.gvals(x) for x in pts]), axis=1)
    worst = float(vals.max())
    # spot-check the vectorised values against the library routine
    rng = np.random.default_rng(0)
    sample = rng.choice(len(U), 200, replace=False)
    agree = all(abs(D.lagrangian_value(p, U[i], pts) - vals[i]) <= 1e-12 for i in sample)
    ok = agree and worst <= 0.5 + 1e-9 and worst < 1.0
    criterion(2, "single-multiplier bound stays at 1/2", ok,
              f"max over {len(U)} grid multipliers = {worst:.12g}")


# -- criterion 3 --------------------------------------------------------------


def test_criterion_3_round_trip_suite(suite, criterion):
    problems = []
    for r in suite:
        if r["verdict"] is None:
            continue
        p, cert = r["p"], r["cert"]
        if r["verdict"] != C.VALID:
            problems.append((r["seed"], f"verdict {r['verdict']}"))
            continue
        tol = 1e-5 + 2 * p.tol.eps_solve
        value = float(p.f(cert.x_star))
        if r["oracle"] is None or abs(value - r["oracle"]) > tol:
            problems.append((r["seed"], f"value {value} vs oracle {r['oracle']}"))
        if cert.k > 2 ** p.n:
            problems.append((r["seed"], f"k={cert.k} > 2^{p.n}"))
    slater = [r for r in suite if r["slater"]]
    built = [r for r in slater if r["verdict"] == C.VALID]
    rate = len(built) / max(1, len(slater))
    failures = collections.Counter(r["error"] or r["verdict"] for r in suite if r["verdict"] != C.VALID)
    classified = all(r["error"] is not None or r["verdict"] is not None for r in suite)
    ok = not problems and rate >= 0.95 and classified
    criterion(3, "round-trip property suite", ok,
              f"{len(built)}/{len(slater)} Slater instances certified ({rate:.1%}), "
              f"failures by class {dict(failures)}, mismatches {problems[:5]}")


# -- criterion 4 --------------------------------------------------------------


def test_criterion_4_weak_and_strong_duality(suite, criterion):
    bad, verified, unverified = [], 0, []
    for r in _valid(suite):
        dp, rep = r["dual"]
        if dp is None or not rep.holds:
            unverified.append(r["seed"])
            continue
        verified += 1
        if not (dp.alpha <= r["oracle"] + 1e-5 and abs(dp.alpha - r["oracle"]) <= 1e-5):
            bad.append((r["seed"], dp.alpha, r["oracle"]))
    ok = verified > 0 and not bad and not unverified
    criterion(4, "dual value equals the oracle optimum", ok,
              f"{verified} verified pairs, {len(bad)} gaps, unverified derived pairs {unverified}")


# -- criterion 5 --------------------------------------------------------------


def test_criterion_5_lattice_free_cross_validation(criterion):
    disagree, free = [], 0
    for seed in range(500):
        P, box, n = random_polyhedron(seed)
        fast = geo.mixed_lattice_free(P, box, n)
        slow = oracle.enumerate_strict_points(P, box, n, first_only=True)
        free += fast.lattice_free
        if fast.status == geo.UNBOUNDED_INCONCLUSIVE or fast.lattice_free != (not slow):
            disagree.append(seed)
    criterion(5, "lattice-freeness agrees with enumeration", not disagree,
              f"500 polyhedra, {free} lattice-free, disagreements {disagree}")


# -- criterion 6 --------------------------------------------------------------


def test_criterion_6_doignon_bound(suite, criterion):
    over = [(r["seed"], r["cert"].k) for r in suite
            if r["cert"] is not None and r["cert"].k > 2 ** r["p"].n]
    hs = crafted_exhaustive_instance()
    B = Box([-3, -3], [3, 3])
    sel = geo.doignon_select(hs, B, 1)
    sub_free = geo.mixed_lattice_free([hs[i] for i in sel.indices], B, 1).lattice_free
    crafted_ok = sel.exhaustive and sel.greedy_size > 2 and len(sel.indices) <= 2 and sub_free
    ok = not over and crafted_ok
    criterion(6, "selections within 2^n and exhaustive fallback exercised", ok,
              f"oversized selections {over}, crafted instance: greedy {sel.greedy_size} -> "
              f"exhaustive {sel.indices}")


# -- criterion 7 --------------------------------------------------------------


def _cut(p, pt):
    v = pt.normal.copy()
    v[p.n:] = 0.0
    if np.max(np.abs(v), initial=0.0) <= p.tol.tau_stat:
        return geo.HalfSpace(np.zeros(p.dim), 0.0, True)
    return geo.HalfSpace(v, float(v @ pt.x), True)


def _non_redundant(p, cert):
    """Index of a point whose cut is needed for lattice-freeness (by enumeration)."""
    cuts = [_cut(p, pt) for pt in cert.points]
    for i in range(cert.k - 1, -1, -1):
        rest = geo.OpenPolyhedron(tuple(c for j, c in enumerate(cuts) if j != i))
        if oracle.enumerate_strict_points(rest, p.box, p.n, first_only=True):
            return i
    return None


def _mutations(p, cert):
    flip = copy.deepcopy(cert)
    i = next(i for i, pt in enumerate(flip.points) if np.any(pt.u > 0))
    j = int(np.flatnonzero(flip.points[i].u > 0)[0])
    flip.points[i].u[j] = -flip.points[i].u[j]
    drop = copy.deepcopy(cert)
    k = _non_redundant(p, cert)
    if k is None:
        return flip, None, None
    del drop.points[k]
    shift = copy.deepcopy(cert)
    shift.points[-1].x[0] += 0.5
    return flip, drop, shift


def test_criterion_7_mutations(suite, criterion):
    counts = collections.Counter()
    survivors, skipped = [], []
    for r in _valid(suite):
        if counts["certificates"] == 50:
            break
        p = r["p"]
        flip, drop, shift = _mutations(p, r["cert"])
        if drop is None:
            skipped.append(r["seed"])
            continue
        counts["certificates"] += 1
        for name, mutant in (("sign flip", flip), ("deletion", drop), ("lattice shift", shift)):
            if C.verify_thm2(p, mutant).verdict == C.INVALID:
                counts[name] += 1
            else:
                survivors.append((r["seed"], name))
    ok = counts["certificates"] == 50 and not survivors
    criterion(7, "mutations flip the verdict to Invalid", ok,
              f"{dict(counts)}, surviving mutants {survivors}, no essential point {skipped}")


# -- criterion 8 --------------------------------------------------------------


def test_criterion_8_projection(criterion):
    bad, checked = [], 0
    for s in range(50):
        p = random_problem(1000 + s)
        y = np.random.default_rng(s).uniform(p.box.lo, p.box.hi)
        q = p.with_objective(C.projection_objective(y))
        try:
            cert, rep = C.construct_certificate(q)
        except MicoError as exc:
            bad.append((1000 + s, type(exc).__name__))
            continue
        out = C.verify_projection_property(p, y, cert)
        checked += out.checked
        if not rep.valid or out.counterexamples:
            bad.append((1000 + s, rep.verdict, len(out.counterexamples)))
    criterion(8, "projection property", not bad,
              f"50 instances, {checked} sample points, problems {bad}")


# -- criterion 9 --------------------------------------------------------------


def test_criterion_9_boundary_certificates(criterion):
    p = example_problem()
    single = Problem(2, 0, Quad(np.eye(2), [-1, -1], 1), [Affine([1, 0], -3)], Box([-3, -3], [3, 3]))
    degenerate = C.verify_thm3(single, Thm3Certificate([ObjectivePoint([1, 1], [0, 0])], [])).verdict
    hand = C.verify_thm3(p, example_boundary_certificate()).verdict
    off = C.verify_thm3(p, example_boundary_certificate((0.2, 0.0)))
    big = C.verify_thm3(p, Thm3Certificate([ObjectivePoint([0, 0], [-1, -1])] * 5, []))
    ok = (degenerate == C.VALID and hand == C.VALID and off.verdict == C.INVALID
          and "(c)" in off.failed_labels() and "size" in big.failed_labels())
    criterion(9, "boundary-point certificates", ok,
              f"degenerate {degenerate}, hand {hand}, non-boundary {off.verdict} "
              f"{off.failed_labels()}, oversize {big.failed_labels()}")


# -- criterion 10 -------------------------------------------------------------

F = Fraction
# name, n, d, c, A, b, box lo, box hi, optimum, split_k, U
LINEAR = [
    ("1d", 1, 0, [-1], [[2]], [3], [-5], [5], F(-1), 1, [[0], [1]]),
    ("diag", 2, 0, [-1, -1], [[2, 2]], [3], [-4, -4], [4, 4], F(-1), 1, [[0], [1], [1], [1]]),
    ("knap", 2, 0, [-3, -2], [[2, 2], [1, 0], [-1, 0], [0, -1]], [5, F(3, 2), F(1, 2), F(1, 2)],
     [-1, -1], [4, 4], F(-5), 1,
     [[0, 0, 0, 0], [1, 0, 0, 0], [0, 2, 0, 0], [0, 2, 0, 0]]),
    ("mixed", 1, 1, [F(-1, 8), -1], [[1, 1], [-1, 1], [0, -1]], [F(3, 2), 0, F(1, 4)],
     [-2, -2], [3, 3], F(-5, 8), 2, [[1, 0, 0], [0, 1, 0]]),
    ("band", 2, 0, [1, 1], [[-2, 2], [2, -2], [-2, -2]], [1, 1, -3], [-3, -3], [4, 4], F(2), 1,
     [[0, 0, 0], [0, 0, F(1, 3)], [1, 0, 0], [0, 1, 0]]),
]


def test_criterion_10_exact_linear_path(criterion):
    results = []
    ok = True
    for name, n, d, c, A, b, lo, hi, opt, k, U in LINEAR:
        box = Box(lo, hi)
        at = D.linear_dual_check(c, A, b, n, d, opt, U, k, box, exact=True)
        above = D.linear_dual_check(c, A, b, n, d, opt + 1, U, k, box, exact=True)
        exact_rows = all(isinstance(h.offset, Fraction) for h in at.polyhedron)
        p = Problem(n, d, Affine([float(v) for v in c], 0.0),
                    [Affine([float(v) for v in a], -float(bi)) for a, bi in zip(A, b)], box)
        value = oracle.brute_force_solve(p).value
        good = (at.lattice_free and above.status == geo.WITNESS and exact_rows
                and abs(value - float(opt)) <= 1e-6)
        ok = ok and good
        results.append(f"{name}: {at.status} at {opt}, {above.status} at {opt + 1}")
    criterion(10, "exact rational dual check on five LPs", ok, "; ".join(results))
