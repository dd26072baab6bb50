"""Lattice-free optimality certificates: data model, verification, construction.

A KKT-style certificate lists mixed-integer points ``x_i`` with weights
``u_i`` (length ``m+1``, objective last) and subgradients ``h_{i,j}``.
The open half-spaces ``{x : v_i.(x - x_i) < 0}`` with
``v_i = sum_j u_{i,j} h_{i,j}`` must jointly contain no point of
``Z^n x R^d``; together with per-point KKT-type conditions this proves
that ``x_1`` is optimal.

The boundary-point variant (``Thm3Certificate``) replaces the weights by
objective points with strict rows and constraint-boundary points with
weak rows.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import expr as ex
from . import fiber as fb
from . import geometry as geo
from . import lp, solver
from .errors import (BudgetExceeded, Inconclusive, MicoError, ModelError, NoFeasibleFiber,
                     SlaterViolated, SolverStalled, StationarityResidualTooLarge)
from .problem import Problem, Tolerances

VALID = "Valid"
INVALID = "Invalid"
INCONCLUSIVE = "Inconclusive"

MAX_INTEGER_DIM = 8
MAX_CORNER_DIM = 12
MAX_EXTRA_FIBERS = 64


# -- data model ------------------------------------------------------------


@dataclass
class CertificatePoint:
    x: np.ndarray
    u: np.ndarray
    h: List[np.ndarray]

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.h = [np.asarray(v, dtype=float) for v in self.h]

    @property
    def normal(self) -> np.ndarray:
        out = np.zeros_like(self.x)
        for uj, hj in zip(self.u, self.h):
            if uj:
                out = out + uj * hj
        return out

    def to_json(self):
        return {"x": self.x.tolist(), "u": self.u.tolist(), "h": [v.tolist() for v in self.h]}


@dataclass
class KKTCertificate:
    points: List[CertificatePoint]
    theorem: str = "2"
    claimed_value: Optional[float] = None

    @property
    def k(self):
        return len(self.points)

    @property
    def x_star(self):
        return self.points[0].x

    def polyhedron(self) -> geo.OpenPolyhedron:
        return geo.OpenPolyhedron(tuple(geo.HalfSpace(pt.normal, float(pt.normal @ pt.x))
                                        for pt in self.points))

    def to_json(self):
        out = {"theorem": self.theorem, "points": [pt.to_json() for pt in self.points],
               "y_points": []}
        if self.claimed_value is not None:
            out["claimed_value"] = float(self.claimed_value)
        return out


@dataclass
class ObjectivePoint:
    x: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.h = np.asarray(self.h, dtype=float)


@dataclass
class BoundaryPoint:
    y: np.ndarray
    j: int
    h: np.ndarray

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        self.h = np.asarray(self.h, dtype=float)
        self.j = int(self.j)


@dataclass
class Thm3Certificate:
    """Objective points (strict rows) plus constraint-boundary points (weak rows).

    ``j`` is the 0-based constraint index in memory and 1-based in JSON.
    """

    x_points: List[ObjectivePoint]
    y_points: List[BoundaryPoint] = field(default_factory=list)
    claimed_value: Optional[float] = None
    theorem: str = "3"

    @property
    def x_star(self):
        return self.x_points[0].x

    def polyhedron(self) -> geo.OpenPolyhedron:
        rows = [geo.HalfSpace(q.h, float(q.h @ q.x), True) for q in self.x_points]
        rows += [geo.HalfSpace(b.h, float(b.h @ b.y), False) for b in self.y_points]
        return geo.OpenPolyhedron(tuple(rows))

    def to_json(self):
        out = {"theorem": "3",
               "points": [{"x": q.x.tolist(), "h": [q.h.tolist()]} for q in self.x_points],
               "y_points": [{"y": b.y.tolist(), "j": b.j + 1, "h": b.h.tolist()}
                            for b in self.y_points]}
        if self.claimed_value is not None:
            out["claimed_value"] = float(self.claimed_value)
        return out


def certificate_from_json(obj: dict):
    """Parse either certificate flavour from its JSON form."""
    try:
        theorem = str(obj.get("theorem", "2"))
        claimed = obj.get("claimed_value")
        if theorem == "3":
            xs = []
            for q in obj["points"]:
                h = np.asarray(q["h"], dtype=float)
                xs.append(ObjectivePoint(q["x"], h[-1] if h.ndim == 2 else h))
            ys = [BoundaryPoint(b["y"], int(b["j"]) - 1, b["h"]) for b in obj.get("y_points", [])]
            return Thm3Certificate(xs, ys, claimed)
        pts = []
        for q in obj["points"]:
            h = np.asarray(q["h"], dtype=float)
            if h.ndim == 1:
                h = h[None, :]
            u = q.get("u", [1.0] * len(h))
            pts.append(CertificatePoint(q["x"], u, list(h)))
        return KKTCertificate(pts, theorem, claimed)
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelError(f"malformed certificate: {exc}") from exc


def load_certificate(path):
    with open(path) as fh:
        return certificate_from_json(json.load(fh))


# -- reports ---------------------------------------------------------------


@dataclass
class Check:
    label: str
    passed: bool
    detail: str = ""
    point: Optional[int] = None
    inconclusive: bool = False

    def to_json(self):
        out = {"label": self.label, "passed": self.passed, "detail": self.detail}
        if self.point is not None:
            out["point"] = self.point
        if self.inconclusive:
            out["inconclusive"] = True
        return out


@dataclass
class VerificationReport:
    theorem: str
    checks: List[Check] = field(default_factory=list)
    witness: Optional[dict] = None

    @property
    def verdict(self) -> str:
        hard = [c for c in self.checks if not c.passed and not c.inconclusive]
        if hard:
            return INVALID
        if any(c.inconclusive for c in self.checks):
            return INCONCLUSIVE
        return VALID

    @property
    def valid(self):
        return self.verdict == VALID

    def failed(self, label: Optional[str] = None) -> List[Check]:
        return [c for c in self.checks if not c.passed and (label is None or c.label == label)]

    def failed_labels(self):
        return sorted({c.label for c in self.failed()})

    def add(self, label, passed, detail="", point=None, inconclusive=False):
        self.checks.append(Check(label, bool(passed), detail, point, inconclusive))
        return passed

    def to_json(self):
        return {"theorem": self.theorem, "verdict": self.verdict,
                "checks": [c.to_json() for c in self.checks], "witness": self.witness}


# -- shared verification pieces --------------------------------------------


def probe_points(p: Problem, extra: Sequence[np.ndarray], n_random: int, seed: int) -> np.ndarray:
    """Deterministic probe set: box corners, the given points, random box points."""
    parts = []
    if p.dim <= MAX_CORNER_DIM:
        parts.append(p.box.corners())
    if len(extra):
        parts.append(np.array(extra, dtype=float).reshape(len(extra), p.dim))
    rng = np.random.default_rng(seed)
    parts.append(rng.uniform(p.box.lo, p.box.hi, size=(n_random, p.dim)))
    return np.vstack(parts)


def subgradient_violation(e: ex.ConvexExpr, x, h, probes) -> float:
    """Largest scaled failure of ``e(q) >= e(x) + h.(q - x)`` over the probes."""
    fx = float(ex.evaluate(e, x))
    fq = np.atleast_1d(ex.evaluate(e, probes))
    gap = fx + (probes - x) @ h - fq
    scale = 1.0 + np.abs(fq) + abs(fx)
    return float(np.max(gap / scale, initial=-np.inf))


def _lattice_check(rep: VerificationReport, label: str, P: geo.OpenPolyhedron, p: Problem):
    tol = p.tol
    try:
        res = geo.mixed_lattice_free(P, p.box, p.n, tol.kappa, tol.margin,
                                     int(tol.fiber_budget), tol.tau_strict)
    except BudgetExceeded as exc:
        rep.add(label, False, f"lattice enumeration budget exceeded: {exc}", inconclusive=True)
        return
    if res.status == geo.WITNESS:
        w = [float(v) for v in res.witness]
        rep.witness = {"condition": label, "point": w}
        rep.add(label, False, f"polyhedron contains mixed-integer point {w}")
    elif res.status == geo.UNBOUNDED_INCONCLUSIVE:
        rep.add(label, False, "polyhedron reaches the inflated box; lattice-freeness undecided",
                inconclusive=True)
    else:
        rep.add(label, True, "lattice-free")


def _finite(*arrays):
    return all(np.all(np.isfinite(np.asarray(a, dtype=float))) for a in arrays)


def _cert_normals(p: Problem, cert: KKTCertificate, stat_ok: Sequence[bool], exact=False):
    """Half-spaces used for the lattice test.

    Once the continuous block is verified small, it is set to zero, and a
    normal that is numerically zero becomes the empty half-space.  With
    ``exact`` the float data are converted to fractions before testing.
    """
    tol = p.tol
    make = geo.exact_halfspace if exact else geo.HalfSpace
    rows = []
    for pt, ok in zip(cert.points, stat_ok):
        v = pt.normal.copy()
        if ok:
            v[p.n:] = 0.0
        if np.max(np.abs(v), initial=0.0) <= tol.tau_stat:
            rows.append(make(np.zeros(p.dim), 0.0, True))
        elif exact:
            nrm = [lp.to_fraction(a) for a in v]
            off = sum((a * lp.to_fraction(b) for a, b in zip(nrm, pt.x)), Fraction(0))
            rows.append(geo.HalfSpace(np.array(nrm, dtype=object), off, True))
        else:
            rows.append(geo.HalfSpace(v, float(v @ pt.x), True))
    return geo.OpenPolyhedron(tuple(rows))


def _structure(rep, p: Problem, cert: KKTCertificate, width: int) -> bool:
    if cert.k < 1:
        rep.add("size", False, "certificate has no points")
        return False
    for i, pt in enumerate(cert.points):
        if pt.x.shape != (p.dim,) or pt.u.shape != (width,) or len(pt.h) != width or \
                any(v.shape != (p.dim,) for v in pt.h):
            rep.add("malformed", False, f"point {i} has inconsistent dimensions", i)
            return False
        if not _finite(pt.x, pt.u, *pt.h):
            rep.add("malformed", False, f"point {i} contains NaN or infinity", i)
            return False
    rep.add("size", cert.k <= 2 ** p.n, f"k = {cert.k}, bound 2^n = {2 ** p.n}")
    return True


# -- multiplier certificates (constrained and ordered forms) --------------


def verify_thm2(p: Problem, cert: KKTCertificate, tol: Optional[Tolerances] = None,
                exact: bool = False) -> VerificationReport:
    """Check the five-condition certificate for a constrained problem.

    Condition labels (a)-(e) follow the usual statement; extra labels are
    ``size``, ``integrality``, ``nonnegativity``, ``feasibility`` and
    ``subgradient``.
    """
    if tol is not None:
        p = p.with_tol(tol)
    tol = p.tol
    rep = VerificationReport("2")
    m, d = p.m, p.d
    if not _structure(rep, p, cert, m + 1):
        return rep
    xs = cert.x_star
    fstar = float(ex.evaluate(p.f, xs))
    for i, pt in enumerate(cert.points):
        rep.add("integrality", p.is_mixed_integer(pt.x), f"point {i} integer block {pt.x[:p.n].tolist()}", i)
        rep.add("nonnegativity", bool(np.all(pt.u >= 0)), f"u_{i} = {pt.u.tolist()}", i)
    gstar = p.gvals(xs)
    rep.add("feasibility", m == 0 or gstar.max() <= tol.tau_feas,
            f"max g(x*) = {gstar.max() if m else -math.inf:.3g}", 0)

    probes = probe_points(p, [pt.x for pt in cert.points], tol.n_probe, tol.seed)
    funcs = p.funcs
    for i, pt in enumerate(cert.points):
        worst, which = -np.inf, None
        for j in range(m + 1):
            if pt.u[j] > 0:
                v = subgradient_violation(funcs[j], pt.x, pt.h[j], probes)
                if v > worst:
                    worst, which = v, j
        rep.add("subgradient", worst <= tol.tau_num,
                f"point {i}: worst scaled violation {worst:.3g}" +
                ("" if which is None else f" (function {which + 1})"), i)

    stat_ok = []
    for i, pt in enumerate(cert.points):
        gv = p.gvals(pt.x)
        feasible = m == 0 or gv.max() <= tol.tau_feas
        fi = float(ex.evaluate(p.f, pt.x))
        if feasible:
            ok = fi >= fstar - tol.tau_num
            detail = [] if ok else [f"f(x_{i}) = {fi:.10g} < f(x*) = {fstar:.10g}"]
            if not pt.u[m] > 0:
                ok = False
                detail.append("objective weight is not positive")
            comp = np.abs(pt.u[:m] * gv)
            if m and comp.max() > tol.tau_comp:
                ok = False
                detail.append(f"complementarity {comp.max():.3g}")
            rep.add("(a)", ok, "; ".join(detail) or f"point {i} feasible", i)
        else:
            top = gv.max()
            I = set(np.flatnonzero(gv >= top - tol.tau_act).tolist())
            bad = [j + 1 for j in range(m) if pt.u[j] != 0 and j not in I]
            ok = pt.u[m] == 0 and not bad
            detail = f"point {i} infeasible, argmax set {sorted(j + 1 for j in I)}"
            if pt.u[m] != 0:
                detail += "; objective weight must vanish"
            if bad:
                detail += f"; weight outside argmax on {bad}"
            rep.add("(b)", ok, detail, i)
        supp = int(np.count_nonzero(pt.u))
        rep.add("(c)", 1 <= supp <= d + 1, f"point {i}: |supp(u)| = {supp}, allowed 1..{d + 1}", i)
        r = float(np.max(np.abs(pt.normal[p.n:]), initial=0.0))
        stat_ok.append(r <= tol.tau_stat)
        rep.add("(e)", r <= tol.tau_stat, f"point {i}: continuous block residual {r:.3g}", i)

    _lattice_check(rep, "(d)", _cert_normals(p, cert, stat_ok, exact), p)
    return rep


def verify_thm1(p: Problem, cert: KKTCertificate, tol: Optional[Tolerances] = None,
                exact: bool = False) -> VerificationReport:
    """Unconstrained certificate: ordered values, lattice-free cone, flat continuous block."""
    if tol is not None:
        p = p.with_tol(tol)
    tol = p.tol
    rep = VerificationReport("1")
    if p.m != 0:
        rep.add("malformed", False, f"problem has {p.m} constraints; use the constrained check")
        return rep
    if not _structure(rep, p, cert, 1):
        return rep
    probes = probe_points(p, [pt.x for pt in cert.points], tol.n_probe, tol.seed)
    vals = [float(ex.evaluate(p.f, pt.x)) for pt in cert.points]
    for i, pt in enumerate(cert.points):
        rep.add("integrality", p.is_mixed_integer(pt.x), f"point {i}", i)
        v = subgradient_violation(p.f, pt.x, pt.h[0], probes)
        rep.add("subgradient", v <= tol.tau_num, f"point {i}: worst scaled violation {v:.3g}", i)
    for i in range(1, len(vals)):
        rep.add("(a)", vals[i] >= vals[i - 1] - tol.tau_num,
                f"f(x_{i}) = {vals[i]:.10g} vs f(x_{i - 1}) = {vals[i - 1]:.10g}", i)
    stat_ok = []
    for i, pt in enumerate(cert.points):
        r = float(np.max(np.abs(pt.h[0][p.n:]), initial=0.0))
        stat_ok.append(r <= tol.tau_stat)
        rep.add("(c)", r <= tol.tau_stat, f"point {i}: continuous block {r:.3g}", i)
    unit = KKTCertificate([CertificatePoint(pt.x, [1.0], [pt.h[0]]) for pt in cert.points], "1")
    _lattice_check(rep, "(b)", _cert_normals(p, unit, stat_ok, exact), p)
    return rep


def verify(p: Problem, cert, tol: Optional[Tolerances] = None, exact: bool = False) -> VerificationReport:
    """Dispatch on the certificate's theorem tag."""
    if isinstance(cert, Thm3Certificate):
        return verify_thm3(p, cert, tol)
    if cert.theorem == "1":
        return verify_thm1(p, cert, tol, exact)
    return verify_thm2(p, cert, tol, exact)


# -- boundary-point certificates -------------------------------------------


def check_slater(p: Problem, eps: Optional[float] = None):
    """Look for ``s`` in the box with ``g(s) < -tau_strict`` (all coordinates free).

    Returns ``(holds, point, value)``; ``m = 0`` holds vacuously.
    """
    tol = p.tol
    if p.m == 0:
        return True, None, -math.inf
    eps = tol.eps_solve if eps is None else eps
    r = solver.minimize(list(p.g), [], np.zeros(p.dim), np.arange(p.dim), p.box.lo, p.box.hi,
                        eps, tol.tau_feas, tol.max_iter,
                        stop=lambda ub, lb: ub < -tol.tau_strict or lb >= -tol.tau_strict)
    return bool(r.value < -tol.tau_strict), r.x, float(r.value)


def verify_thm3(p: Problem, cert: Thm3Certificate, tol: Optional[Tolerances] = None) -> VerificationReport:
    """Check a boundary-point certificate (strict objective rows, weak boundary rows)."""
    if tol is not None:
        p = p.with_tol(tol)
    tol = p.tol
    rep = VerificationReport("3")
    k, l = len(cert.x_points), len(cert.y_points)
    if k < 1:
        rep.add("size", False, "certificate has no objective points")
        return rep
    for q in cert.x_points:
        if q.x.shape != (p.dim,) or q.h.shape != (p.dim,) or not _finite(q.x, q.h):
            rep.add("malformed", False, "objective point with wrong shape or non-finite entries")
            return rep
    for b in cert.y_points:
        if b.y.shape != (p.dim,) or b.h.shape != (p.dim,) or not _finite(b.y, b.h) \
                or not 0 <= b.j < p.m:
            rep.add("malformed", False, "boundary point with wrong shape, index or entries")
            return rep
    bound = 2 ** p.n * (p.d + 1)
    rep.add("size", k + l <= bound, f"k + l = {k + l}, bound 2^n (d+1) = {bound}")
    holds, s, val = check_slater(p)
    rep.add("slater", holds, f"min max_j g_j over the box = {val:.3g}")
    xs = cert.x_star
    rep.add("integrality", p.is_mixed_integer(xs), "x* integer block", 0)
    gstar = p.gvals(xs)
    rep.add("(a)", p.m == 0 or gstar.max() <= tol.tau_feas,
            f"max g(x*) = {gstar.max() if p.m else -math.inf:.3g}", 0)
    fstar = float(ex.evaluate(p.f, xs))
    probes = probe_points(p, [q.x for q in cert.x_points] + [b.y for b in cert.y_points],
                          tol.n_probe, tol.seed)
    for i, q in enumerate(cert.x_points):
        fi = float(ex.evaluate(p.f, q.x))
        rep.add("(b)", fi >= fstar - tol.tau_num, f"f(x_{i}) = {fi:.10g}, f(x*) = {fstar:.10g}", i)
        v = subgradient_violation(p.f, q.x, q.h, probes)
        rep.add("subgradient", v <= tol.tau_num, f"objective point {i}: violation {v:.3g}", i)
    for i, b in enumerate(cert.y_points):
        gv = p.gvals(b.y)
        rep.add("(b)", gv.max() <= tol.tau_feas, f"boundary point {i}: max g = {gv.max():.3g}", i)
        rep.add("(c)", abs(gv[b.j]) <= tol.tau_act,
                f"boundary point {i}: g_{b.j + 1}(y) = {gv[b.j]:.3g}", i)
        v = subgradient_violation(p.g[b.j], b.y, b.h, probes)
        rep.add("subgradient", v <= tol.tau_num, f"boundary point {i}: violation {v:.3g}", i)
    rows = []
    for q in cert.x_points:
        if np.max(np.abs(q.h), initial=0.0) <= tol.tau_stat:
            rows.append(geo.HalfSpace(np.zeros(p.dim), 0.0, True))
        else:
            rows.append(geo.HalfSpace(q.h, float(q.h @ q.x), True))
    for b in cert.y_points:
        rows.append(geo.HalfSpace(b.h, float(b.h @ b.y), False))
    _lattice_check(rep, "(c)", geo.OpenPolyhedron(tuple(rows)), p)
    return rep


# -- mixed-integer Slater --------------------------------------------------


@dataclass
class SlaterReport:
    holds: bool
    violating: List[tuple]
    feasible: List[tuple]
    stalled: List[tuple] = field(default_factory=list)

    def to_json(self):
        return {"holds": self.holds, "violating": [list(z) for z in self.violating],
                "feasible_fibers": len(self.feasible), "stalled": [list(z) for z in self.stalled]}


def _map(fn, items, jobs):
    if jobs and jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


def _guard(p: Problem):
    if p.n > MAX_INTEGER_DIM:
        raise ModelError(f"n = {p.n} exceeds the enumeration guard ({MAX_INTEGER_DIM})")
    if p.n_fibers() > p.tol.fiber_budget:
        raise BudgetExceeded(f"{p.n_fibers()} fibers exceed the budget {p.tol.fiber_budget:g}")


def check_mixed_slater(p: Problem, eps: Optional[float] = None, jobs: int = 1) -> SlaterReport:
    """Every feasible fiber in the box must contain a strictly feasible point."""
    _guard(p)
    fibers = list(p.fibers())
    if p.m == 0:
        return SlaterReport(True, [], fibers)

    def one(z):
        try:
            return fb.fiber_status(p, z, eps)
        except SolverStalled:
            return "stalled"

    states = _map(one, fibers, jobs)
    bad = [z for z, s in zip(fibers, states) if s == "weak"]
    stalled = [z for z, s in zip(fibers, states) if s == "stalled"]
    feas = [z for z, s in zip(fibers, states) if s in ("strict", "weak")]
    return SlaterReport(not bad and not stalled, bad, feas, stalled)


# -- construction ----------------------------------------------------------


@dataclass
class FiberOutcome:
    z: tuple
    result: Optional[fb.FiberResult]
    error: Optional[str] = None


def solve_fibers(p: Problem, eps: Optional[float] = None, jobs: int = 1) -> List[FiberOutcome]:
    """Run the fiber solver on every integer vector of the box, in lexicographic order."""
    _guard(p)

    def one(z):
        try:
            return FiberOutcome(z, fb.fiber_minimize(p, z, eps))
        except (SolverStalled, StationarityResidualTooLarge) as exc:
            return FiberOutcome(z, None, f"{type(exc).__name__}: {exc}")

    return _map(one, list(p.fibers()), jobs)


def _point(r: fb.FiberResult) -> CertificatePoint:
    return CertificatePoint(r.x.copy(), r.u.copy(), [h.copy() for h in r.h])


def _halfspace(p: Problem, r: fb.FiberResult) -> geo.HalfSpace:
    """``v.(x - x_r) < 0`` with ``v`` the aggregated normal, continuous block dropped."""
    v = r.aggregate.copy()
    v[p.n:] = 0.0
    if np.max(np.abs(v), initial=0.0) <= p.tol.tau_stat:
        return geo.HalfSpace(np.zeros(p.dim), 0.0, True)
    return geo.HalfSpace(v, float(v @ r.x), True)


def _extend_pool(p: Problem, pool, hs, incumbent, eps, tol: Tolerances):
    """Solve fibers outside the box until the pool's polyhedron is lattice-free.

    Each round tests the full polyhedron; a witness (or, when the search
    region is exceeded, the nearest integer vector to the extreme point)
    names a fiber that no pool point cuts yet.  A feasible fiber outside
    the box that beats the incumbent means the box hides the optimum.
    """
    seen = {r.z for r in pool}
    for _ in range(MAX_EXTRA_FIBERS):
        res = geo.mixed_lattice_free(geo.OpenPolyhedron(tuple(hs)), p.box, p.n, tol.kappa,
                                     tol.margin, int(tol.fiber_budget), tol.tau_strict)
        if res.status == geo.LATTICE_FREE:
            return
        point = res.witness if res.status == geo.WITNESS else res.extreme
        z = tuple(int(round(float(v))) for v in point[: p.n])
        if z in seen:
            return
        seen.add(z)
        try:
            r = fb.fiber_minimize(p, z, eps, in_box=False)
        except (SolverStalled, StationarityResidualTooLarge):
            return
        if r.feasible and r.value < incumbent.value - tol.tau_feas:
            raise NoValidSubset(f"fiber {z} outside the box has value {r.value:.9g} below "
                                f"the box optimum {incumbent.value:.9g}")
        if r.feasible and r.slater_ok is False:
            raise SlaterViolated(f"fiber {z} has no strictly feasible point", [z])
        pool.append(r)
        hs.append(_halfspace(p, r))


def construct_certificate(p: Problem, eps: Optional[float] = None, tol: Optional[Tolerances] = None,
                          jobs: int = 1):
    """Build a certificate by solving every fiber and selecting half-spaces.

    Returns ``(certificate, report)`` where the report is a fresh
    verification of the result.  Raises :class:`NoFeasibleFiber`,
    :class:`SlaterViolated`, or selection errors from the geometry layer.
    """
    if tol is not None:
        p = p.with_tol(tol)
    tol = p.tol
    outcomes = solve_fibers(p, eps, jobs)
    solved = [o.result for o in outcomes if o.result is not None]
    feasible = [r for r in solved if r.feasible]
    weak = [r.z for r in feasible if r.slater_ok is False]
    if weak:
        raise SlaterViolated(f"fibers without strictly feasible points: {weak}", weak)
    if not feasible:
        failed = [o.z for o in outcomes if o.result is None]
        raise NoFeasibleFiber("no feasible fiber in the box" +
                              (f" ({len(failed)} fibers failed to solve)" if failed else ""))
    inc = min(range(len(feasible)), key=lambda i: (feasible[i].value, i))
    incumbent = feasible[inc]
    agg = incumbent.aggregate
    if np.max(np.abs(agg), initial=0.0) <= tol.tau_stat:
        cert = KKTCertificate([_point(incumbent)], "2", incumbent.value)
        return cert, verify_thm2(p, cert)

    pool = list(solved)
    pin = next(i for i, r in enumerate(pool) if r is incumbent)
    hs = [_halfspace(p, r) for r in pool]
    _extend_pool(p, pool, hs, incumbent, eps, tol)
    sel = geo.doignon_select(hs, p.box, p.n, must_keep=pin, kappa=tol.kappa, margin=tol.margin,
                             budget=int(tol.fiber_budget), tol_strict=tol.tau_strict,
                             anchors=[r.x for r in pool])
    rest = [i for i in sel.indices if i != pin]
    rest.sort(key=lambda i: (float(ex.evaluate(p.f, pool[i].x)), i))
    cert = KKTCertificate([_point(pool[i]) for i in [pin] + rest], "2", incumbent.value)
    return cert, verify_thm2(p, cert)


# -- projection property ---------------------------------------------------


def projection_objective(y) -> ex.Quad:
    """``0.5 * ||x - y||^2`` as a quadratic expression."""
    y = np.asarray(y, dtype=float)
    return ex.Quad(np.eye(len(y)), -y, 0.5 * float(y @ y))


@dataclass
class ProjectionReport:
    holds: bool
    checked: int
    counterexamples: List[dict]
    certificate_verdict: Optional[str] = None

    def to_json(self):
        return {"holds": self.holds, "checked": self.checked,
                "counterexamples": self.counterexamples,
                "certificate_verdict": self.certificate_verdict}


def projection_samples(p: Problem, n_random: int = 200, seed: int = 0, eps=None) -> List[np.ndarray]:
    """Feasible mixed-integer points: fiber optima plus seeded random draws."""
    pts = []
    for o in solve_fibers(p, eps):
        if o.result is not None and o.result.feasible:
            pts.append(o.result.x)
    rng = np.random.default_rng(seed)
    ranges = p.integer_ranges()
    for _ in range(n_random):
        z = [rng.integers(r.start, r.stop) for r in ranges]
        y = rng.uniform(p.box.lo[p.n:], p.box.hi[p.n:])
        x = np.concatenate([np.asarray(z, dtype=float), y])
        if p.is_feasible(x, 0.0):
            pts.append(x)
    return pts


def verify_projection_property(p: Problem, y, cert: KKTCertificate, samples=None,
                               seed: int = 0, check_certificate: bool = True) -> ProjectionReport:
    """Test the two projection inequalities on sampled feasible points.

    For every sample ``x`` some certificate point must satisfy
    ``(y - x_i).(x - x_i) <= tau_num`` and some (possibly other) point must
    satisfy ``||x - y|| >= ||x - x_i|| - tau_num``.
    """
    y = np.asarray(y, dtype=float)
    q = p.with_objective(projection_objective(y))
    tau = p.tol.tau_num
    if samples is None:
        samples = projection_samples(q, seed=seed)
    X = np.array([pt.x for pt in cert.points])
    bad = []
    for x in samples:
        x = np.asarray(x, dtype=float)
        first = bool(np.any(np.sum((y - X) * (x - X), axis=1) <= tau))
        dist = np.linalg.norm(x - y)
        second = bool(np.any(dist >= np.linalg.norm(x - X, axis=1) - tau))
        if not (first and second):
            bad.append({"x": x.tolist(), "angle": first, "distance": second})
    verdict = verify_thm2(q, cert).verdict if check_certificate else None
    return ProjectionReport(not bad, len(samples), bad, verdict)
