"""Exact mixed-integer dual derived from a certificate, and its checks.

A dual pair is a bound ``alpha``, a nonnegative matrix ``U`` with one
row per certificate point (padded to ``2**n`` rows by repetition), and a
selector ``pi`` mapping each mixed-integer point to a row.  It is dual
feasible when every point ``x`` satisfies

    alpha <= f(x) + U[pi(x)].g(x)    or    1 <= U[pi(x)].g(x).

Rows of the first kind ("bound") come from points with a positive
objective weight, the rest ("infeas") from infeasible certificate points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import expr as ex
from . import geometry as geo
from . import lp, solver
from .certificate import KKTCertificate, _map, _guard
from .errors import DegenerateRow, ModelError
from .problem import Box, Problem

BOUND = "bound"
INFEAS = "infeas"


@dataclass
class DualPair:
    alpha: float
    U: np.ndarray
    row_kind: List[str]
    selector_v: np.ndarray
    selector_c: np.ndarray
    padded: List[bool] = field(default_factory=list)

    @property
    def split_k(self) -> int:
        return sum(1 for k in self.row_kind if k == BOUND)

    @property
    def rows(self):
        return len(self.row_kind)

    def select(self, x, tol: float = 1e-7) -> Optional[int]:
        """``min{i : v_i.x - c_i >= -tol}`` over the real rows, or None."""
        s = self.selector_v @ np.asarray(x, dtype=float) - self.selector_c
        hit = np.flatnonzero(s >= -tol)
        return int(hit[0]) if hit.size else None

    def to_json(self):
        return {"alpha": float(self.alpha), "U": np.asarray(self.U, dtype=float).tolist(),
                "row_kind": list(self.row_kind),
                "selector": [{"v": v.tolist(), "c": float(c)}
                             for v, c in zip(self.selector_v, self.selector_c)],
                "split_k": self.split_k, "padded": list(self.padded)}

    @staticmethod
    def from_json(obj) -> "DualPair":
        try:
            U = np.asarray(obj["U"], dtype=float)
            kinds = list(obj["row_kind"])
            sel = obj["selector"]
            V = np.array([s["v"] for s in sel], dtype=float)
            C = np.array([s["c"] for s in sel], dtype=float)
            padded = list(obj.get("padded", [False] * len(kinds)))
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed dual pair: {exc}") from exc
        if U.ndim != 2 or U.shape[0] != len(kinds) or any(k not in (BOUND, INFEAS) for k in kinds):
            raise ModelError("dual pair: U rows and row_kind disagree")
        if "split_k" in obj and int(obj["split_k"]) != sum(k == BOUND for k in kinds):
            raise ModelError("dual pair: split_k does not match row_kind")
        if np.any(U < 0):
            raise ModelError("dual pair: U must be nonnegative")
        return DualPair(float(obj["alpha"]), U, kinds, V, C, padded)


def load_dual(path) -> DualPair:
    with open(path) as fh:
        return DualPair.from_json(json.load(fh))


def dual_from_certificate(p: Problem, cert: KKTCertificate) -> DualPair:
    """Turn a verified certificate into a dual pair with ``alpha = f(x*)``."""
    tol = p.tol
    m = p.m
    bound, infeas = [], []
    for i, pt in enumerate(cert.points):
        v = pt.normal.copy()
        v[p.n:] = 0.0
        if np.max(np.abs(v), initial=0.0) <= tol.tau_stat:
            v[:] = 0.0
        sel = (v, float(v @ pt.x))
        if pt.u[m] > 0:
            bound.append((pt.u[:m] / pt.u[m], sel))
        else:
            mu = float(pt.u[:m] @ p.gvals(pt.x)) if m else 0.0
            if mu <= tol.tau_num:
                raise DegenerateRow(f"point {i}: aggregated violation {mu:.3g} is not positive")
            infeas.append((pt.u[:m] / mu, sel))
    rows = bound + infeas
    kinds = [BOUND] * len(bound) + [INFEAS] * len(infeas)
    padded = [False] * len(rows)
    target = max(2 ** p.n, len(rows))
    U = [r[0] for r in rows]
    while len(U) < target:
        U.append(U[-1].copy())
        kinds.append(kinds[-1])
        padded.append(True)
    alpha = float(ex.evaluate(p.f, cert.x_star))
    V = np.array([r[1][0] for r in rows]).reshape(len(rows), p.dim)
    C = np.array([r[1][1] for r in rows])
    return DualPair(alpha, np.array(U).reshape(len(U), m), kinds, V, C, padded)


def _row_exprs(p: Problem, Ui, alpha):
    terms = [ex.Scale(float(c), g) for c, g in zip(Ui, p.g) if c > 0]
    zero = ex.Affine(np.zeros(p.dim), 0.0)
    Ug = ex.Sum(tuple(terms)) if terms else zero
    first = ex.Sum((p.f, Ug, ex.Affine(np.zeros(p.dim), -float(alpha))))
    second = ex.Sum((Ug, ex.Affine(np.zeros(p.dim), -1.0)))
    return first, second


@dataclass
class DualReport:
    holds: bool
    fibers: int
    failures: List[dict]

    def to_json(self):
        return {"holds": self.holds, "fibers_checked": self.fibers, "failures": self.failures}


def verify_dual_pair(p: Problem, dp: DualPair, eps: Optional[float] = None, jobs: int = 1) -> DualReport:
    """Check the either-or dual condition on every fiber of the box.

    On fiber ``z`` the selected row ``i`` passes iff the minimum over the
    continuous block of ``max(f + U_i g - alpha, U_i g - 1)`` is at least
    ``-tau_num``.
    """
    _guard(p)
    tol = p.tol
    eps = tol.eps_solve if eps is None else eps
    cb = p.cont_box()
    fibers = list(p.fibers())

    def one(z):
        x0 = np.concatenate([np.asarray(z, dtype=float), 0.5 * (cb.lo + cb.hi)])
        i = dp.select(x0, tol.tau_num)
        if i is None:
            return {"z": list(z), "row": None, "reason": "selector undefined"}
        parts = list(_row_exprs(p, dp.U[i], dp.alpha))
        template = np.concatenate([np.asarray(z, dtype=float), np.zeros(p.d)])
        r = solver.minimize(parts, [], template, np.arange(p.n, p.dim), cb.lo, cb.hi, eps,
                            tol.tau_feas, tol.max_iter, refine=False,
                            stop=lambda ub, lb: ub < -tol.tau_num or lb >= -tol.tau_num)
        if r.value < -tol.tau_num:
            return {"z": list(z), "row": i, "y": r.x[p.n:].tolist(), "value": float(r.value),
                    "reason": "both inequalities fail"}
        return None

    out = _map(one, fibers, jobs)
    failures = [o for o in out if o is not None]
    return DualReport(not failures, len(fibers), failures)


@dataclass
class BoundResult:
    alpha: float
    rows: List[dict]

    def to_json(self):
        return {"alpha": self.alpha if math.isfinite(self.alpha) else None,
                "rows": self.rows}


def dual_bound_from_polyhedron(p: Problem, P, U, eps: Optional[float] = None) -> BoundResult:
    """Lower bound from a lattice-free polyhedron and one multiplier row per facet.

    ``P`` lists strict rows ``a_i.x < b_i``; row ``i`` contributes the
    minimum of ``f + U_i g`` over the closed complement ``a_i.x >= b_i``
    (within the box), provided that region holds a feasible point.  The
    returned value is the smallest certified lower bound; ``+inf`` when no
    region is feasible.
    """
    tol = p.tol
    eps = tol.eps_solve if eps is None else eps
    P = geo._as_poly(P)
    U = np.asarray(U, dtype=float).reshape(len(P), p.m)
    free = np.arange(p.dim)
    template = np.zeros(p.dim)
    best = math.inf
    rows = []
    for i, h in enumerate(P):
        a = np.asarray(h.normal, dtype=float)
        eA, eb = -a[None, :], np.array([-float(h.offset)])
        if p.m:
            r = solver.minimize(list(p.g), [], template, free, p.box.lo, p.box.hi, eps,
                                tol.tau_feas, tol.max_iter, eA, eb, refine=False,
                                stop=lambda ub, lb: ub <= tol.tau_feas or lb > tol.tau_feas)
            feasible = r.status != "infeasible" and r.value <= tol.tau_feas
        else:
            res = lp.linprog(np.zeros(p.dim), eA, eb, lo=p.box.lo, hi=p.box.hi)
            feasible = res.ok
        if not feasible:
            rows.append({"row": i, "feasible": False})
            continue
        first, _ = _row_exprs(p, U[i], 0.0)
        r = solver.minimize([first], [], template, free, p.box.lo, p.box.hi, eps,
                            tol.tau_feas, tol.max_iter, eA, eb, refine=False)
        rows.append({"row": i, "feasible": True, "value": float(r.lower),
                     "argmin": r.x.tolist()})
        best = min(best, float(r.lower))
    return BoundResult(best, rows)


def lagrangian_value(p: Problem, u, points) -> float:
    """``min_x f(x) + u.g(x)`` over the given points (single-multiplier bound)."""
    u = np.asarray(u, dtype=float)
    vals = [float(ex.evaluate(p.f, x)) + (float(u @ p.gvals(x)) if p.m else 0.0) for x in points]
    return min(vals)


# -- linear case -----------------------------------------------------------


@dataclass
class LinearDualReport:
    lattice_free: bool
    status: str
    witness: Optional[list]
    polyhedron: geo.OpenPolyhedron

    def to_json(self):
        return {"lattice_free": self.lattice_free, "status": self.status,
                "witness": None if self.witness is None else [str(v) for v in self.witness],
                "polyhedron": self.polyhedron.to_json()}


def linear_dual_polyhedron(c, A, b, alpha, U, split_k, exact=False, c0=0.0) -> geo.OpenPolyhedron:
    """Rows of ``P(alpha, U)`` for ``min c.x + c0  s.t.  A x <= b``.

    With ``g = A x - b`` a bound row fails exactly on
    ``(c + A^T U_i).x < alpha - c0 + U_i.b`` and an infeasibility row fails
    on ``(A^T U_i).x < 1 + U_i.b``.
    """
    conv = lp.to_fraction if exact else float
    c = [conv(v) for v in np.atleast_1d(c)]
    A = [[conv(v) for v in row] for row in np.atleast_2d(np.asarray(A, dtype=object))] if len(A) else []
    b = [conv(v) for v in np.atleast_1d(b)] if len(b) else []
    U = [[conv(v) for v in row] for row in U]
    alpha, c0 = conv(alpha), conv(c0)
    dim = len(c)
    rows = []
    for i, Ui in enumerate(U):
        UA = [sum((Ui[j] * A[j][k] for j in range(len(A))), conv(0)) for k in range(dim)]
        Ub = sum((Ui[j] * b[j] for j in range(len(b))), conv(0))
        if i < split_k:
            normal, offset = [c[k] + UA[k] for k in range(dim)], alpha - c0 + Ub
        else:
            normal, offset = UA, 1 + Ub
        if exact:
            rows.append(geo.HalfSpace(np.array(normal, dtype=object), offset, True))
        else:
            rows.append(geo.HalfSpace(normal, offset, True))
    return geo.OpenPolyhedron(tuple(rows))


def linear_dual_check(c, A, b, n: int, d: int, alpha, U, split_k: int, box: Box,
                      exact: bool = True, c0=0.0, budget: int = 1_000_000) -> LinearDualReport:
    """Is ``P(alpha, U)`` free of points of ``Z^n x R^d``?

    In exact mode all data become fractions and strict inequalities are
    decided without tolerances.
    """
    P = linear_dual_polyhedron(c, A, b, alpha, U, split_k, exact, c0)
    if len(P) == 0:
        return LinearDualReport(False, geo.WITNESS, None, P)
    res = geo.mixed_lattice_free(P, box, n, budget=budget, tol_strict=0.0 if exact else 1e-7)
    w = None if res.witness is None else list(res.witness)
    return LinearDualReport(res.status == geo.LATTICE_FREE, res.status, w, P)


def linear_data(p: Problem):
    """``(c, c0, A, b)`` for an all-affine problem (``g = A x - b``)."""
    if not p.all_affine():
        raise ModelError("linear data requested for a problem with non-affine terms")
    c, c0 = ex.affine_coefficients(p.f)
    A, b = [], []
    for g in p.g:
        a, a0 = ex.affine_coefficients(g)
        A.append(a)
        b.append(-a0)
    return c, c0, np.array(A).reshape(p.m, p.dim), np.array(b)
