"""Cutting-plane minimisation of convex expressions over a box.

The outer-approximation loop (Kelley) builds affine minorants of the
objective parts and of violated constraints and re-solves a small master
LP.  Its lower bound is valid at every iteration.  Once the gap is
moderate, an active-set Newton step on the piecewise-quadratic structure
(see :func:`micocert.expr.pieces`) polishes the iterate so that
stationarity holds to near machine precision; the resulting multipliers
give a second, independent lower bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from . import expr as ex
from . import lp
from .errors import ModelError, NumericalError, SolverStalled

COARSE_GAP = 1e-4


@dataclass
class SolveResult:
    x: np.ndarray
    value: float
    lower: float
    status: str  # converged | stopped | infeasible
    iterations: int = 0
    polished: bool = False
    multipliers: Optional[dict] = field(default=None, repr=False)

    @property
    def gap(self):
        return self.value - self.lower


class CuttingPlane:
    """Kelley's method for ``min max_p parts[p](x)  s.t.  cons[j](x) <= 0``.

    Only the coordinates in ``free`` move; the rest stay at ``template``.
    ``extra_A v <= extra_b`` adds linear rows on the free coordinates.
    """

    def __init__(self, parts, cons, template, free, lo, hi, extra_A=None, extra_b=None,
                 tol_feas=1e-7, max_iter=500):
        self.parts = list(parts)
        self.cons = list(cons)
        self.template = np.asarray(template, dtype=float)
        self.free = np.asarray(free, dtype=int)
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        self.k = len(self.free)
        self.extra_A = None if extra_A is None else np.asarray(extra_A, dtype=float).reshape(-1, self.k)
        self.extra_b = None if extra_b is None else np.asarray(extra_b, dtype=float)
        self.tol_feas = tol_feas
        self.max_iter = max_iter
        self.rows: List[np.ndarray] = []
        self.rhs: List[float] = []
        self.ub = np.inf
        self.lb = -np.inf
        self.best: Optional[np.ndarray] = None
        self.iterations = 0
        self.t_lo = None
        self.infeasible = False
        self.last = None

    def embed(self, v):
        x = self.template.copy()
        x[self.free] = v
        return x

    def objective(self, x):
        return max(ex.evaluate(p, x) for p in self.parts)

    def max_con(self, x):
        return max((ex.evaluate(c, x) for c in self.cons), default=-np.inf)

    def _add_point(self, v):
        x = self.embed(v)
        fval = None
        for p in self.parts:
            val = ex.evaluate(p, x)
            fval = val if fval is None else max(fval, val)
            s = ex.subgradient(p, x)[self.free]
            self.rows.append(np.concatenate([s, [-1.0]]))
            self.rhs.append(float(s @ v - val))
            if self.t_lo is None:
                low = val + np.sum(np.minimum(s * (self.lo - v), s * (self.hi - v)))
                self.t_lo = low - 1.0 - abs(low)
        cmax = -np.inf
        for c in self.cons:
            val = ex.evaluate(c, x)
            cmax = max(cmax, val)
            if val > 0:
                s = ex.subgradient(c, x)[self.free]
                self.rows.append(np.concatenate([s, [0.0]]))
                self.rhs.append(float(s @ v - val))
        inside = True
        if self.extra_A is not None and len(self.extra_A):
            inside = bool(np.all(self.extra_A @ v <= self.extra_b + 1e-9 * (1 + np.abs(self.extra_b))))
        if inside and cmax <= self.tol_feas and fval < self.ub:
            self.ub = fval
            self.best = np.array(v, dtype=float)
        self.last = np.array(v, dtype=float)

    def _master(self):
        A = np.array(self.rows)
        b = np.array(self.rhs)
        if self.extra_A is not None and len(self.extra_A):
            A = np.vstack([A, np.hstack([self.extra_A, np.zeros((len(self.extra_A), 1))])])
            b = np.concatenate([b, self.extra_b])
        c = np.zeros(self.k + 1)
        c[-1] = 1.0
        lo = np.concatenate([self.lo, [self.t_lo]])
        hi = np.concatenate([self.hi, [np.inf]])
        return lp.linprog(c, A, b, lo=lo, hi=hi)

    def run(self, eps, stop: Optional[Callable[[float, float], bool]] = None) -> str:
        if self.last is None:
            v0 = 0.5 * (self.lo + self.hi)
            self._add_point(v0)
        while True:
            if stop is not None and stop(self.ub, self.lb):
                return "stopped"
            if self.ub - self.lb <= eps:
                return "converged"
            if self.iterations >= self.max_iter:
                return "stalled"
            res = self._master()
            self.iterations += 1
            if res.status == lp.INFEASIBLE:
                self.infeasible = True
                return "infeasible"
            if not res.ok:
                raise NumericalError(f"master LP returned {res.status}")
            v, t = res.x[:-1], float(res.x[-1])
            self.lb = max(self.lb, t)
            if self.last is not None and np.array_equal(v, self.last) and self.ub - self.lb > eps:
                # the cut at this point is already in the model: numerical floor
                return "stalled"
            self._add_point(np.clip(v, self.lo, self.hi))


# -- active-set Newton polish ----------------------------------------------


def _expand(exprs):
    out = []
    for i, e in enumerate(exprs):
        for pc in ex.pieces(e):
            out.append((i, pc))
    return out


class _Local:
    """Piece data restricted to the free coordinates."""

    def __init__(self, cp: CuttingPlane):
        self.cp = cp
        self.obj = _expand(cp.parts)
        self.con = _expand(cp.cons)

    def val(self, piece, x):
        return float(piece.value(x))

    def grad(self, piece, x):
        return piece.grad(x)[self.cp.free]

    def hess(self, piece):
        H = piece.hess(len(self.cp.template))
        return H[np.ix_(self.cp.free, self.cp.free)]


def _newton(loc: _Local, v0, Wf, Wc, lam0, mu0, iters=40):
    cp = loc.cp
    k = cp.k
    nf, nc = len(Wf), len(Wc)
    of = [loc.obj[i][1] for i in Wf]
    oc = [loc.con[i][1] for i in Wc]
    Hf = [loc.hess(p) for p in of]
    Hc = [loc.hess(p) for p in oc]

    def F(z):
        v, t = z[:k], z[k]
        lam, mu = z[k + 1:k + 1 + nf], z[k + 1 + nf:]
        x = cp.embed(v)
        gf = [loc.grad(p, x) for p in of]
        gc = [loc.grad(p, x) for p in oc]
        stat = sum((l * g for l, g in zip(lam, gf)), np.zeros(k))
        stat = stat + sum((m * g for m, g in zip(mu, gc)), np.zeros(k))
        r = np.concatenate([stat, [lam.sum() - 1.0],
                            [loc.val(p, x) - t for p in of],
                            [loc.val(p, x) for p in oc]])
        return r, gf, gc

    def J(z, gf, gc):
        lam, mu = z[k + 1:k + 1 + nf], z[k + 1 + nf:]
        size = k + 1 + nf + nc
        M = np.zeros((size, size))
        H = sum((l * h for l, h in zip(lam, Hf)), np.zeros((k, k)))
        H = H + sum((m * h for m, h in zip(mu, Hc)), np.zeros((k, k)))
        M[:k, :k] = H
        for a, g in enumerate(gf):
            M[:k, k + 1 + a] = g
            M[k + 1 + a, :k] = g
            M[k + 1 + a, k] = -1.0
        for b, g in enumerate(gc):
            M[:k, k + 1 + nf + b] = g
            M[k + 1 + nf + b, :k] = g
        M[k, k + 1:k + 1 + nf] = 1.0
        return M

    x0 = cp.embed(v0)
    t0 = max(loc.val(p, x0) for p in of)
    z = np.concatenate([v0, [t0], lam0, mu0])
    r, gf, gc = F(z)
    for _ in range(iters):
        nr = np.max(np.abs(r))
        if nr <= 1e-13 * (1.0 + abs(z[k])):
            return z
        step = np.linalg.lstsq(J(z, gf, gc), -r, rcond=None)[0]
        a = 1.0
        while a > 1e-8:
            zn = z + a * step
            rn, gfn, gcn = F(zn)
            if np.max(np.abs(rn)) < nr:
                break
            a *= 0.5
        else:
            return None
        z, r, gf, gc = zn, rn, gfn, gcn
    return z if np.max(np.abs(r)) <= 1e-11 * (1.0 + abs(z[k])) else None


def polish(cp: CuttingPlane, v0, delta=1e-3, rounds=12):
    """Refine ``v0`` by an active-set Newton method.

    Returns ``(v, lam, mu, Wf, Wc, loc)`` on success, None otherwise.
    """
    if cp.extra_A is not None and len(cp.extra_A):
        return None
    try:
        loc = _Local(cp)
    except ModelError:
        return None
    k = cp.k
    x0 = cp.embed(v0)
    fv = [loc.val(p, x0) for _, p in loc.obj]
    cv = [loc.val(p, x0) for _, p in loc.con]
    top = max(fv)
    scale = delta * (1.0 + abs(top))
    Wf = [i for i, v in enumerate(fv) if v >= top - scale]
    Wc = [i for i, v in enumerate(cv) if v >= -delta]
    Wf = _lp_support(loc, x0, Wf, Wc)
    if Wf is None:
        return None
    Wf, Wc, lam0, mu0 = Wf
    for _ in range(rounds):
        z = _newton(loc, np.array(v0, dtype=float), Wf, Wc, lam0, mu0)
        if z is None:
            return None
        v, t = z[:k], z[k]
        lam, mu = z[k + 1:k + 1 + len(Wf)], z[k + 1 + len(Wf):]
        neg = [(val, 0, a) for a, val in enumerate(lam) if val < -1e-10]
        neg += [(val, 1, b) for b, val in enumerate(mu) if val < -1e-10]
        if neg:
            _, kind, pos = min(neg)
            if kind == 0:
                if len(Wf) == 1:
                    return None
                Wf = [w for a, w in enumerate(Wf) if a != pos]
                lam0 = np.delete(lam, pos)
                lam0 = np.maximum(lam0, 0)
                lam0 = lam0 / lam0.sum() if lam0.sum() > 0 else np.full(len(Wf), 1.0 / len(Wf))
                mu0 = np.maximum(mu, 0)
            else:
                Wc = [w for b, w in enumerate(Wc) if b != pos]
                mu0 = np.maximum(np.delete(mu, pos), 0)
                lam0 = np.maximum(lam, 0)
            v0 = v
            continue
        x = cp.embed(v)
        over_f = [(loc.val(p, x) - t, i) for i, (_, p) in enumerate(loc.obj) if i not in Wf]
        over_c = [(loc.val(p, x), i) for i, (_, p) in enumerate(loc.con) if i not in Wc]
        worst_f = max(over_f, default=(-np.inf, -1))
        worst_c = max(over_c, default=(-np.inf, -1))
        thr = 1e-12 * (1.0 + abs(t))
        if worst_f[0] <= thr and worst_c[0] <= thr:
            if np.any(v < cp.lo - 1e-12) or np.any(v > cp.hi + 1e-12):
                return None
            return np.clip(v, cp.lo, cp.hi), np.maximum(lam, 0), np.maximum(mu, 0), Wf, Wc, loc
        if worst_f[0] >= worst_c[0]:
            Wf = Wf + [worst_f[1]]
            lam0 = np.concatenate([lam, [0.0]])
            mu0 = mu
        else:
            Wc = Wc + [worst_c[1]]
            mu0 = np.concatenate([mu, [0.0]])
            lam0 = lam
        v0 = v
    return None


def _lp_support(loc: _Local, x, Wf, Wc):
    """Initial working set: support of a min-residual multiplier LP."""
    cp = loc.cp
    k = cp.k
    grads = [loc.grad(loc.obj[i][1], x) for i in Wf] + [loc.grad(loc.con[i][1], x) for i in Wc]
    nf = len(Wf)
    w, _ = min_residual_weights(np.array(grads).reshape(len(grads), k), np.arange(len(grads)) < nf)
    if w is None:
        return None
    sf = [a for a in range(nf) if w[a] > 0]
    sc = [b for b in range(len(Wc)) if w[nf + b] > 0]
    if not sf:
        return None
    return [Wf[a] for a in sf], [Wc[b] for b in sc], w[sf], w[[nf + b for b in sc]]


def min_residual_weights(G, norm_mask):
    """``min ||sum_s w_s G_s||_inf``  s.t.  ``w >= 0``, ``sum_{norm} w = 1``.

    ``G`` holds one row per candidate (restricted to the free coordinates).
    Returns ``(w, residual)`` or ``(None, inf)`` if infeasible.
    """
    G = np.asarray(G, dtype=float)
    P, k = G.shape
    norm_mask = np.asarray(norm_mask, dtype=bool)
    if not norm_mask.any():
        return None, np.inf
    c = np.zeros(P + 1)
    c[-1] = 1.0
    A_ub = np.zeros((2 * k, P + 1))
    A_ub[:k, :P] = G.T
    A_ub[k:, :P] = -G.T
    A_ub[:, -1] = -1.0
    A_eq = np.zeros((1, P + 1))
    A_eq[0, :P] = norm_mask.astype(float)
    lo = np.zeros(P + 1)
    res = lp.linprog(c, A_ub, np.zeros(2 * k), A_eq, [1.0], lo=lo)
    if not res.ok:
        return None, np.inf
    w = np.maximum(res.x[:P], 0.0)
    w[np.abs(w) < 1e-15] = 0.0
    return w, float(np.max(np.abs(w @ G))) if k else 0.0


def kkt_lower_bound(cp: CuttingPlane, x, obj_items, con_items):
    """Lagrangian lower bound from weighted pieces at ``x``.

    ``obj_items``/``con_items`` are lists of ``(weight, piece)``; objective
    weights must sum to one.
    """
    total = sum(w * float(p.value(x)) for w, p in obj_items)
    total += sum(w * float(p.value(x)) for w, p in con_items)
    g = sum((w * p.grad(x)[cp.free] for w, p in obj_items), np.zeros(cp.k))
    g = g + sum((w * p.grad(x)[cp.free] for w, p in con_items), np.zeros(cp.k))
    v = x[cp.free]
    total += float(np.sum(np.minimum(g * (cp.lo - v), g * (cp.hi - v))))
    return total


def minimize(parts, cons, template, free, lo, hi, eps, tol_feas=1e-7, max_iter=500,
             extra_A=None, extra_b=None, stop=None, refine=True) -> SolveResult:
    """Minimise ``max(parts)`` subject to ``cons <= 0`` over the free block.

    Raises :class:`SolverStalled` if the gap cannot be closed to ``eps``.
    """
    template = np.asarray(template, dtype=float)
    free = np.asarray(free, dtype=int)
    cp = CuttingPlane(parts, cons, template, free, lo, hi, extra_A, extra_b, tol_feas, max_iter)
    if cp.k == 0:
        x = template.copy()
        val = cp.objective(x)
        if cp.max_con(x) > tol_feas:
            return SolveResult(x, val, val, "infeasible")
        return SolveResult(x, val, val, "converged")
    coarse = max(eps, COARSE_GAP) if refine else eps
    status = cp.run(coarse, stop)
    if status == "infeasible":
        x = cp.embed(cp.last)
        return SolveResult(x, cp.objective(x), cp.lb, "infeasible", cp.iterations)
    if status == "stopped":
        v = cp.best if cp.best is not None else cp.last
        x = cp.embed(v)
        return SolveResult(x, cp.objective(x), cp.lb, "stopped", cp.iterations)
    if refine and cp.best is not None:
        out = _try_polish(cp, cp.best)
        if out is not None and out.gap <= eps:
            return out
    if status != "stalled":
        status = cp.run(eps, stop)
    if status == "infeasible":
        x = cp.embed(cp.last)
        return SolveResult(x, cp.objective(x), cp.lb, "infeasible", cp.iterations)
    if status == "stopped":
        x = cp.embed(cp.best if cp.best is not None else cp.last)
        return SolveResult(x, cp.objective(x), cp.lb, "stopped", cp.iterations)
    if refine and cp.best is not None:
        out = _try_polish(cp, cp.best)
        if out is not None and out.gap <= eps:
            return out
    if cp.best is None or cp.ub - cp.lb > eps:
        best = None if cp.best is None else cp.embed(cp.best)
        raise SolverStalled(f"gap {cp.ub - cp.lb:.3g} after {cp.iterations} iterations", best)
    x = cp.embed(cp.best)
    return SolveResult(x, cp.ub, cp.lb, "converged", cp.iterations)


def _try_polish(cp: CuttingPlane, v0) -> Optional[SolveResult]:
    try:
        out = polish(cp, v0)
    except (np.linalg.LinAlgError, NumericalError, FloatingPointError):
        return None
    if out is None:
        return None
    v, lam, mu, Wf, Wc, loc = out
    x = cp.embed(v)
    if cp.max_con(x) > cp.tol_feas:
        return None
    value = cp.objective(x)
    s = lam.sum()
    if s <= 0:
        return None
    lam = lam / s
    lb = kkt_lower_bound(cp, x, [(w, loc.obj[i][1]) for w, i in zip(lam, Wf)],
                         [(w, loc.con[i][1]) for w, i in zip(mu, Wc)])
    lower = max(lb, cp.lb)
    if lower > value:
        lower = value
    return SolveResult(x, value, lower, "converged", cp.iterations, polished=True)
