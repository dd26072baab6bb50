"""Brute-force ground truth, deliberately free of the LP and cutting-plane code.

``brute_force_solve`` enumerates integer vectors and runs a refining grid
search on each fiber.  ``enumerate_strict_points`` re-decides
lattice-freeness by interval subdivision of the continuous block.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from . import expr as ex
from .errors import ModelError, NoFeasiblePoint
from .problem import Box, Problem, integer_ranges

MAX_N = 8
MAX_D = 3
GRID = 81
GOLDEN_TOL = 1e-11
INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class FiberValue:
    feasible: bool
    value: float
    y: np.ndarray


@dataclass
class OracleResult:
    value: float
    argmin: np.ndarray
    fibers: Dict[tuple, FiberValue] = field(default_factory=dict)

    def to_json(self):
        return {"value": float(self.value), "argmin": self.argmin.tolist(),
                "fibers": [{"z": list(z), "feasible": fv.feasible,
                            "value": float(fv.value) if fv.feasible else None}
                           for z, fv in self.fibers.items()]}


def _merit(p: Problem, prefix, Y, tol_feas):
    """Lexicographic score per row of ``Y``: (infeasible?, f or max g)."""
    X = np.hstack([np.tile(prefix, (len(Y), 1)), Y])
    fv = np.atleast_1d(ex.evaluate(p.f, X))
    if p.m:
        gmax = np.max(np.column_stack([np.atleast_1d(ex.evaluate(g, X)) for g in p.g]), axis=1)
    else:
        gmax = np.full(len(Y), -np.inf)
    bad = gmax > tol_feas
    return bad, np.where(bad, gmax, fv)


def _best(bad, val):
    good = np.flatnonzero(~bad)
    if good.size:
        return int(good[np.argmin(val[good])])
    return int(np.argmin(val))


def _last_coordinate(p: Problem, prefix, lo, hi, tol_feas):
    """Grid refinement in one variable; exact for unimodal merits."""
    a, b = lo, hi
    best = None
    while True:
        Y = np.linspace(a, b, GRID)[:, None] if b > a else np.array([[a]])
        bad, val = _merit(p, prefix, Y, tol_feas)
        i = _best(bad, val)
        cand = (bool(bad[i]), float(val[i]), float(Y[i, 0]))
        if best is None or cand[:2] < best[:2]:
            best = cand
        h = (b - a) / (GRID - 1)
        if h <= GOLDEN_TOL * (1.0 + abs(best[2])):
            return best
        a, b = max(lo, best[2] - h), min(hi, best[2] + h)


def _level(p: Problem, prefix, k, lo, hi, tol_feas):
    """Minimise over coordinates ``k..d-1`` of the continuous block.

    Returns ``(infeasible, value, y_tail)``.  Partial minimisation keeps
    the merit unimodal in each coordinate, so golden-section search on
    the outer coordinates is exact up to its tolerance.
    """
    if k == len(lo) - 1:
        bad, val, y = _last_coordinate(p, prefix, lo[k], hi[k], tol_feas)
        return bad, val, np.array([y])
    cache = {}

    def F(t):
        if t not in cache:
            bad, val, tail = _level(p, np.append(prefix, t), k + 1, lo, hi, tol_feas)
            cache[t] = (bad, val, np.concatenate([[t], tail]))
        return cache[t]

    a, b = float(lo[k]), float(hi[k])
    c, d = b - INV_PHI * (b - a), a + INV_PHI * (b - a)
    while b - a > GOLDEN_TOL * (1.0 + abs(a) + abs(b)):
        if F(c)[:2] <= F(d)[:2]:
            b, d = d, c
            c = b - INV_PHI * (b - a)
        else:
            a, c = c, d
            d = a + INV_PHI * (b - a)
    for t in (a, b):
        F(t)
    return min(cache.values(), key=lambda r: r[:2])


def solve_fiber(p: Problem, z, eps_oracle: Optional[float] = None) -> FiberValue:
    """Minimise ``f`` over the feasible continuous points of fiber ``z``."""
    tol = p.tol
    cb = p.cont_box()
    prefix = np.asarray(z, dtype=float)
    if p.d == 0:
        bad, val = _merit(p, prefix, np.zeros((1, 0)), tol.tau_feas)
        return FiberValue(not bad[0], float(val[0]) if not bad[0] else np.inf, np.zeros(0))
    bad, val, y = _level(p, prefix, 0, cb.lo, cb.hi, tol.tau_feas)
    return FiberValue(not bad, np.inf if bad else float(val), y)


def brute_force_solve(p: Problem, eps_oracle: Optional[float] = None) -> OracleResult:
    """Enumerate every integer vector of the box and grid-search each fiber."""
    if p.n > MAX_N or p.d > MAX_D:
        raise ModelError(f"oracle guard: n <= {MAX_N}, d <= {MAX_D} (got n={p.n}, d={p.d})")
    table = {}
    best = None
    for z in p.fibers():
        fv = solve_fiber(p, z, eps_oracle)
        table[tuple(z)] = fv
        if fv.feasible and (best is None or fv.value < best[0]):
            best = (fv.value, np.concatenate([np.asarray(z, dtype=float), fv.y]))
    if best is None:
        raise NoFeasiblePoint("no feasible grid point in any fiber")
    return OracleResult(best[0], best[1], table)


# -- lattice-freeness by subdivision ---------------------------------------


def _slack_range(rows, z, lo, hi):
    """Per-row min/max of ``offset - normal.x`` over ``{z} x [lo, hi]``."""
    n = len(z)
    out = []
    for h in rows:
        a = np.asarray(h.normal, dtype=float)
        base = float(h.offset) - float(a[:n] @ np.asarray(z, dtype=float))
        ay = a[n:]
        hi_part = np.where(ay > 0, ay * hi, ay * lo).sum()
        lo_part = np.where(ay > 0, ay * lo, ay * hi).sum()
        out.append((base - hi_part, base - lo_part))
    return out


def _fiber_hit(rows, z, lo, hi, tol, max_boxes):
    stack = [(lo, hi)]
    boxes = 0
    while stack:
        blo, bhi = stack.pop()
        boxes += 1
        if boxes > max_boxes:
            return None
        rng = _slack_range(rows, z, blo, bhi)
        dead = False
        inside = True
        for h, (smin, smax) in zip(rows, rng):
            scale = max(1.0, float(np.max(np.abs(np.asarray(h.normal, dtype=float)))))
            thr = tol * scale if h.strict else -tol * scale
            if smax <= thr:
                dead = True
                break
            if smin <= thr:
                inside = False
        if dead:
            continue
        if inside:
            return 0.5 * (blo + bhi)
        if len(blo) == 0:
            continue
        k = int(np.argmax(bhi - blo))
        if bhi[k] - blo[k] < 1e-9:
            continue
        mid = 0.5 * (blo[k] + bhi[k])
        left_hi = bhi.copy(); left_hi[k] = mid
        right_lo = blo.copy(); right_lo[k] = mid
        stack.append((right_lo, bhi))
        stack.append((blo, left_hi))
    return None


def enumerate_strict_points(P, box: Box, n: int, kappa: float = 2.0, margin: float = 1.0,
                            tol: float = 1e-7, max_boxes: int = 20000, first_only: bool = False):
    """All integer vectors ``z`` in the inflated box whose fiber meets ``P``.

    Each hit is returned as a full point ``(z, y)``.  The continuous block
    is searched by bisection over the inflated continuous box; a strict
    row must hold with margin ``tol`` (scaled by the row's largest
    coefficient), matching the LP-based test.
    """
    rows = list(P)
    ibox = box.inflate(kappa, margin)
    zr = integer_ranges(ibox.lo[:n], ibox.hi[:n])
    lo, hi = ibox.lo[n:], ibox.hi[n:]
    hits = []
    for h in rows:
        if not np.any(np.asarray(h.normal, dtype=float)):
            if (h.strict and float(h.offset) <= 0) or (not h.strict and float(h.offset) < 0):
                return []
    rows = [h for h in rows if np.any(np.asarray(h.normal, dtype=float))]
    for z in itertools.product(*zr):
        y = _fiber_hit(rows, z, lo.copy(), hi.copy(), tol, max_boxes)
        if y is not None:
            hits.append(np.concatenate([np.asarray(z, dtype=float), y]))
            if first_only:
                break
    return hits
