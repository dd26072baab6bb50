"""Continuous subproblems on a single integer fiber ``{z} x R^d``.

Each fiber is solved either as ``min f`` over the feasible continuous
points or, when there are none, as ``min max_j g_j``.  The result carries
KKT-style multipliers ``u`` (length ``m+1``, objective last) and one
subgradient per function so that ``sum_j u_j h_j`` vanishes on the
continuous block.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from . import expr as ex
from . import solver
from .errors import DimensionError, ModelError, NumericalError, StationarityResidualTooLarge
from .problem import Box, Problem

FEASIBLE = "feasible"
INFEASIBLE = "infeasible"
MINIMAX = "minimax"  # minimax run on a fiber that turned out feasible


@dataclass
class FiberResult:
    z: tuple
    kind: str
    x: np.ndarray
    value: float
    u: np.ndarray
    h: List[np.ndarray]
    active: List[int] = field(default_factory=list)
    residual: float = 0.0
    lower: float = -np.inf
    slater_ok: Optional[bool] = None
    polished: bool = False

    @property
    def y(self):
        return self.x[len(self.z):]

    @property
    def feasible(self):
        return self.kind == FEASIBLE

    @property
    def aggregate(self) -> np.ndarray:
        """``sum_j u_j h_j`` over all m+1 functions."""
        out = np.zeros_like(self.x)
        for uj, hj in zip(self.u, self.h):
            if uj:
                out = out + uj * hj
        return out

    def support(self):
        return [j for j, uj in enumerate(self.u) if uj > 0]


def _check_z(p: Problem, z, in_box: bool = True) -> tuple:
    z = tuple(int(round(float(v))) for v in np.atleast_1d(z)) if p.n else ()
    if len(z) != p.n:
        raise DimensionError(f"integer vector has length {len(z)}, expected {p.n}")
    if not in_box:
        return z
    lo, hi = p.box.lo[: p.n], p.box.hi[: p.n]
    for v, a, b in zip(z, lo, hi):
        if v < a - p.tol.tau_int or v > b + p.tol.tau_int:
            raise DimensionError(f"integer vector {z} lies outside the box")
    return z


def _setup(p: Problem, z, cbox=None):
    template = np.concatenate([np.asarray(z, dtype=float), np.zeros(p.d)])
    free = np.arange(p.n, p.dim)
    cb = p.cont_box() if cbox is None else cbox
    return template, free, cb.lo, cb.hi


def _solve(p, parts, cons, z, eps, stop=None, cbox=None):
    template, free, lo, hi = _setup(p, z, cbox)
    return solver.minimize(parts, cons, template, free, lo, hi, eps,
                           tol_feas=p.tol.tau_feas, max_iter=p.tol.max_iter, stop=stop)


def _grown(p: Problem, level: int) -> Box:
    """The continuous box scaled about its centre by ``2**level``."""
    cb = p.cont_box()
    if level == 0:
        return cb
    mid, half = 0.5 * (cb.lo + cb.hi), 0.5 * (cb.hi - cb.lo) * 2.0 ** level
    return Box(mid - half, mid + half)


def _on_boundary(y, cbox: Box, tol=1e-7) -> bool:
    y = np.asarray(y, dtype=float)
    scale = 1.0 + np.abs(y)
    return bool(np.any(y - cbox.lo <= tol * scale) or np.any(cbox.hi - y <= tol * scale))


def fiber_minimax(p: Problem, z, eps: Optional[float] = None, cbox: Optional[Box] = None,
                  in_box: bool = True) -> FiberResult:
    """Minimise ``max_j g_j((z, .))`` and recover convex weights on the argmax."""
    if p.m == 0:
        raise ModelError("minimax needs at least one constraint")
    z = _check_z(p, z, in_box)
    eps = p.tol.eps_solve if eps is None else eps
    r = _solve(p, list(p.g), [], z, eps, cbox=cbox)
    x = r.x
    gv = p.gvals(x)
    value = float(gv.max())
    active = [int(j) for j in np.flatnonzero(gv >= value - p.tol.tau_act)]
    u, h, res = recover_multipliers(p, z, x[p.n:], MINIMAX)
    kind = INFEASIBLE if value > p.tol.tau_feas else MINIMAX
    return FiberResult(z, kind, x, value, u, h, active, res, r.lower, None, r.polished)


def fiber_status(p: Problem, z, eps: Optional[float] = None, cbox: Optional[Box] = None,
                 in_box: bool = True) -> str:
    """Classify the fiber at ``z`` as ``strict``, ``weak`` or ``infeasible``.

    ``strict``: some box point has every ``g_j < -tau_strict``.
    ``weak``: feasible within ``tau_feas`` but no strictly feasible point.
    The minimax run stops as soon as either bound settles the question.
    """
    z = _check_z(p, z, in_box)
    tol = p.tol
    eps = tol.eps_solve if eps is None else eps
    if p.m == 0:
        return "strict"
    r = _solve(p, list(p.g), [], z, eps,
               stop=lambda ub, lb: ub < -tol.tau_strict or lb > tol.tau_feas, cbox=cbox)
    if r.status == "stopped":
        return INFEASIBLE if r.lower > tol.tau_feas else "strict"
    if r.status == "infeasible" or r.value > tol.tau_feas:
        return INFEASIBLE
    return "strict" if r.value < -tol.tau_strict else "weak"


def _fiber_in(p: Problem, z, eps, cbox: Box) -> FiberResult:
    slater = True
    if p.m:
        state = fiber_status(p, z, eps, cbox, in_box=False)
        if state == INFEASIBLE:
            return fiber_minimax(p, z, eps, cbox, in_box=False)
        slater = state == "strict"
    r = _solve(p, [p.f], list(p.g), z, eps, cbox=cbox)
    if r.status == "infeasible":
        raise NumericalError(f"fiber {z}: minimax says feasible but the master LP is empty")
    x = r.x
    u, h, res = recover_multipliers(p, z, x[p.n:], FEASIBLE)
    gv = p.gvals(x)
    active = [int(j) for j in np.flatnonzero(np.abs(gv) <= p.tol.tau_act)]
    return FiberResult(z, FEASIBLE, x, float(ex.evaluate(p.f, x)), u, h, active, res,
                       r.lower, slater, r.polished)


def fiber_minimize(p: Problem, z, eps: Optional[float] = None, grow: int = 6,
                   in_box: bool = True) -> FiberResult:
    """Solve the fiber subproblem at ``z``.

    Feasibility is decided first by a minimax run that stops as soon as a
    strictly feasible point or a positive lower bound appears.  When the
    continuous solution sits on the box boundary and no multipliers exist
    there, the continuous box is doubled about its centre (at most
    ``grow`` times): the result is a statement about the whole fiber, so
    its point may lie outside the box.  ``in_box=False`` admits integer
    vectors outside the box for the same reason.
    """
    z = _check_z(p, z, in_box)
    eps = p.tol.eps_solve if eps is None else eps
    for level in range(grow + 1):
        cbox = _grown(p, level)
        try:
            return _fiber_in(p, z, eps, cbox)
        except StationarityResidualTooLarge as exc:
            y = exc.point
            if p.d == 0 or level == grow or y is None or not _on_boundary(y, cbox):
                raise


# -- multiplier recovery ---------------------------------------------------


def _candidates(e, x, tol):
    """Gradients of the pieces of ``e`` that are active at ``x``."""
    try:
        plist = ex.pieces(e)
    except ModelError:
        return [ex.subgradient(e, x, tol)]
    idx = ex.active_pieces(plist, x, tol)
    return [plist[i].grad(x) for i in idx]


def recover_multipliers(p: Problem, z, y, mode: str):
    """Return ``(u, h, residual)`` for the fiber point ``(z, y)``.

    ``mode`` is ``"feasible"`` (objective weight normalised to one, inactive
    constraints get zero weight) or ``"minimax"`` (weights on the argmax
    constraints sum to one, objective weight zero).
    """
    tol = p.tol
    x = np.concatenate([np.asarray(z, dtype=float), np.asarray(y, dtype=float)])
    funcs = p.funcs
    gv = p.gvals(x)
    owners, grads, norm = [], [], []
    if mode == FEASIBLE:
        for gr in _candidates(p.f, x, tol.tau_act):
            owners.append(p.m); grads.append(gr); norm.append(True)
        for j in range(p.m):
            if abs(gv[j]) <= tol.tau_act:
                for gr in _candidates(p.g[j], x, tol.tau_act):
                    owners.append(j); grads.append(gr); norm.append(False)
    elif mode in (MINIMAX, INFEASIBLE):
        top = gv.max()
        for j in range(p.m):
            if gv[j] >= top - tol.tau_act:
                for gr in _candidates(p.g[j], x, tol.tau_act):
                    owners.append(j); grads.append(gr); norm.append(True)
    else:
        raise ValueError(f"unknown recovery mode {mode!r}")
    G = np.array(grads).reshape(len(grads), p.dim)
    w, res = solver.min_residual_weights(G[:, p.n:], norm)
    if w is None:
        raise StationarityResidualTooLarge("recovery LP infeasible", np.inf, np.asarray(y, dtype=float))
    if res > tol.tau_stat:
        raise StationarityResidualTooLarge(
            f"fiber {tuple(z)}: stationarity residual {res:.3g} exceeds {tol.tau_stat:g}", res,
            np.asarray(y, dtype=float))
    M = np.vstack([G[:, p.n:].T, np.array(norm, dtype=float)[None, :]])
    w = reduce_support(w, M)
    u = np.zeros(p.m + 1)
    agg = [np.zeros(p.dim) for _ in range(p.m + 1)]
    for wi, j, gr in zip(w, owners, G):
        if wi > 0:
            u[j] += wi
            agg[j] += wi * gr
    h = [agg[j] / u[j] if u[j] > 0 else ex.subgradient(funcs[j], x, tol.tau_act)
         for j in range(p.m + 1)]
    res = float(np.max(np.abs(sum(u[j] * h[j] for j in range(p.m + 1))[p.n:]), initial=0.0))
    return u, h, res


def reduce_support(w, M, zero_tol=1e-14):
    """Carathéodory reduction: keep ``M @ w`` fixed, shrink ``supp(w)``.

    Each step takes the last ``rank+1`` supported columns, moves along a
    null vector of them (sign chosen so its last nonzero entry is
    positive) until a weight hits zero, and drops the highest such index.
    Low indices therefore survive.  The final support has at most
    ``rank(M)`` elements.
    """
    w = np.array(w, dtype=float)
    M = np.asarray(M, dtype=float)
    while True:
        S = np.flatnonzero(w > 0)
        if len(S) == 0:
            return w
        sv = np.linalg.svd(M[:, S], compute_uv=False)
        rank = int(np.sum(sv > 1e-12 * max(1.0, sv[0]))) if len(sv) else 0
        if len(S) <= rank:
            return w
        T = S[len(S) - rank - 1:]
        eta = np.linalg.svd(M[:, T])[2][-1]
        nz = np.flatnonzero(np.abs(eta) > 1e-12)
        if eta[nz[-1]] < 0:
            eta = -eta
        pos = np.flatnonzero(eta > 1e-12)
        ratios = w[T[pos]] / eta[pos]
        t = ratios.min()
        hit = pos[np.flatnonzero(ratios <= t * (1 + 1e-12))[-1]]
        w[T] = w[T] - t * eta
        w[T[hit]] = 0.0
        w[np.abs(w) < zero_tol] = 0.0
        w = np.maximum(w, 0.0)


def caratheodory_reduce(u, h: Sequence, d: int, norm_mask=None):
    """Shrink the support of ``u`` to at most ``d+1`` entries.

    Preserves the last ``d`` components of ``sum_j u_j h_j`` and the sum of
    ``u`` over ``norm_mask`` (all entries by default).
    """
    u = np.asarray(u, dtype=float)
    H = np.array([np.asarray(hj, dtype=float) for hj in h]).reshape(len(u), -1)
    cont = H[:, H.shape[1] - d:] if d else np.zeros((len(u), 0))
    mask = np.ones(len(u)) if norm_mask is None else np.asarray(norm_mask, dtype=float)
    M = np.vstack([cont.T, mask[None, :]])
    return reduce_support(u, M)
