"""Dense two-phase tableau simplex with Bland's rule.

Works on float64 arrays or on object arrays of :class:`fractions.Fraction`
(``exact=True``), in which case every comparison is exact and no
tolerance is involved.  Problems with many more inequality rows than
columns (cutting-plane masters) are solved through their dual, which keeps
the tableau a few rows tall.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from .errors import NumericalError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

PIVOT_TOL = 1e-9
COST_TOL = 1e-9
MAX_PIVOTS = 20000


@dataclass
class LPResult:
    status: str
    x: Optional[np.ndarray] = None
    value: Optional[float] = None
    pivots: int = 0

    @property
    def ok(self):
        return self.status == OPTIMAL


def to_fraction(v):
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, str):
        return Fraction(v)
    # float -> exact binary value
    return Fraction(float(v))


def _arr(v, exact, ndim):
    if v is None:
        return None
    if exact:
        a = np.array(v, dtype=object)
        return np.vectorize(to_fraction, otypes=[object])(a) if a.size else a
    return np.asarray(v, dtype=float)


class _Tableau:
    def __init__(self, A, b, exact):
        self.exact = exact
        self.tol = 0 if exact else PIVOT_TOL
        self.ctol = 0 if exact else COST_TOL
        m, N = A.shape
        zero = Fraction(0) if exact else 0.0
        one = Fraction(1) if exact else 1.0
        self.sign = np.array([-1 if bi < 0 else 1 for bi in b], dtype=int)
        A = A * self.sign[:, None].astype(object if exact else float) if m else A
        b = b * self.sign.astype(object if exact else float) if m else b
        basis = [-1] * m
        for j in range(N):
            col = A[:, j]
            nz = [i for i in range(m) if col[i] != 0]
            if len(nz) == 1 and col[nz[0]] == 1 and basis[nz[0]] == -1:
                basis[nz[0]] = j
        art_rows = [i for i in range(m) if basis[i] == -1]
        n_art = len(art_rows)
        dtype = object if exact else float
        T = np.empty((m + 1, N + n_art + 1), dtype=dtype)
        T[:, :] = zero
        T[:m, :N] = A
        T[:m, -1] = b
        for k, i in enumerate(art_rows):
            T[i, N + k] = one
            basis[i] = N + k
        self.T = T
        self.m, self.N, self.n_art = m, N, n_art
        self.basis = basis
        self.init_cols = list(basis)
        self.pivots = 0
        self.zero, self.one = zero, one

    def pivot(self, r, c):
        T = self.T
        prow = T[r] / T[r, c]
        col = T[:, c].copy()
        col[r] = self.zero
        if self.exact:
            T -= np.outer(col, prow)
        else:
            T -= np.multiply.outer(col, prow)
        T[r] = prow
        self.basis[r] = c
        self.pivots += 1
        if self.pivots > MAX_PIVOTS:
            raise NumericalError("simplex pivot limit exceeded")
        if not self.exact and not np.all(np.isfinite(T[r])):
            raise NumericalError("non-finite tableau entry")

    def set_cost(self, cost):
        """Install objective row for ``cost`` (length N + n_art)."""
        T = self.T
        row = np.empty(T.shape[1], dtype=T.dtype)
        row[:-1] = cost
        row[-1] = self.zero
        for i, j in enumerate(self.basis):
            cj = cost[j]
            if cj != 0:
                row = row - cj * T[i]
        T[-1] = row

    def run(self, allowed):
        """Bland-rule iterations; returns OPTIMAL or UNBOUNDED."""
        T = self.T
        m = self.m
        while True:
            obj = T[-1, :-1]
            enter = -1
            for j in allowed:
                if obj[j] < -self.ctol:
                    enter = j
                    break
            if enter < 0:
                return OPTIMAL
            col = T[:m, enter]
            best, leave = None, -1
            for i in range(m):
                if col[i] > self.tol:
                    ratio = T[i, -1] / col[i]
                    if best is None or ratio < best - (0 if self.exact else 1e-12 * (1 + abs(best))):
                        best, leave = ratio, i
                    elif (ratio <= best + (0 if self.exact else 1e-12 * (1 + abs(best)))
                          and self.basis[i] < self.basis[leave]):
                        leave = i
            if leave < 0:
                return UNBOUNDED
            self.pivot(leave, enter)


def simplex_std(c, A, b, exact=False):
    """Solve ``min c.x  s.t.  A x = b, x >= 0``.

    Returns ``(status, x, pi, pivots)``; ``pi`` are the row multipliers
    (``c - A.T pi >= 0`` at optimality).
    """
    m, N = A.shape
    tab = _Tableau(A, b, exact)
    zero = tab.zero
    total = N + tab.n_art
    if tab.n_art:
        cost1 = np.array([zero] * N + [tab.one] * tab.n_art, dtype=object if exact else float)
        tab.set_cost(cost1)
        tab.run(range(total))
        phase1 = -tab.T[-1, -1]
        limit = 0 if exact else 1e-9 * (1 + max(abs(float(v)) for v in b))
        if phase1 > limit:
            return INFEASIBLE, None, None, tab.pivots
        for i in range(m):
            if tab.basis[i] >= N:
                for j in range(N):
                    if abs(tab.T[i, j]) > tab.tol:
                        tab.pivot(i, j)
                        break
    cost2 = np.empty(total, dtype=object if exact else float)
    cost2[:N] = c
    cost2[N:] = zero
    tab.set_cost(cost2)
    status = tab.run(range(N))
    if status == UNBOUNDED:
        return UNBOUNDED, None, None, tab.pivots
    x = np.array([zero] * N, dtype=object if exact else float)
    for i, j in enumerate(tab.basis):
        if j < N:
            x[j] = tab.T[i, -1]
    cB = np.array([cost2[j] for j in tab.basis], dtype=object if exact else float)
    Binv = tab.T[:m, tab.init_cols]
    pi = (cB @ Binv) * tab.sign if m else np.zeros(0)
    return OPTIMAL, x, pi, tab.pivots


def _primal_route(c, A_ub, b_ub, A_eq, b_eq, lo, hi, exact):
    n = c.shape[0]
    zero = Fraction(0) if exact else 0.0
    dtype = object if exact else float
    # x = offset + M x_std
    cols = []
    offset = np.array([zero] * n, dtype=dtype)
    ub_rows = []
    for j in range(n):
        lf, hf = np.isfinite(float(lo[j])), np.isfinite(float(hi[j]))
        if lf:
            offset[j] = lo[j]
            cols.append((j, 1))
            if hf:
                ub_rows.append((len(cols) - 1, hi[j] - lo[j]))
        elif hf:
            offset[j] = hi[j]
            cols.append((j, -1))
        else:
            cols.append((j, 1))
            cols.append((j, -1))
    ns = len(cols)
    M = np.array([[zero] * ns for _ in range(n)], dtype=dtype).reshape(n, ns)
    for k, (j, s) in enumerate(cols):
        M[j, k] = s
    blocks_A, blocks_b = [], []
    n_ineq = 0
    if A_ub is not None and A_ub.shape[0]:
        blocks_A.append(A_ub @ M)
        blocks_b.append(b_ub - A_ub @ offset)
        n_ineq += A_ub.shape[0]
    if ub_rows:
        U = np.array([[zero] * ns for _ in ub_rows], dtype=dtype).reshape(len(ub_rows), ns)
        for r, (k, _) in enumerate(ub_rows):
            U[r, k] = 1
        blocks_A.append(U)
        blocks_b.append(np.array([v for _, v in ub_rows], dtype=dtype))
        n_ineq += len(ub_rows)
    n_eq = 0
    if A_eq is not None and A_eq.shape[0]:
        blocks_A.append(A_eq @ M)
        blocks_b.append(b_eq - A_eq @ offset)
        n_eq = A_eq.shape[0]
    rows = n_ineq + n_eq
    if rows == 0:
        # only sign constraints: optimum at x_std = 0 unless some cost < 0
        cs = c @ M
        if any(v < 0 for v in cs):
            return LPResult(UNBOUNDED)
        return LPResult(OPTIMAL, offset.copy(), c @ offset)
    A_all = np.concatenate(blocks_A, axis=0)
    b_all = np.concatenate(blocks_b)
    S = np.array([[zero] * n_ineq for _ in range(rows)], dtype=dtype).reshape(rows, n_ineq)
    for i in range(n_ineq):
        S[i, i] = 1
    A_std = np.concatenate([A_all, S], axis=1)
    c_std = np.concatenate([c @ M, np.array([zero] * n_ineq, dtype=dtype)])
    status, xs, _, piv = simplex_std(c_std, A_std, b_all, exact)
    if status != OPTIMAL:
        return LPResult(status, pivots=piv)
    x = offset + M @ xs[:ns]
    return LPResult(OPTIMAL, x, c @ x, piv)


def _dual_route(c, G, h, exact):
    """``min c.x s.t. G x <= h`` (x free) via ``min h.l s.t. G^T l = -c, l >= 0``."""
    status, lam, pi, piv = simplex_std(h, G.T.copy(), -c, exact)
    if status == OPTIMAL:
        x = pi
        return LPResult(OPTIMAL, x, c @ x, piv)
    if status == UNBOUNDED:
        return LPResult(INFEASIBLE, pivots=piv)
    return None  # primal infeasible or unbounded: disambiguate elsewhere


def linprog(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, lo=None, hi=None,
            exact=False, check=True) -> LPResult:
    """Minimise ``c.x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``lo <= x <= hi``.

    Bounds default to free; infinite entries are allowed.
    """
    c = _arr(c, exact, 1)
    n = c.shape[0]
    inf = float("inf")
    lo = np.full(n, -inf) if lo is None else lo
    hi = np.full(n, inf) if hi is None else hi
    if exact:
        lo = np.array([v if not np.isfinite(float(v)) else to_fraction(v) for v in lo], dtype=object)
        hi = np.array([v if not np.isfinite(float(v)) else to_fraction(v) for v in hi], dtype=object)
    else:
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
    A_ub = _arr(A_ub, exact, 2) if A_ub is not None and len(A_ub) else None
    b_ub = _arr(b_ub, exact, 1) if A_ub is not None else None
    A_eq = _arr(A_eq, exact, 2) if A_eq is not None and len(A_eq) else None
    b_eq = _arr(b_eq, exact, 1) if A_eq is not None else None
    for j in range(n):
        if float(lo[j]) > float(hi[j]):
            return LPResult(INFEASIBLE)

    res = None
    n_rows = (0 if A_ub is None else A_ub.shape[0])
    n_rows += sum(1 for v in lo if np.isfinite(float(v))) + sum(1 for v in hi if np.isfinite(float(v)))
    if A_eq is None and n_rows > 2 * n:
        dtype = object if exact else float
        rows, rhs = [], []
        if A_ub is not None:
            rows.append(A_ub)
            rhs.append(b_ub)
        eye = np.eye(n).astype(dtype)
        if exact:
            eye = np.vectorize(to_fraction, otypes=[object])(eye)
        fin_hi = [j for j in range(n) if np.isfinite(float(hi[j]))]
        fin_lo = [j for j in range(n) if np.isfinite(float(lo[j]))]
        if fin_hi:
            rows.append(eye[fin_hi])
            rhs.append(np.array([hi[j] for j in fin_hi], dtype=dtype))
        if fin_lo:
            rows.append(-eye[fin_lo])
            rhs.append(np.array([-lo[j] for j in fin_lo], dtype=dtype))
        G = np.concatenate(rows, axis=0)
        h = np.concatenate(rhs)
        res = _dual_route(c, G, h, exact)
    if res is None:
        res = _primal_route(c, A_ub, b_ub, A_eq, b_eq, lo, hi, exact)
    if check and res.ok and not exact:
        _check_feasible(res.x, A_ub, b_ub, A_eq, b_eq, lo, hi)
    return res


def _check_feasible(x, A_ub, b_ub, A_eq, b_eq, lo, hi):
    scale = 1.0 + float(np.max(np.abs(x))) if x.size else 1.0
    tol = 1e-6 * scale
    bad = False
    if A_ub is not None:
        bad |= bool(np.any(A_ub @ x - b_ub > tol * (1 + np.abs(b_ub))))
    if A_eq is not None:
        bad |= bool(np.any(np.abs(A_eq @ x - b_eq) > tol * (1 + np.abs(b_eq))))
    bad |= bool(np.any(x < lo - tol)) or bool(np.any(x > hi + tol))
    if bad:
        raise NumericalError("simplex returned an infeasible point")
