"""Half-spaces, open polyhedra and mixed-integer lattice-freeness.

A polyhedron here lives in ``R^(n+d)``; lattice points are the fibers
``{z} x R^d`` with ``z`` integral.  Strict inequalities are tested with a
max-min-slack LP so that "strictly inside" becomes a margin ``tau_strict``
(exactly zero in rational mode).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence

import numpy as np

from . import lp
from .errors import BudgetExceeded, Inconclusive, NoValidSubset, NumericalError
from .problem import Box, integer_ranges

LATTICE_FREE = "lattice_free"
WITNESS = "witness"
UNBOUNDED_INCONCLUSIVE = "unbounded_inconclusive"
ENUMERATE_MAX = 4096  # larger bounded ranges are split one coordinate at a time


@dataclass(frozen=True, eq=False)
class HalfSpace:
    """``normal.x < offset`` if strict, else ``normal.x <= offset``.

    A zero normal is allowed and denotes either the empty set or the whole
    space depending on the sign of ``offset``.
    """

    normal: np.ndarray
    offset: object
    strict: bool = True

    def __post_init__(self):
        if isinstance(self.normal, np.ndarray) and self.normal.dtype == object:
            return
        object.__setattr__(self, "normal", np.asarray(self.normal, dtype=float))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def exact(self):
        return self.normal.dtype == object

    def is_degenerate(self):
        return not any(v != 0 for v in self.normal)

    def is_empty(self):
        """Only meaningful for a zero normal."""
        return self.offset <= 0 if self.strict else self.offset < 0

    def slack(self, x):
        return self.offset - self.normal @ x

    def contains(self, x, tol=0.0):
        s = self.slack(x)
        return s > tol if self.strict else s >= -tol

    def to_json(self):
        return {"normal": [float(v) for v in self.normal], "offset": float(self.offset),
                "strict": bool(self.strict)}

    @staticmethod
    def from_json(obj):
        return HalfSpace(obj["normal"], obj["offset"], bool(obj.get("strict", True)))


def exact_halfspace(normal, offset, strict=True) -> HalfSpace:
    """Half-space with Fraction coefficients (used by the rational path)."""
    nrm = np.array([lp.to_fraction(v) for v in normal], dtype=object)
    return HalfSpace(nrm, lp.to_fraction(offset), strict)


@dataclass(frozen=True, eq=False)
class OpenPolyhedron:
    halfspaces: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "halfspaces", tuple(self.halfspaces))

    def __len__(self):
        return len(self.halfspaces)

    def __iter__(self):
        return iter(self.halfspaces)

    def subset(self, idx) -> "OpenPolyhedron":
        return OpenPolyhedron(tuple(self.halfspaces[i] for i in idx))

    def contains(self, x, tol=0.0):
        return all(h.contains(x, tol) for h in self.halfspaces)

    def to_json(self):
        return {"halfspaces": [h.to_json() for h in self.halfspaces]}

    @staticmethod
    def from_json(obj):
        return OpenPolyhedron(tuple(HalfSpace.from_json(h) for h in obj["halfspaces"]))


def _as_poly(P):
    return P if isinstance(P, OpenPolyhedron) else OpenPolyhedron(tuple(P))


def _is_exact(P):
    return any(h.exact for h in P)


# -- LP front end ----------------------------------------------------------


def lp_solve(c, constraints: Sequence[HalfSpace], box: Box) -> lp.LPResult:
    """Minimise ``c.x`` over the weak half-spaces intersected with ``box``.

    Status is one of ``optimal``, ``infeasible`` or ``numerical_error``.
    """
    A = np.array([h.normal for h in constraints], dtype=float).reshape(len(constraints), box.dim)
    b = np.array([h.offset for h in constraints], dtype=float)
    try:
        return lp.linprog(c, A, b, lo=box.lo, hi=box.hi)
    except NumericalError:
        return lp.LPResult("numerical_error")


def _split(P: OpenPolyhedron):
    """Drop whole-space degenerate rows; report whether an empty one exists."""
    rows = []
    for h in P:
        if h.is_degenerate():
            if h.is_empty():
                return None
            continue
        rows.append(h)
    return rows


def _norm(h):
    return max(abs(v) for v in h.normal)


def strict_feasible_on_fiber(P, z, box: Optional[Box] = None, d: Optional[int] = None,
                             tol_strict: float = 1e-7):
    """Return ``y`` with ``(z, y)`` in ``P`` (strict rows by a margin), else None.

    ``box`` is the full ``n+d`` box and bounds the continuous block when
    given; otherwise ``y`` ranges over all of ``R^d``.
    """
    P = _as_poly(P)
    rows = _split(P)
    if rows is None:
        return None
    exact = _is_exact(P)
    tol = 0 if exact else tol_strict
    z = list(z)
    n = len(z)
    if rows:
        d = len(rows[0].normal) - n
    elif d is None:
        d = box.dim - n if box is not None else 0
    if box is not None:
        ylo, yhi = box.lo[n:], box.hi[n:]
    else:
        ylo, yhi = np.full(d, -np.inf), np.full(d, np.inf)
    if not rows:
        return np.clip(np.zeros(d), ylo, yhi)
    zv = np.array(z, dtype=object if exact else float)
    if d == 0:
        for h in rows:
            s = h.offset - h.normal @ zv
            if h.strict and not s > tol:
                return None
            if not h.strict and not s >= -tol:
                return None
        return np.zeros(0)
    A, b = [], []
    for h in rows:
        a_y = list(h.normal[n:])
        rhs = h.offset - h.normal[:n] @ zv if n else h.offset
        A.append(a_y + [_norm(h) if h.strict else 0])
        b.append(rhs + (0 if h.strict else tol))
    c = [0] * d + [-1]
    lo = list(ylo) + [-np.inf]
    hi = list(yhi) + [1]
    res = lp.linprog(c, A, b, lo=lo, hi=hi, exact=exact)
    if not res.ok:
        return None
    s = res.x[-1]
    has_strict = any(h.strict for h in rows)
    if has_strict and not s > tol:
        return None
    y = res.x[:d]
    return y if exact else np.asarray(y, dtype=float)


@dataclass
class LatticeResult:
    status: str
    witness: Optional[np.ndarray] = None
    z_ranges: Optional[list] = None
    extreme: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def lattice_free(self):
        return self.status == LATTICE_FREE


def _closure_extent(rows, n, dim, ebox, exact):
    """Per integer coordinate min/max over cl(P) with z in ``ebox``, y free.

    Returns (ranges, bounded, extreme_point) or None if cl(P) is empty.
    """
    A = [list(h.normal) for h in rows]
    b = [h.offset for h in rows]
    lo = list(ebox.lo) + [-np.inf] * (dim - n)
    hi = list(ebox.hi) + [np.inf] * (dim - n)
    if exact:
        lo = [lp.to_fraction(v) for v in ebox.lo] + [-np.inf] * (dim - n)
        hi = [lp.to_fraction(v) for v in ebox.hi] + [np.inf] * (dim - n)
    ranges, bounded, extreme = [], True, None
    edge = 0 if exact else 1e-7
    for i in range(n):
        ends = []
        for sgn in (1, -1):
            c = [0] * dim
            c[i] = sgn
            res = lp.linprog(c, A, b, lo=lo, hi=hi, exact=exact)
            if res.status == lp.INFEASIBLE:
                return None
            if not res.ok:
                raise NumericalError(f"extent LP returned {res.status}")
            v = res.x[i]
            wall = lo[i] if sgn == 1 else hi[i]
            if abs(v - wall) <= edge:
                bounded = False
                if extreme is None:
                    extreme = np.array(res.x, dtype=object if exact else float)
            ends.append(v)
        ranges.append((ends[0], ends[1]))
    return ranges, bounded, extreme


def _free_extent(rows, n, dim, exact):
    """Per integer coordinate ``(min, max)`` over cl(P) with every variable free.

    Unbounded ends are ``None``.  Returns None if cl(P) is empty.
    """
    A = [list(h.normal) for h in rows]
    b = [h.offset for h in rows]
    free = [-np.inf] * dim, [np.inf] * dim
    out = []
    for i in range(n):
        ends = []
        for sgn in (1, -1):
            c = [0] * dim
            c[i] = sgn
            res = lp.linprog(c, A, b, lo=free[0], hi=free[1], exact=exact)
            if res.status == lp.INFEASIBLE:
                return None
            if res.status == lp.UNBOUNDED:
                ends.append(None)
            elif res.ok:
                ends.append(res.x[i])
            else:
                raise NumericalError(f"extent LP returned {res.status}")
        out.append((ends[0], ends[1]))
    return out


def _int_range(lo_, hi_, tol):
    if isinstance(lo_, Fraction) or isinstance(hi_, Fraction):
        return range(math.ceil(lo_), math.floor(hi_) + 1)
    return range(math.ceil(float(lo_) - tol), math.floor(float(hi_) + tol) + 1)


def _fix(rows, i, k):
    """Substitute ``x_i = k``; None if a row becomes an empty constraint."""
    out = []
    for h in rows:
        nrm = np.delete(h.normal, i)
        h2 = HalfSpace(nrm, h.offset - h.normal[i] * k, h.strict)
        if h2.is_degenerate():
            if h2.is_empty():
                return None
            continue
        out.append(h2)
    return out


def _insert(point, i, k, exact):
    if point is None:
        return None
    kv = Fraction(int(k)) if exact else float(k)
    return np.insert(np.asarray(point, dtype=object if exact else float), i, kv)


def _primitive(v, max_den=10 ** 6):
    """Nearest primitive integer vector in the direction of ``v`` (or None)."""
    v = np.asarray([float(x) for x in v])
    scale = np.max(np.abs(v))
    if scale == 0 or not np.isfinite(scale):
        return None
    fr = [Fraction(x / scale).limit_denominator(max_den) for x in v]
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    ints = [int(f * den) for f in fr]
    g = 0
    for x in ints:
        g = math.gcd(g, abs(x))
    if g == 0:
        return None
    return tuple(x // g for x in ints)


def _direction_candidates(rows, n, d):
    cands = []
    for h in rows:
        vy = [float(x) for x in h.normal[n:]]
        if not any(abs(x) > 1e-12 for x in vy):
            cands.append(h.normal[:n])
    if d:
        G = np.array([[float(x) for x in h.normal] for h in rows])
        _, sv, Vt = np.linalg.svd(G[:, n:].T)
        rank = int(np.sum(sv > 1e-10 * max(1.0, sv[0] if len(sv) else 1.0)))
        for lam in Vt[rank:]:
            cands.append(G[:, :n].T @ lam)
    out = []
    for v in cands:
        w = _primitive(v)
        if w is not None and w not in out and tuple(-x for x in w) not in out:
            out.append(w)
    return out


def _unimodular(w):
    """Integer matrix ``M`` with ``det M = +-1`` and ``w @ M = e_1`` (``w`` primitive)."""
    w = [int(v) for v in w]
    n = len(w)
    M = [[int(i == j) for j in range(n)] for i in range(n)]

    def col_sub(j, i, q):
        for r in range(n):
            M[r][j] -= q * M[r][i]

    while sum(1 for v in w if v != 0) > 1:
        i = min((j for j in range(n) if w[j] != 0), key=lambda j: abs(w[j]))
        for j in range(n):
            if j != i and w[j] != 0:
                q = w[j] // w[i]
                w[j] -= q * w[i]
                col_sub(j, i, q)
    i = next(j for j in range(n) if w[j] != 0)
    if w[i] < 0:
        w[i] = -w[i]
        for r in range(n):
            M[r][i] = -M[r][i]
    for r in range(n):
        M[r][0], M[r][i] = M[r][i], M[r][0]
    return np.array(M, dtype=np.int64)


def _transform(h, M, n):
    """Row ``h`` rewritten in coordinates ``t`` with ``z = M t``."""
    if h.exact:
        vz = [sum((M[r][c] * h.normal[r] for r in range(n)), Fraction(0)) for c in range(n)]
        return HalfSpace(np.array(vz + list(h.normal[n:]), dtype=object), h.offset, h.strict)
    vz = M.T.astype(float) @ np.asarray(h.normal[:n], dtype=float)
    return HalfSpace(np.concatenate([vz, np.asarray(h.normal[n:], dtype=float)]), h.offset, h.strict)


def _untransform(point, M, n, exact):
    if point is None:
        return None
    t = list(point[:n])
    if exact:
        z = [sum((int(M[r][c]) * t[c] for c in range(n)), Fraction(0)) for r in range(n)]
        return np.array(z + list(point[n:]), dtype=object)
    z = M.astype(float) @ np.asarray(t, dtype=float)
    return np.concatenate([z, np.asarray(point[n:], dtype=float)])


class _Search:
    def __init__(self, exact, tol, tol_strict, budget, cbox):
        self.exact, self.tol, self.tol_strict = exact, tol, tol_strict
        self.budget, self.used = budget, 0
        self.cbox = cbox

    def spend(self, k):
        self.used += k
        if self.used > self.budget:
            raise BudgetExceeded(f"more than {self.budget} fibers examined")

    def y_default(self, d):
        return np.clip(np.zeros(d), self.cbox.lo, self.cbox.hi)

    def leaf(self, rows, Z, n, d):
        """First ``z`` in ``Z`` (in order) whose fiber meets the polyhedron."""
        exact, tol = self.exact, self.tol
        self.spend(len(Z))
        if not len(Z):
            return None
        if not rows:
            z = Z[0]
            return self._point(z, self.y_default(d), d)
        pure = all(not any(v != 0 for v in h.normal[n:]) for h in rows)
        if pure:
            Nz = np.array([[v for v in h.normal[:n]] for h in rows], dtype=object if exact else float)
            off = np.array([h.offset for h in rows], dtype=object if exact else float)
            scale = np.array([_norm(h) for h in rows], dtype=object if exact else float)
            strict = np.array([h.strict for h in rows])
            Zc = Z.astype(object) if exact else Z.astype(float)
            S = off[None, :] - Zc @ Nz.T
            if exact:
                ok = np.where(strict[None, :], S > 0, S >= 0)
            else:
                S = S / scale[None, :]
                ok = np.where(strict[None, :], S > tol, S >= -tol)
            inside = np.flatnonzero(np.all(ok, axis=1))
            if inside.size:
                return self._point(Z[inside[0]], None, d)
            return None
        Pr = OpenPolyhedron(tuple(rows))
        for z in Z:
            y = strict_feasible_on_fiber(Pr, [int(v) for v in z], None, d, self.tol_strict)
            if y is not None:
                return self._point(z, y, d)
        return None

    def _point(self, z, y, d):
        if self.exact:
            yy = [Fraction(0)] * d if y is None else list(y)
            return np.array([Fraction(int(v)) for v in z] + yy, dtype=object)
        yy = self.y_default(d) if y is None else np.asarray(y, dtype=float)
        return np.concatenate([np.asarray(z, dtype=float), yy])

    def decide(self, rows, n, d, center, ebox_lo, ebox_hi):
        """Returns ``(status, point, ranges)`` in the current coordinates."""
        if n == 0:
            self.spend(1)
            y = strict_feasible_on_fiber(OpenPolyhedron(tuple(rows)), [], None, d, self.tol_strict)
            if y is None:
                return LATTICE_FREE, None, []
            return WITNESS, self._point([], y, d), []
        ext = _free_extent(rows, n, n + d, self.exact)
        if ext is None:
            return LATTICE_FREE, None, []
        bounded = [i for i, (a, b) in enumerate(ext) if a is not None and b is not None]
        if len(bounded) == n:
            rngs = [_int_range(a, b, self.tol) for a, b in ext]
            count = math.prod(len(r) for r in rngs)
            if count <= ENUMERATE_MAX or n == 1:
                hit = self.leaf(rows, _ordered(rngs, center), n, d)
                return (WITNESS, hit, ext) if hit is not None else (LATTICE_FREE, None, ext)
        if bounded:
            i = min(bounded, key=lambda j: (len(_int_range(*ext[j], self.tol)), j))
            ks = sorted(_int_range(*ext[i], self.tol), key=lambda k: (abs(k - center[i]), k))
            pending = None
            sub_c = np.delete(center, i)
            sub_lo, sub_hi = np.delete(ebox_lo, i), np.delete(ebox_hi, i)
            for k in ks:
                self.spend(1)
                sub = _fix(rows, i, k)
                if sub is None:
                    continue
                st, pt, _ = self.decide(sub, n - 1, d, sub_c, sub_lo, sub_hi)
                if st == WITNESS:
                    return WITNESS, _insert(pt, i, k, self.exact), ext
                if st == UNBOUNDED_INCONCLUSIVE and pending is None:
                    pending = _insert(pt, i, k, self.exact)
            if pending is not None:
                return UNBOUNDED_INCONCLUSIVE, pending, ext
            return LATTICE_FREE, None, ext
        if n >= 2:
            M = self._bounded_direction(rows, n, d)
            if M is not None:
                Minv = np.round(np.linalg.inv(M.astype(float))).astype(np.int64)
                t_rows = [_transform(h, M, n) for h in rows]
                st, pt, _ = self.decide(t_rows, n, d, Minv @ np.asarray(center), ebox_lo, ebox_hi)
                return st, _untransform(pt, M, n, self.exact), ext
        return self.fallback(rows, n, d, center, ebox_lo, ebox_hi, ext)

    def _bounded_direction(self, rows, n, d):
        """Unimodular ``M`` whose first column direction ``w.z`` is bounded on cl(P).

        Candidates are integer approximations of the rows' integer parts
        and of combinations that cancel the continuous parts; each is
        accepted only after an LP confirms both ends of ``w.z`` are finite,
        so the branching stays exact whatever the approximation error.
        """
        best = None
        for w in _direction_candidates(rows, n, d):
            c = list(w) + [0] * d
            lo_hi = []
            for sgn in (1, -1):
                res = lp.linprog([sgn * v for v in c], [list(h.normal) for h in rows],
                                 [h.offset for h in rows], lo=[-np.inf] * (n + d),
                                 hi=[np.inf] * (n + d), exact=self.exact)
                if not res.ok:
                    break
                lo_hi.append(sum(a * b for a, b in zip(c, res.x)))
            if len(lo_hi) != 2:
                continue
            width = float(lo_hi[1]) - float(lo_hi[0])
            if width + 1 > self.budget - self.used:
                continue
            if best is None or width < best[0]:
                best = (width, w)
        return None if best is None else _unimodular(best[1])

    def fallback(self, rows, n, d, center, ebox_lo, ebox_hi, ext):
        """Unbounded in every integer direction: search the inflated box only.

        With one integer coordinate and a finite end, the projection of
        P is an open half-line, so the first integers past that end are
        tried too.
        """
        if n == 1:
            end = ext[0][0] if ext[0][0] is not None else ext[0][1]
            if end is not None:
                step = 1 if ext[0][0] is not None else -1
                base = math.floor(float(end)) if step == 1 else math.ceil(float(end))
                Z = np.array([[base + step * j] for j in range(1, 4)], dtype=np.int64)
                hit = self.leaf(rows, Z, n, d)
                if hit is not None:
                    return WITNESS, hit, ext
        ebox = Box(ebox_lo, ebox_hi)
        found = _closure_extent(rows, n, n + d, ebox, self.exact)
        if found is None:
            far = self._extreme(rows, n, d)
            return UNBOUNDED_INCONCLUSIVE, far, ext
        ranges, _, extreme = found
        rngs = [_int_range(a, b, self.tol) for a, b in ranges]
        hit = self.leaf(rows, _ordered(rngs, center), n, d)
        if hit is not None:
            return WITNESS, hit, ext
        if extreme is None:
            extreme = self._extreme(rows, n, d)
        return UNBOUNDED_INCONCLUSIVE, extreme, ext

    def _extreme(self, rows, n, d):
        A = [list(h.normal) for h in rows]
        b = [h.offset for h in rows]
        res = lp.linprog([0] * (n + d), A, b, lo=[-np.inf] * (n + d), hi=[np.inf] * (n + d),
                         exact=self.exact)
        return np.array(res.x, dtype=object if self.exact else float) if res.ok else None


def _ordered(rngs, center):
    """All integer vectors of ``rngs``: nearest to ``center`` first, then lexicographic."""
    if any(len(r) == 0 for r in rngs):
        return np.zeros((0, len(rngs)), dtype=np.int64)
    if not rngs:
        return np.zeros((1, 0), dtype=np.int64)
    grids = np.meshgrid(*[np.arange(r.start, r.stop) for r in rngs], indexing="ij")
    Z = np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)
    dist = np.sum((Z - np.asarray(center)) ** 2, axis=1)
    order = np.lexsort(tuple(Z[:, k] for k in range(Z.shape[1] - 1, -1, -1)) + (dist,))
    return Z[order]


def mixed_lattice_free(P, box: Box, n: int, kappa: float = 2.0, margin: float = 1.0,
                       budget: int = 1_000_000, tol_strict: float = 1e-7) -> LatticeResult:
    """Decide whether ``P`` contains a point of ``Z^n x R^d``.

    Integer coordinates along which cl(P) is bounded are fixed one value
    at a time, recursing on the remaining ones.  Only when cl(P) is
    unbounded in every remaining integer direction is the search limited
    to the inflated box, and then the answer is at best
    ``unbounded_inconclusive`` (a witness found inside still counts).
    """
    P = _as_poly(P)
    exact = _is_exact(P)
    tol = 0 if exact else tol_strict
    rows = _split(P)
    if rows is None:
        return LatticeResult(LATTICE_FREE, z_ranges=[])
    dim = box.dim
    d = dim - n
    ebox = box.sub(slice(0, n)).inflate(kappa, margin)
    center = np.round(0.5 * (box.lo[:n] + box.hi[:n])).astype(np.int64)
    search = _Search(exact, tol, tol_strict, budget, box.sub(slice(n, None)))
    if not rows:
        return LatticeResult(WITNESS, search._point(center, None, d), None)
    status, point, ranges = search.decide(rows, n, d, center, ebox.lo, ebox.hi)
    if status == WITNESS:
        return LatticeResult(WITNESS, point, ranges)
    if status == LATTICE_FREE:
        return LatticeResult(LATTICE_FREE, z_ranges=ranges)
    return LatticeResult(UNBOUNDED_INCONCLUSIVE, z_ranges=ranges, extreme=point)


# -- Doignon sub-selection -------------------------------------------------


@dataclass
class Selection:
    indices: List[int]
    greedy_size: int
    exhaustive: bool = False


GROW_THRESHOLD = 24
EXHAUSTIVE_MAX_INPUT = 40
EXHAUSTIVE_BUDGET = 200_000


def _violation(h, x):
    """Normalised amount by which ``x`` fails to lie strictly inside ``h``."""
    return (h.normal @ x - h.offset) / _norm(h)


def doignon_select(halfspaces, box: Box, n: int, must_keep: Optional[int] = None,
                   kappa: float = 2.0, margin: float = 1.0, budget: int = 1_000_000,
                   tol_strict: float = 1e-7, anchors=None) -> Selection:
    """Pick at most ``2**n`` half-spaces whose intersection stays lattice-free.

    Large pools are first shrunk by adding, one witness at a time, the
    half-space that cuts the current witness off; greedy deletion then
    removes redundant members, and if more than ``2**n`` survive an
    exhaustive search over small subsets takes over.  ``anchors`` (one
    point per half-space) lets the growth step prefer the half-space
    generated at the witness's own integer vector.
    """
    hs = list(halfspaces)
    limit = 2 ** n
    kw = dict(kappa=kappa, margin=margin, budget=budget, tol_strict=tol_strict)

    def lattice_free(idx):
        res = mixed_lattice_free(OpenPolyhedron(tuple(hs[i] for i in idx)), box, n, **kw)
        return res

    full = lattice_free(range(len(hs)))
    if full.status == WITNESS:
        raise NoValidSubset(f"input polyhedron contains lattice point {full.witness}")
    if full.status == UNBOUNDED_INCONCLUSIVE:
        raise Inconclusive("input polyhedron is unbounded; lattice-freeness undecided")

    work = list(range(len(hs)))
    if len(hs) > GROW_THRESHOLD:
        work = _grow(hs, lattice_free, must_keep, anchors, n)
    greedy = list(work)
    for i in list(work):
        if i == must_keep:
            continue
        trial = [j for j in greedy if j != i]
        if lattice_free(trial).lattice_free:
            greedy = trial
    if len(greedy) <= limit:
        return Selection(sorted(greedy), len(greedy))

    pool = list(range(len(hs))) if len(hs) <= EXHAUSTIVE_MAX_INPUT else greedy
    fixed = [must_keep] if must_keep is not None else []
    rest = [i for i in pool if i != must_keep]
    tried = 0
    for size in range(1, limit + 1 - len(fixed)):
        for combo in itertools.combinations(rest, size):
            tried += 1
            if tried > EXHAUSTIVE_BUDGET:
                raise BudgetExceeded("exhaustive Doignon search budget exceeded")
            idx = sorted(fixed + list(combo))
            if lattice_free(idx).lattice_free:
                return Selection(idx, len(greedy), exhaustive=True)
    if fixed and len(fixed) <= limit and lattice_free(fixed).lattice_free:
        return Selection(fixed, len(greedy), exhaustive=True)
    raise NoValidSubset(f"no lattice-free subset of size <= {limit} "
                        f"(greedy stopped at {len(greedy)})")


def _grow(hs, lattice_free, must_keep, anchors=None, n=0):
    chosen = [must_keep] if must_keep is not None else []
    for _ in range(len(hs) + 1):
        res = lattice_free(chosen)
        if res.status == LATTICE_FREE:
            return sorted(chosen)
        point = res.witness if res.status == WITNESS else res.extreme
        if point is None:
            break
        point = np.asarray(point, dtype=float)
        best, best_key = None, None
        for i, h in enumerate(hs):
            if i in chosen or h.is_degenerate():
                continue
            v = _violation(h, point)
            if v < -1e-12:
                continue
            far = 0.0
            if anchors is not None:
                far = float(np.sum(np.abs(np.asarray(anchors[i], dtype=float)[:n] - point[:n])))
            key = (far, -v)
            if best_key is None or key < best_key:
                best, best_key = i, key
        if best is None:
            break
        chosen.append(best)
    raise NoValidSubset("witness-driven growth could not close the polyhedron")
