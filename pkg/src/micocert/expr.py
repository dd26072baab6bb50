"""Convex expression trees with exact evaluation and subgradient oracles.

Every expression is built from five node types::

    Affine(a, b)        a.x + b
    Quad(Q, a, b)       0.5 x.Q.x + a.x + b        (Q symmetric PSD)
    Sum(children)
    Max(children)
    Scale(c, child)     c * child                  (c >= 0)

The family is closed under the operations used by the rest of the package
and every member is a finite maximum of convex quadratics, which
:func:`pieces` makes explicit.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, ModelError

TAU_PSD = 1e-9
TAU_ACT = 1e-8
MAX_PIECES = 4096


def _vec(v, name):
    arr = np.asarray(v, dtype=float)
    if arr.ndim != 1:
        raise ModelError(f"{name} must be a vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{name} has non-finite entries")
    return arr


class ConvexExpr:
    """Base class; concrete nodes are the frozen dataclasses below."""

    dim: int

    def __call__(self, x):
        return evaluate(self, x)

    # operator sugar keeps test instances readable
    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Affine(np.zeros(self.dim), float(other))
        return Sum((self, other))

    __radd__ = __add__

    def __mul__(self, c):
        return Scale(float(c), self)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Affine(ConvexExpr):
    a: np.ndarray
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _vec(self.a, "affine.a"))
        object.__setattr__(self, "b", float(self.b))
        if not np.isfinite(self.b):
            raise ModelError("affine.b must be finite")

    @property
    def dim(self):
        return self.a.shape[0]


@dataclass(frozen=True, eq=False)
class Quad(ConvexExpr):
    Q: np.ndarray
    a: np.ndarray
    b: float = 0.0
    tol_psd: float = TAU_PSD

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        a = _vec(self.a, "quad.a")
        if Q.shape != (a.shape[0], a.shape[0]):
            raise ModelError(f"quad.Q has shape {Q.shape}, expected {(a.shape[0],) * 2}")
        if not np.all(np.isfinite(Q)):
            raise ModelError("quad.Q has non-finite entries")
        if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12):
            raise ModelError("quad.Q must be symmetric")
        if Q.size and np.linalg.eigvalsh(Q).min() < -self.tol_psd:
            raise ModelError("quad.Q must be positive semidefinite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", float(self.b))

    @property
    def dim(self):
        return self.a.shape[0]


def _common_dim(children):
    if not children:
        raise ModelError("sum/max need at least one child")
    dims = {c.dim for c in children}
    if len(dims) != 1:
        raise ModelError(f"children have mismatched dimensions {sorted(dims)}")
    return dims.pop()


@dataclass(frozen=True, eq=False)
class Sum(ConvexExpr):
    children: Tuple[ConvexExpr, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        _common_dim(self.children)

    @property
    def dim(self):
        return self.children[0].dim


@dataclass(frozen=True, eq=False)
class Max(ConvexExpr):
    children: Tuple[ConvexExpr, ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        _common_dim(self.children)

    @property
    def dim(self):
        return self.children[0].dim


@dataclass(frozen=True, eq=False)
class Scale(ConvexExpr):
    c: float
    child: ConvexExpr

    def __post_init__(self):
        c = float(self.c)
        if not np.isfinite(c) or c < 0:
            raise ModelError(f"scale coefficient must be finite and >= 0, got {c}")
        object.__setattr__(self, "c", c)

    @property
    def dim(self):
        return self.child.dim


# -- evaluation ------------------------------------------------------------


def _as_points(expr, x):
    X = np.asarray(x, dtype=float)
    if X.ndim not in (1, 2) or X.shape[-1] != expr.dim:
        raise DimensionError(f"expected points of length {expr.dim}, got shape {X.shape}")
    return X


def _eval(expr, X):
    if isinstance(expr, Affine):
        return X @ expr.a + expr.b
    if isinstance(expr, Quad):
        QX = X @ expr.Q
        return 0.5 * np.sum(QX * X, axis=-1) + X @ expr.a + expr.b
    if isinstance(expr, Sum):
        out = _eval(expr.children[0], X)
        for ch in expr.children[1:]:
            out = out + _eval(ch, X)
        return out
    if isinstance(expr, Max):
        return np.max(np.stack([_eval(ch, X) for ch in expr.children]), axis=0)
    if isinstance(expr, Scale):
        return expr.c * _eval(expr.child, X)
    raise ModelError(f"unknown node {type(expr).__name__}")


def evaluate(expr: ConvexExpr, x):
    """Value of ``expr`` at a point, or at each row of a 2-D array."""
    X = _as_points(expr, x)
    out = _eval(expr, X)
    return float(out) if X.ndim == 1 else out


def _subgrad(expr, x, tol):
    if isinstance(expr, Affine):
        return expr.a.copy()
    if isinstance(expr, Quad):
        return expr.Q @ x + expr.a
    if isinstance(expr, Sum):
        return sum(_subgrad(ch, x, tol) for ch in expr.children)
    if isinstance(expr, Max):
        vals = [_eval(ch, x) for ch in expr.children]
        top = max(vals)
        i = next(i for i, v in enumerate(vals) if v >= top - tol)
        return _subgrad(expr.children[i], x, tol)
    if isinstance(expr, Scale):
        return expr.c * _subgrad(expr.child, x, tol)
    raise ModelError(f"unknown node {type(expr).__name__}")


def subgradient(expr: ConvexExpr, x, tol_act: float = TAU_ACT) -> np.ndarray:
    """A deterministic member of the subdifferential at ``x``.

    Max nodes follow the lowest-index child within ``tol_act`` of the max.
    """
    X = _as_points(expr, x)
    if X.ndim != 1:
        raise DimensionError("subgradient takes a single point")
    return np.asarray(_subgrad(expr, X, tol_act), dtype=float)


def active_children(expr: Max, x, tol_act: float = TAU_ACT) -> List[int]:
    """Indices (0-based) of children within ``tol_act`` of the maximum."""
    if not isinstance(expr, Max):
        raise ModelError("active_children needs a Max node")
    X = _as_points(expr, x)
    vals = np.array([float(_eval(ch, X)) for ch in expr.children])
    return [int(i) for i in np.flatnonzero(vals >= vals.max() - tol_act)]


# -- piece expansion -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Piece:
    """One convex quadratic ``0.5 x.Q.x + a.x + b``; ``Q`` is None if affine."""

    Q: Optional[np.ndarray]
    a: np.ndarray
    b: float

    def value(self, X):
        X = np.asarray(X, dtype=float)
        v = X @ self.a + self.b
        if self.Q is not None:
            v = v + 0.5 * np.sum((X @ self.Q) * X, axis=-1)
        return v

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return self.a + (self.Q @ x if self.Q is not None else 0.0)

    def hess(self, dim):
        return self.Q if self.Q is not None else np.zeros((dim, dim))


def _add(p: Piece, q: Piece) -> Piece:
    if p.Q is None:
        Q = q.Q
    elif q.Q is None:
        Q = p.Q
    else:
        Q = p.Q + q.Q
    return Piece(Q, p.a + q.a, p.b + q.b)


def pieces(expr: ConvexExpr, limit: int = MAX_PIECES) -> List[Piece]:
    """Rewrite ``expr`` as a list of quadratics whose pointwise max is ``expr``.

    Sums distribute over maxima, so the list can grow multiplicatively;
    ``limit`` guards against blow-up.
    """
    if isinstance(expr, Affine):
        return [Piece(None, expr.a, expr.b)]
    if isinstance(expr, Quad):
        Q = expr.Q if np.any(expr.Q) else None
        return [Piece(Q, expr.a, expr.b)]
    if isinstance(expr, Scale):
        return [Piece(None if p.Q is None else expr.c * p.Q, expr.c * p.a, expr.c * p.b)
                for p in pieces(expr.child, limit)]
    if isinstance(expr, Max):
        out = []
        for ch in expr.children:
            out.extend(pieces(ch, limit))
        if len(out) > limit:
            raise ModelError(f"piece expansion exceeds {limit}")
        return out
    if isinstance(expr, Sum):
        lists = [pieces(ch, limit) for ch in expr.children]
        total = 1
        for lst in lists:
            total *= len(lst)
        if total > limit:
            raise ModelError(f"piece expansion exceeds {limit}")
        out = []
        for combo in itertools.product(*lists):
            acc = combo[0]
            for p in combo[1:]:
                acc = _add(acc, p)
            out.append(acc)
        return out
    raise ModelError(f"unknown node {type(expr).__name__}")


def active_pieces(plist: Sequence[Piece], x, tol: float) -> List[int]:
    vals = np.array([float(p.value(x)) for p in plist])
    return [int(i) for i in np.flatnonzero(vals >= vals.max() - tol)]


def is_affine(expr: ConvexExpr) -> bool:
    if isinstance(expr, Affine):
        return True
    if isinstance(expr, Quad):
        return not np.any(expr.Q)
    if isinstance(expr, Scale):
        return is_affine(expr.child)
    if isinstance(expr, Sum):
        return all(is_affine(c) for c in expr.children)
    return False


def affine_coefficients(expr: ConvexExpr) -> Tuple[np.ndarray, float]:
    """Return ``(a, b)`` for an expression that is affine (no Max)."""
    if not is_affine(expr):
        raise ModelError("expression is not affine")
    (p,) = pieces(expr)
    return p.a.copy(), float(p.b)


# -- JSON ------------------------------------------------------------------


def to_json(expr: ConvexExpr) -> dict:
    if isinstance(expr, Affine):
        return {"affine": {"a": expr.a.tolist(), "b": expr.b}}
    if isinstance(expr, Quad):
        return {"quad": {"Q": expr.Q.tolist(), "a": expr.a.tolist(), "b": expr.b}}
    if isinstance(expr, Sum):
        return {"sum": [to_json(c) for c in expr.children]}
    if isinstance(expr, Max):
        return {"max": [to_json(c) for c in expr.children]}
    if isinstance(expr, Scale):
        return {"scale": {"c": expr.c, "f": to_json(expr.child)}}
    raise ModelError(f"unknown node {type(expr).__name__}")


def from_json(obj, tol_psd: float = TAU_PSD) -> ConvexExpr:
    if not isinstance(obj, dict) or len(obj) != 1:
        raise ModelError(f"expression must be a single-key object, got {obj!r}")
    (tag, body), = obj.items()
    try:
        if tag == "affine":
            return Affine(body["a"], body.get("b", 0.0))
        if tag == "quad":
            return Quad(body["Q"], body["a"], body.get("b", 0.0), tol_psd=tol_psd)
        if tag == "sum":
            return Sum(tuple(from_json(c, tol_psd) for c in body))
        if tag == "max":
            return Max(tuple(from_json(c, tol_psd) for c in body))
        if tag == "scale":
            return Scale(body["c"], from_json(body["f"], tol_psd))
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed {tag} node: {exc}") from exc
    raise ModelError(f"unknown expression tag {tag!r}")
