"""Mixed-integer convex programs over a bounding box, plus tolerances."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field, fields, replace
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from . import expr as ex
from .errors import DimensionError, ModelError


@dataclass(frozen=True)
class Tolerances:
    """All numeric thresholds in one place; every field is overridable."""

    tau_int: float = 1e-9
    tau_act: float = 1e-8
    tau_num: float = 1e-7
    tau_psd: float = 1e-9
    tau_strict: float = 1e-7
    tau_feas: float = 1e-7
    tau_comp: float = 1e-6
    tau_stat: float = 1e-6
    eps_solve: float = 1e-8
    eps_oracle: float = 1e-5
    kappa: float = 2.0
    margin: float = 1.0
    fiber_budget: int = 1_000_000
    max_iter: int = 500
    n_probe: int = 64
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name == "seed":
                continue
            if not (isinstance(v, (int, float)) and v > 0):
                raise ModelError(f"tolerance {f.name} must be positive, got {v!r}")

    def override(self, **kw) -> "Tolerances":
        unknown = set(kw) - {f.name for f in fields(self)}
        if unknown:
            raise ModelError(f"unknown tolerance keys {sorted(unknown)}")
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ModelError("box lo/hi must be vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ModelError("box bounds must be finite")
        if np.any(lo > hi):
            raise ModelError("box has lo > hi")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self):
        return self.lo.shape[0]

    def corners(self) -> np.ndarray:
        return np.array(list(itertools.product(*zip(self.lo, self.hi))), dtype=float)

    def inflate(self, kappa: float, margin: float) -> "Box":
        c = 0.5 * (self.lo + self.hi)
        r = 0.5 * (self.hi - self.lo)
        return Box(c - kappa * r - margin, c + kappa * r + margin)

    def sub(self, idx) -> "Box":
        return Box(self.lo[idx], self.hi[idx])


@dataclass(frozen=True, eq=False)
class Problem:
    """``min f(x)  s.t.  g_j(x) <= 0,  x in Z^n x R^d,  x in box``.

    The box only encodes compactness; certificates still speak about the
    whole of ``Z^n x R^d``.
    """

    n: int
    d: int
    f: ex.ConvexExpr
    g: Tuple[ex.ConvexExpr, ...]
    box: Box
    tol: Tolerances = field(default_factory=Tolerances)

    def __post_init__(self):
        object.__setattr__(self, "g", tuple(self.g))
        if self.n < 0 or self.d < 0 or self.n + self.d < 1:
            raise ModelError(f"need n, d >= 0 and n + d >= 1 (got n={self.n}, d={self.d})")
        dim = self.n + self.d
        for name, e in [("objective", self.f)] + [(f"constraint {j}", e) for j, e in enumerate(self.g)]:
            if e.dim != dim:
                raise ModelError(f"{name} has dimension {e.dim}, expected {dim}")
        if self.box.dim != dim:
            raise ModelError(f"box has dimension {self.box.dim}, expected {dim}")

    @property
    def m(self):
        return len(self.g)

    @property
    def dim(self):
        return self.n + self.d

    @property
    def funcs(self):
        """Constraints followed by the objective (index m is f)."""
        return self.g + (self.f,)

    def gvals(self, x) -> np.ndarray:
        return np.array([ex.evaluate(gj, x) for gj in self.g], dtype=float)

    def is_feasible(self, x, tol=None) -> bool:
        tol = self.tol.tau_feas if tol is None else tol
        return self.m == 0 or float(self.gvals(x).max()) <= tol

    def check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionError(f"point has shape {x.shape}, expected ({self.dim},)")
        return x

    def is_mixed_integer(self, x, tol=None) -> bool:
        tol = self.tol.tau_int if tol is None else tol
        z = np.asarray(x, dtype=float)[: self.n]
        return bool(np.all(np.abs(z - np.round(z)) <= tol))

    def integer_ranges(self) -> List[range]:
        return integer_ranges(self.box.lo[: self.n], self.box.hi[: self.n])

    def fibers(self) -> Iterator[Tuple[int, ...]]:
        """All integer vectors of the box's integer block, lexicographically."""
        return itertools.product(*self.integer_ranges())

    def n_fibers(self) -> int:
        return math.prod(len(r) for r in self.integer_ranges())

    def cont_box(self) -> Box:
        return self.box.sub(slice(self.n, None))

    def with_objective(self, f) -> "Problem":
        return replace(self, f=f)

    def with_tol(self, tol: Tolerances) -> "Problem":
        return replace(self, tol=tol)

    def all_affine(self) -> bool:
        return all(ex.is_affine(e) for e in self.funcs)


def integer_ranges(lo: Sequence[float], hi: Sequence[float], slack: float = 1e-9) -> List[range]:
    return [range(math.ceil(a - slack), math.floor(b + slack) + 1) for a, b in zip(lo, hi)]


# -- JSON ------------------------------------------------------------------


def problem_from_json(obj: dict, tol: Optional[Tolerances] = None) -> Problem:
    try:
        n, d = int(obj["n"]), int(obj["d"])
        tol = tol or Tolerances()
        overrides = obj.get("tolerances") or {}
        tol = tol.override(**overrides)
        f = ex.from_json(obj["objective"], tol.tau_psd)
        g = tuple(ex.from_json(c, tol.tau_psd) for c in obj.get("constraints", []))
        box = Box(obj["box"]["lo"], obj["box"]["hi"])
    except KeyError as exc:
        raise ModelError(f"problem JSON missing key {exc}") from exc
    return Problem(n, d, f, g, box, tol)


def problem_to_json(p: Problem, with_tolerances: bool = True) -> dict:
    out = {
        "n": p.n,
        "d": p.d,
        "objective": ex.to_json(p.f),
        "constraints": [ex.to_json(gj) for gj in p.g],
        "box": {"lo": p.box.lo.tolist(), "hi": p.box.hi.tolist()},
    }
    if with_tolerances:
        default = Tolerances().as_dict()
        diff = {k: v for k, v in p.tol.as_dict().items() if default[k] != v}
        if diff:
            out["tolerances"] = diff
    return out


def load_problem(path, tol: Optional[Tolerances] = None) -> Problem:
    with open(path) as fh:
        return problem_from_json(json.load(fh), tol)
