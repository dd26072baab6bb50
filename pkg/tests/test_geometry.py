from fractions import Fraction

import numpy as np
import pytest

from micocert import geometry as geo
from micocert.errors import NoValidSubset
from micocert.geometry import HalfSpace, OpenPolyhedron, doignon_select, mixed_lattice_free
from micocert.problem import Box

from instances import crafted_exhaustive_instance, line

B2 = Box([-3, -3], [3, 3])
B1 = Box([-3], [3])
TRIANGLE = [HalfSpace([-1, -1], 0), HalfSpace([1, 0], 1), HalfSpace([0, 1], 1)]


def test_open_triangle_is_lattice_free():
    res = mixed_lattice_free(TRIANGLE, B2, 2)
    assert res.lattice_free


def test_dropping_a_row_exposes_a_witness():
    res = mixed_lattice_free(TRIANGLE[:2], B2, 2)
    assert res.status == geo.WITNESS
    z = res.witness
    assert all(h.contains(z) for h in TRIANGLE[:2])


def test_strictness_matters_on_the_boundary():
    strict = [HalfSpace([1], 1.0), HalfSpace([-1], 0.0)]
    assert mixed_lattice_free(strict, B1, 1).lattice_free
    weak = [HalfSpace([1], 1.0, strict=False), HalfSpace([-1], -0.5)]
    res = mixed_lattice_free(weak, B1, 1)
    assert res.status == geo.WITNESS and res.witness.tolist() == [1.0]


def test_interval_tests_in_one_dimension():
    assert mixed_lattice_free([HalfSpace([1], 0.4), HalfSpace([-1], 0.4)], B1, 1).status == geo.WITNESS
    assert mixed_lattice_free([HalfSpace([1], 0.9), HalfSpace([-1], -0.1)], B1, 1).lattice_free


def test_unbounded_strip_is_decided_by_branching():
    # 0 < x1 < 1 is lattice-free although it is unbounded in x2
    strip = [HalfSpace([1, 0], 1.0), HalfSpace([-1, 0], 0.0)]
    assert mixed_lattice_free(strip, B2, 2).lattice_free
    # -0.5 < x1 < 0.5 holds the whole column x1 = 0
    strip = [HalfSpace([1, 0], 0.5), HalfSpace([-1, 0], 0.5)]
    assert mixed_lattice_free(strip, B2, 2).status == geo.WITNESS


def test_far_away_bounded_set_is_found():
    far = [HalfSpace([1, 0], 40.5), HalfSpace([-1, 0], -39.5), HalfSpace([0, 1], 0.5),
           HalfSpace([0, -1], 0.5)]
    res = mixed_lattice_free(far, B2, 2)
    assert res.status == geo.WITNESS and res.witness.tolist() == [40.0, 0.0]


def test_diagonal_strip_is_decided_after_a_lattice_change_of_basis():
    diag = [HalfSpace([1, -1], 0.9), HalfSpace([-1, 1], -0.1)]
    assert mixed_lattice_free(diag, B2, 2).lattice_free
    wide = [HalfSpace([2, 3, 0], 1.9), HalfSpace([-2, -3, 0], -0.1)]
    res = mixed_lattice_free(wide, Box([-3] * 3, [3] * 3), 3)
    assert res.status == geo.WITNESS
    assert 0.1 < 2 * res.witness[0] + 3 * res.witness[1] < 1.9
    assert mixed_lattice_free([HalfSpace([-1, -1], -0.5)], B2, 2).status == geo.WITNESS


def test_irrational_strip_is_never_called_lattice_free():
    r2 = float(np.sqrt(2.0))
    strip = [HalfSpace([1, -r2], 0.2), HalfSpace([-1, r2], -0.1)]
    assert mixed_lattice_free(strip, B2, 2).status in (geo.WITNESS, geo.UNBOUNDED_INCONCLUSIVE)


def test_half_line_far_from_the_box():
    res = mixed_lattice_free([HalfSpace([-1, 0], -100.2)], B2, 1)
    assert res.status == geo.WITNESS and res.witness[0] == 101.0


def test_mixed_fiber_needs_a_continuous_point():
    # fiber z = 0 meets {y > 2, y < 1 + z}? no; fiber z = 2 does
    P = [HalfSpace([0, -1], -2.0), HalfSpace([-1, 1], 1.0), HalfSpace([1, 0], 2.5), HalfSpace([-1, 0], 0.5)]
    res = mixed_lattice_free(P, B2, 1)
    assert res.status == geo.WITNESS
    assert res.witness[0] == 2.0 and 2.0 < res.witness[1] < 3.0


def test_strict_feasible_on_fiber():
    assert geo.strict_feasible_on_fiber(TRIANGLE, [0, 0]) is None
    P = [HalfSpace([0, 1], 1.0), HalfSpace([0, -1], 1.0)]
    y = geo.strict_feasible_on_fiber(P, [5])
    assert y is not None and -1 < y[0] < 1


def test_empty_and_whole_space_rows():
    assert mixed_lattice_free([HalfSpace([0, 0], 0.0)], B2, 2).lattice_free
    res = mixed_lattice_free([HalfSpace([0, 0], 1.0)], B2, 2)
    assert res.status == geo.WITNESS


def test_exact_mode_has_no_tolerance():
    third = Fraction(1, 3)
    P = OpenPolyhedron((geo.exact_halfspace([3], 3), geo.exact_halfspace([-3], -2)))
    assert mixed_lattice_free(P, B1, 1).lattice_free
    P = OpenPolyhedron((HalfSpace(np.array([Fraction(1)], dtype=object), Fraction(1) + third),
                        HalfSpace(np.array([Fraction(-1)], dtype=object), -third)))
    res = mixed_lattice_free(P, B1, 1)
    assert res.status == geo.WITNESS and res.witness[0] == 1


def test_doignon_keeps_small_selections():
    sel = doignon_select(TRIANGLE, B2, 2)
    assert sel.indices == [0, 1, 2] and not sel.exhaustive
    sel = doignon_select([HalfSpace([1], 0.9), HalfSpace([-1], -0.1), HalfSpace([1], 0.8)], B1, 1)
    assert len(sel.indices) <= 2
    assert mixed_lattice_free([[HalfSpace([1], 0.9), HalfSpace([-1], -0.1), HalfSpace([1], 0.8)][i]
                               for i in sel.indices], B1, 1).lattice_free


def test_exhaustive_fallback_is_exercised():
    hs = crafted_exhaustive_instance()
    sel = doignon_select(hs, B2, 1)
    assert sel.exhaustive
    assert sel.greedy_size > 2
    assert len(sel.indices) <= 2
    assert mixed_lattice_free([hs[i] for i in sel.indices], B2, 1).lattice_free


def test_doignon_rejects_non_lattice_free_input():
    with pytest.raises(NoValidSubset):
        doignon_select(TRIANGLE[:2], B2, 2)


def test_polyhedron_json_round_trip():
    P = OpenPolyhedron(tuple(TRIANGLE))
    Q = OpenPolyhedron.from_json(P.to_json())
    assert [h.offset for h in Q] == [h.offset for h in P]
    assert all(np.array_equal(a.normal, b.normal) for a, b in zip(P, Q))
