import numpy as np
import pytest

from micocert import Affine, Box, Max, Problem, Quad, Sum, oracle
from micocert.errors import ModelError, NoFeasiblePoint
from micocert.geometry import HalfSpace

from instances import example_problem


def test_example_optimum():
    res = oracle.brute_force_solve(example_problem())
    assert res.value == pytest.approx(1.0)
    assert res.argmin.tolist() == [0.0, 0.0]
    assert len(res.fibers) == 49


def test_unconstrained_integer_optimum():
    p = Problem(2, 0, Quad(np.eye(2), [-1, -1], 1), [], Box([-3, -3], [3, 3]))
    res = oracle.brute_force_solve(p)
    assert res.value == pytest.approx(0.0) and res.argmin.tolist() == [1.0, 1.0]


def test_mixed_fiber_with_quadratic_objective():
    # f = 1/2 z^2 + 1/2 (y - 0.7)^2, y <= 0.4  ->  y = 0.4, value 0.045
    # feasibility is accepted up to tau_feas, so the value may undershoot by ~3e-8
    f = Quad(np.eye(2), [0.0, -0.7], 0.245)
    p = Problem(1, 1, f, [Affine([0.0, 1.0], -0.4)], Box([-1, -2], [1, 2]))
    res = oracle.brute_force_solve(p)
    assert res.value == pytest.approx(0.045, abs=1e-6)
    assert res.argmin == pytest.approx([0.0, 0.4], abs=1e-6)


def test_curved_constraint_in_two_continuous_dimensions():
    # min y1 + y2 on the unit disc: -sqrt(2)
    f = Affine([0.0, 1.0, 1.0], 0.0)
    g = Quad(np.diag([0.0, 2.0, 2.0]), [0.0, 0.0, 0.0], -1.0)
    p = Problem(1, 2, f, [g], Box([0, -2, -2], [0, 2, 2]))
    res = oracle.brute_force_solve(p)
    assert res.value == pytest.approx(-np.sqrt(2.0), abs=1e-6)


def test_nonsmooth_objective():
    f = Sum((Max((Affine([0.0, 1.0], -0.3), Affine([0.0, -1.0], 0.3))), Affine([0.5, 0.0], 0.0)))
    p = Problem(1, 1, f, [], Box([0, -1], [2, 1]))
    res = oracle.brute_force_solve(p)
    assert res.value == pytest.approx(0.0, abs=1e-9)
    assert res.argmin == pytest.approx([0.0, 0.3], abs=1e-7)


def test_infeasible_and_guard():
    p = Problem(1, 0, Affine([1.0], 0.0), [Affine([0.0], 1.0)], Box([0], [2]))
    with pytest.raises(NoFeasiblePoint):
        oracle.brute_force_solve(p)
    big = Problem(1, 4, Affine([0.0] * 5, 0.0), [], Box([0] * 5, [1] * 5))
    with pytest.raises(ModelError):
        oracle.brute_force_solve(big)


def test_enumerate_strict_points():
    box = Box([-3, -3], [3, 3])
    tri = [HalfSpace([-1, -1], 0), HalfSpace([1, 0], 1), HalfSpace([0, 1], 1)]
    assert oracle.enumerate_strict_points(tri, box, 2) == []
    pts = oracle.enumerate_strict_points([HalfSpace([-1, -1], 0), HalfSpace([1, 0], 1.5),
                                          HalfSpace([0, 1], 1.5)], box, 2)
    assert sorted(p.tolist() for p in pts) == [[0.0, 1.0], [1.0, 0.0], [1.0, 1.0]]


def test_enumerate_mixed_points():
    box = Box([-2, -2], [2, 2])
    P = [HalfSpace([0, -1], -2.0), HalfSpace([-1, 1], 1.0), HalfSpace([1, 0], 2.5),
         HalfSpace([-1, 0], 0.5)]
    pts = oracle.enumerate_strict_points(P, box, 1)
    assert [p[0] for p in pts] == [2.0]
    assert 2.0 < pts[0][1] < 3.0
