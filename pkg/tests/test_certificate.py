import json

import numpy as np
import pytest

from micocert import Affine, Box, Problem, Quad
from micocert import certificate as C
from micocert.certificate import (BoundaryPoint, CertificatePoint, KKTCertificate, ObjectivePoint,
                                  Thm3Certificate)
from micocert.errors import ModelError, NoFeasibleFiber, SlaterViolated

from instances import (example_boundary_certificate, example_certificate, example_problem,
                       random_problem)

P = CertificatePoint


def test_hand_certificate_is_valid():
    rep = C.verify_thm2(example_problem(), example_certificate())
    assert rep.verdict == C.VALID
    for label in ["(a)", "(b)", "(c)", "(d)", "(e)"]:
        assert any(c.label == label for c in rep.checks)


def test_zeroed_multiplier_fails_support_condition():
    cert = example_certificate()
    cert.points[1] = P([1, 0], [0, 0, 0], [[1, 0], [0, 1], [0, -1]])
    rep = C.verify_thm2(example_problem(), cert)
    assert rep.verdict == C.INVALID
    assert "(c)" in rep.failed_labels()


def test_missing_point_leaves_a_lattice_witness():
    cert = example_certificate()
    cert.points = cert.points[:2]
    rep = C.verify_thm2(example_problem(), cert)
    assert rep.failed_labels() == ["(d)"]
    assert rep.witness == {"condition": "(d)", "point": [0.0, 1.0]}


def test_wrong_subgradient_is_caught():
    cert = example_certificate()
    cert.points[0] = P([0, 0], [0, 0, 1], [[1, 0], [0, 1], [-1, -2]])
    rep = C.verify_thm2(example_problem(), cert)
    assert "subgradient" in rep.failed_labels()


def test_non_integral_point_is_caught():
    cert = example_certificate()
    cert.points[1] = P([0.5, 0], [1, 0, 0], [[1, 0], [0, 1], [-0.5, -1]])
    rep = C.verify_thm2(example_problem(), cert)
    assert "integrality" in rep.failed_labels()


def test_ordering_condition_for_feasible_points():
    p = example_problem()
    cert = example_certificate()
    # a feasible point with a lower objective than x1 breaks (a)
    better = P([0, 0], [0, 0, 1], [[1, 0], [0, 1], [-1, -1]])
    worse = P([-1, 0], [0, 0, 1], [[1, 0], [0, 1], [-2, -1]])
    cert = KKTCertificate([worse, better] + cert.points[1:])
    rep = C.verify_thm2(p, cert)
    assert "(a)" in rep.failed_labels()


def test_certificate_json_round_trip(tmp_path):
    cert = example_certificate()
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cert.to_json()))
    back = C.load_certificate(path)
    assert C.verify(example_problem(), back).valid
    with pytest.raises(ModelError):
        C.certificate_from_json({"points": [{"x": [0, 0]}]})


def test_construct_reproduces_the_hand_certificate():
    cert, rep = C.construct_certificate(example_problem())
    assert rep.valid
    assert [pt.x.tolist() for pt in cert.points] == [[0, 0], [0, 1], [1, 0]]
    assert cert.claimed_value == pytest.approx(1.0)


def test_integral_unconstrained_optimum_needs_one_point():
    p = Problem(2, 0, Quad(np.eye(2), [-1, -1], 1), [], Box([-3, -3], [4, 4]))
    cert, rep = C.construct_certificate(p)
    assert rep.valid and cert.k == 1
    assert cert.x_star.tolist() == [1.0, 1.0]


def test_unconstrained_certificate_satisfies_both_forms():
    p = Problem(2, 0, Quad(np.eye(2), [-0.5, -0.5], 0.25), [], Box([-3, -3], [4, 4]))
    cert, rep = C.construct_certificate(p)
    assert rep.valid and cert.k == 4
    assert sorted(pt.x.tolist() for pt in cert.points) == [[0, 0], [0, 1], [1, 0], [1, 1]]
    cert.theorem = "1"
    assert C.verify_thm1(p, cert).valid


def test_thm1_one_dimensional():
    p = Problem(1, 0, Quad(np.eye(1), [-0.5], 0.125), [], Box([-3], [3]))
    both = KKTCertificate([P([0], [1], [[-0.5]]), P([1], [1], [[0.5]])], "1")
    assert C.verify_thm1(p, both).valid
    one = KKTCertificate([P([0], [1], [[-0.5]])], "1")
    rep = C.verify_thm1(p, one)
    assert rep.verdict == C.INVALID and rep.witness["point"] == [1.0]
    flat = Problem(1, 0, Quad(np.eye(1), [0.0], 0.0), [], Box([-3], [3]))
    assert C.verify_thm1(flat, KKTCertificate([P([0], [1], [[0.0]])], "1")).valid


def test_mixed_certificate_zeroes_the_continuous_block():
    p = random_problem(7)
    cert, rep = C.construct_certificate(p)
    assert rep.valid
    for pt in cert.points:
        assert np.max(np.abs(pt.normal[p.n:])) <= p.tol.tau_stat


def test_slater_violation_is_reported():
    g = Quad(np.diag([0.0, 2.0]), [0.0, 0.0], 0.0)  # y^2 <= 0 on every fiber
    p = Problem(1, 1, Quad(np.eye(2), [0.0, 0.0]), [g], Box([0, -1], [1, 1]))
    rep = C.check_mixed_slater(p)
    assert not rep.holds and rep.violating == [(0,), (1,)]
    with pytest.raises(SlaterViolated):
        C.construct_certificate(p)


def test_mixed_slater_holds_and_fails():
    p = Problem(1, 1, Affine([0, 0], 0), [Quad(np.diag([0, 2.0]), [0, 0], -1)], Box([-2, -2], [2, 2]))
    assert C.check_mixed_slater(p).holds
    q = Problem(1, 0, Affine([0], 0), [Affine([1], 0)], Box([-2], [0]))
    rep = C.check_mixed_slater(q)
    assert not rep.holds and rep.violating == [(0,)]


def test_infeasible_problem_has_no_certificate():
    p = Problem(1, 0, Affine([1.0], 0.0), [Affine([0.0], 1.0)], Box([0], [2]))
    with pytest.raises(NoFeasibleFiber):
        C.construct_certificate(p)


def test_thm3_hand_certificates():
    p = example_problem()
    assert C.verify_thm3(p, example_boundary_certificate()).valid
    rep = C.verify_thm3(p, example_boundary_certificate((0.2, 0.0)))
    assert rep.verdict == C.INVALID and "(c)" in rep.failed_labels()


def test_thm3_degenerate_single_point():
    p = Problem(2, 0, Quad(np.eye(2), [-1, -1], 1), [Affine([1, 0], -3)], Box([-3, -3], [3, 3]))
    cert = Thm3Certificate([ObjectivePoint([1, 1], [0, 0])], [])
    assert C.verify_thm3(p, cert).valid


def test_thm3_size_bound():
    p = example_problem()
    pts = [ObjectivePoint([0, 0], [-1, -1])] * 5
    rep = C.verify_thm3(p, Thm3Certificate(pts, []))
    assert "size" in rep.failed_labels()


def test_projection_property():
    p = example_problem()
    y = np.array([1.0, 1.0])
    q = p.with_objective(C.projection_objective(y))
    cert, rep = C.construct_certificate(q)
    assert rep.valid
    out = C.verify_projection_property(p, y, cert)
    assert out.holds and out.counterexamples == []


def test_report_json_is_serialisable():
    rep = C.verify_thm2(example_problem(), example_certificate())
    text = json.dumps(rep.to_json(), sort_keys=True)
    assert json.loads(text)["verdict"] == C.VALID
