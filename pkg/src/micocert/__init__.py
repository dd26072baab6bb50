"""Certificates of optimality and exact duals for small mixed-integer convex programs."""

from .certificate import (CertificatePoint, KKTCertificate, Thm3Certificate, VerificationReport,
                          check_mixed_slater, check_slater, construct_certificate, verify,
                          verify_projection_property, verify_thm1, verify_thm2, verify_thm3)
from .dual import DualPair, dual_bound_from_polyhedron, dual_from_certificate, linear_dual_check, \
    verify_dual_pair
from .expr import Affine, Max, Quad, Scale, Sum, evaluate, subgradient
from .fiber import FiberResult, fiber_minimax, fiber_minimize
from .geometry import HalfSpace, OpenPolyhedron, doignon_select, mixed_lattice_free
from .oracle import brute_force_solve, enumerate_strict_points
from .problem import Box, Problem, Tolerances, load_problem

__version__ = "0.1.0"
