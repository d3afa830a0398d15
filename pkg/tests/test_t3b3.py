import math

import pytest
from numpy.testing import assert_allclose

from hitchin_bvp.mods import t3b3
from hitchin_bvp.utils.exterior import KVector, restrict_tangential
from hitchin_bvp.utils.polyforms import poly_wedge
from hitchin_bvp.utils.rng import generator
from hitchin_bvp.utils.sphere import RATIONAL_POINTS, random_sphere_points


@pytest.fixture(scope="module")
def report():
    return t3b3.check_example(count=32, seed=0, nx=32, nt=1)


def test_theta_alpha_at_the_north_pole():
    value = poly_wedge(t3b3.THETA, t3b3.ALPHA).evaluate((1, 0, 0))
    assert value == KVector.from_terms({"y1 y2 y3": 1, "y1 x2 x3": -1})


@pytest.mark.parametrize("point", RATIONAL_POINTS)
def test_psi_and_psi_tilde_restrict_through_theta(point):
    assert restrict_tangential(t3b3.PSI - poly_wedge(t3b3.THETA, t3b3.ALPHA), point).is_zero()
    # the displayed beta enters with the opposite sign
    assert restrict_tangential(t3b3.PSI_TILDE + poly_wedge(t3b3.THETA, t3b3.BETA), point).is_zero()


@pytest.mark.parametrize("point", RATIONAL_POINTS)
def test_chi_vanishes_on_the_boundary(point):
    assert restrict_tangential(t3b3.CHI, point).is_zero()


def test_gamma_theta_is_the_lambda_form_on_the_boundary():
    assert t3b3.lambda_form_identity_residual([tuple(p) for p in RATIONAL_POINTS]) == 0
    points = [tuple(x) for x in random_sphere_points(generator(0, "tests", "identity"), 100)]
    assert t3b3.lambda_form_identity_residual(points) <= 1e-12


def test_two_chi_lifts_gamma():
    lift, chi = t3b3.lift_identity_residual(RATIONAL_POINTS)
    assert lift == 0
    assert chi == 0


def test_boundary_relations(report):
    assert max(report["triple_residuals"].values()) <= 1e-10
    assert report["levi_lambda"] <= 1e-12
    assert report["psi_tilde_matches"]
    assert report["points"] == len(RATIONAL_POINTS) + 32


def test_gamma_is_in_the_harmonic_space(report):
    assert report["gamma_in_HM"]
    assert report["gamma_theta_identity"] == 0
    assert report["hm_residual"] <= 1e-10


def test_periods_are_nonzero(report):
    assert_allclose(report["period_T3"], 1.0, atol=1e-10)
    assert report["period_B3"] == pytest.approx(4 * math.pi / 3, rel=0.02)


def test_boundary_points_are_reproducible():
    assert t3b3.boundary_points(5, seed=3) == t3b3.boundary_points(5, seed=3)
    assert t3b3.boundary_points(5, seed=3) != t3b3.boundary_points(5, seed=4)


@pytest.mark.slow
def test_levi_coefficient_vanishes_on_many_points():
    body = t3b3.check_example(count=500, seed=1, nx=16, nt=1)
    assert body["levi_lambda"] <= 1e-12
