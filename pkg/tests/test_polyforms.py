from fractions import Fraction

import pytest

from hitchin_bvp.mods.t3b3 import LAMBDA_FORM, OMEGA, THETA
from hitchin_bvp.utils.errors import GradeError
from hitchin_bvp.utils.exterior import KVector
from hitchin_bvp.utils.polyforms import PolyForm, poly_d, poly_wedge, random_polyform


def test_d_of_the_contact_form_is_the_symplectic_form():
    expected = PolyForm.from_terms({"dx1 dy1": 1, "dx2 dy2": 1, "dx3 dy3": 1})
    assert poly_d(THETA) == expected
    assert OMEGA == expected


@pytest.mark.parametrize("grade", [0, 1, 2, 3, 4])
def test_d_squares_to_zero(rng, grade):
    a = random_polyform(rng, grade, 4)
    assert poly_d(poly_d(a)).is_zero()


def test_leibniz_rule(rng):
    a = random_polyform(rng, 1, 3)
    b = random_polyform(rng, 2, 3)
    lhs = poly_d(poly_wedge(a, b))
    rhs = poly_wedge(poly_d(a), b) - poly_wedge(a, poly_d(b))
    assert lhs == rhs


def test_lambda_form_is_closed():
    assert poly_d(LAMBDA_FORM).is_zero()


def test_exact_evaluation_at_rational_points():
    value = THETA.evaluate((Fraction(3, 5), Fraction(4, 5), 0))
    assert value.exact
    assert value == KVector.from_terms({"y1": Fraction(3, 5), "y2": Fraction(4, 5)})


def test_float_evaluation_agrees_with_exact(rng):
    a = random_polyform(rng, 2, 3)
    exact = a.evaluate((Fraction(1, 2), Fraction(-1, 3), 2, 0, Fraction(1, 4), 1))
    approx = a.evaluate((0.5, -1.0 / 3.0, 2.0, 0.0, 0.25, 1.0))
    assert approx.allclose(exact.astype(float))


def test_polynomial_multiplication():
    assert (THETA * "x1").evaluate((2, 0, 0)) == KVector.from_terms({"y1": 4})


def test_adding_mixed_grades_fails():
    with pytest.raises(GradeError):
        THETA + OMEGA
