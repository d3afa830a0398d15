from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hitchin_bvp.mods.t3b3 import DR, PSI
from hitchin_bvp.utils.errors import GradeError, InvalidMetric, NotOnSphere
from hitchin_bvp.utils.exterior import (KVector, Metric6, evaluate, hodge_star, interior, pullback,
                                        restrict_tangential, wedge)

from .conftest import FLAT_LITERAL


def random_form(rng, grade):
    return KVector(grade, rng.standard_normal(len(KVector.zeros(grade).coeffs)))


def test_wedge_of_one_forms_is_antisymmetric():
    a = KVector.from_terms({"x1": 1})
    b = KVector.from_terms({"y2": 1})
    assert wedge(a, b) == -wedge(b, a)
    assert wedge(a, a).is_zero()


@pytest.mark.parametrize("k,l", [(1, 2), (2, 2), (1, 3), (2, 3)])
def test_wedge_is_graded_commutative(rng, k, l):
    a, b = random_form(rng, k), random_form(rng, l)
    assert_allclose(wedge(a, b).coeffs, (-1) ** (k * l) * wedge(b, a).coeffs, atol=1e-12)


def test_wedge_is_associative(rng):
    a, b, c = random_form(rng, 1), random_form(rng, 2), random_form(rng, 2)
    assert_allclose(wedge(wedge(a, b), c).coeffs, wedge(a, wedge(b, c)).coeffs, atol=1e-12)


def test_out_of_order_keys_pick_up_the_permutation_sign():
    assert KVector.from_terms({"y1 x2 x3": 1}) == KVector.from_json({"grade": 3, "coeffs": {"2 3 4": 1}})
    assert KVector.from_terms({"y2 x3 x1": 1}) == KVector.from_json({"grade": 3, "coeffs": {"1 3 5": -1}})


def test_flat_literal_matches_the_symbolic_form():
    psi = KVector.from_json(FLAT_LITERAL)
    assert psi.exact
    assert psi == PSI.evaluate((0,) * 6)


def test_fraction_strings_stay_exact():
    form = KVector.from_json({"grade": 2, "coeffs": {"1 4": "1/3"}})
    assert form.exact
    assert form.coeffs[2] == Fraction(1, 3)
    assert form.to_json() == {"grade": 2, "coeffs": {"1 4": "1/3"}}


def test_from_json_rejects_unsorted_keys():
    with pytest.raises(GradeError):
        KVector.from_json({"grade": 2, "coeffs": {"2 1": 1}})


def test_wrong_coefficient_count_is_a_grade_error():
    with pytest.raises(GradeError):
        KVector(3, np.zeros(5))


def test_wedge_past_the_top_degree(rng):
    a = random_form(rng, 4)
    b = random_form(rng, 3)
    with pytest.raises(GradeError):
        wedge(a, b)
    empty = wedge(a, b, allow_overflow=True)
    assert empty.grade == 7
    assert empty.coeffs.shape == (0,)
    assert empty.is_zero()


def test_literal_grade_must_fit_the_space():
    with pytest.raises(GradeError):
        KVector.from_json({"grade": 7, "coeffs": {}})


def test_exact_pullback_uses_rational_minors():
    psi = PSI.evaluate((0,) * 6)
    g = np.array([[Fraction(1 if i == j else 0) + (Fraction(1, 3) if (i, j) == (0, 4) else 0)
                   for j in range(6)] for i in range(6)], dtype=object)
    moved = pullback(psi, g)
    assert moved.exact
    # dx1 pulls back to dx1 + dy2 / 3
    assert moved == psi + KVector.from_terms({"x2 y2 y3": Fraction(1, 3)})


def test_interior_twice_vanishes(rng):
    v = rng.standard_normal(6)
    a = random_form(rng, 3)
    assert interior(v, interior(v, a)).norm() < 1e-12


def test_interior_is_an_antiderivation(rng):
    v = rng.standard_normal(6)
    a, b = random_form(rng, 1), random_form(rng, 2)
    lhs = interior(v, wedge(a, b))
    rhs = wedge(interior(v, a), b) - wedge(a, interior(v, b))
    assert_allclose(lhs.coeffs, rhs.coeffs, atol=1e-12)


@pytest.mark.parametrize("k", range(7))
def test_hodge_star_squares_to_the_riemannian_sign(rng, k):
    A = rng.standard_normal((6, 6))
    for m in (Metric6(), Metric6(A @ A.T + np.eye(6))):
        a = random_form(rng, k)
        twice = hodge_star(m, hodge_star(m, a))
        assert_allclose(twice.coeffs, (-1) ** (k * (6 - k)) * a.coeffs, rtol=1e-9, atol=1e-10)


def test_hodge_star_pairs_with_the_metric_volume(rng):
    m = Metric6()
    a, b = random_form(rng, 2), random_form(rng, 2)
    assert_allclose(wedge(b, hodge_star(m, a)).top(), m.inner(b, a) * m.volume.top(), atol=1e-12)


def test_metric_must_be_positive_definite():
    with pytest.raises(InvalidMetric):
        Metric6(-np.eye(6))


def test_pullback_along_identity_is_the_identity(rng):
    a = random_form(rng, 3)
    assert pullback(a, np.eye(6)).allclose(a)


def test_evaluate_on_basis_vectors_reads_a_coefficient():
    psi = PSI.evaluate((0,) * 6)
    assert evaluate(psi, np.eye(6)[:, [3, 4, 5]]) == 1
    assert evaluate(psi, np.eye(6)[:, [1, 2, 3]]) == -1


def test_conormal_restricts_to_zero_exactly():
    for p in [(1, 0, 0), (Fraction(3, 5), Fraction(4, 5), 0), (Fraction(2, 7), Fraction(3, 7), Fraction(6, 7))]:
        restricted = restrict_tangential(DR, p)
        assert restricted.exact
        assert restricted.is_zero()


def test_restriction_off_the_sphere_is_rejected():
    with pytest.raises(NotOnSphere):
        restrict_tangential(DR, (1, 1, 0))
