from fractions import Fraction

import numpy as np
import pytest
from numpy.testing import assert_allclose

from hitchin_bvp.mods import selftest
from hitchin_bvp.mods.analyze import analyze_form
from hitchin_bvp.mods.t3b3 import CHI, LAMBDA_FORM, PSI, PSI_TILDE
from hitchin_bvp.utils.errors import NotStable, TorsionTypeError
from hitchin_bvp.utils.exterior import KVector, pullback, wedge
from hitchin_bvp.utils.hitchin import (analyze, batched_analysis, compatible_omega, hitchin_invariant, j_operator,
                                       nijenhuis_from_torsion, two_form_split, type_project)

ORIGIN = (0,) * 6
STEPS = (1e-2, 1e-3, 1e-4)


@pytest.fixture
def flat():
    return analyze(PSI.evaluate(ORIGIN))


def test_flat_form_is_stable_in_exact_arithmetic(flat):
    assert flat.exact
    assert flat.hitchin_lambda == -4
    assert flat.vol_density == 2


def test_flat_k_maps_x1_to_twice_y1(flat):
    assert list(flat.K[:, 0]) == [0, 0, 0, 2, 0, 0]


def test_flat_complex_structure_squares_to_minus_one(flat):
    assert np.all(flat.I.dot(flat.I) == -np.eye(6, dtype=np.int64))


def test_flat_dual_form_is_psi_tilde(flat):
    assert flat.P == PSI_TILDE.evaluate(ORIGIN)


def test_lambda_is_quartic_and_p_is_linear(flat):
    scaled = analyze(flat.psi * 2)
    assert scaled.exact
    assert scaled.hitchin_lambda == 16 * flat.hitchin_lambda
    assert scaled.P == flat.P * 2


def test_j_fixes_the_homogeneous_direction(flat):
    assert j_operator(flat, flat.psi) == flat.P
    assert j_operator(flat, flat.P) == -flat.psi


def test_j_of_chi_is_half_the_lambda_form(flat):
    assert j_operator(flat, CHI.evaluate(ORIGIN)) == LAMBDA_FORM.evaluate(ORIGIN) * Fraction(1, 2)


def test_decomposable_form_is_not_stable():
    chi = CHI.evaluate(ORIGIN)
    lam, _ = hitchin_invariant(chi)
    assert lam == 0
    with pytest.raises(NotStable):
        analyze(chi)


def test_unstable_form_is_reported_not_raised():
    body = analyze_form(CHI.evaluate(ORIGIN))
    assert body["stable"] is False
    assert body["vol_density"] == 0
    assert body["P_coeffs"] is None


def test_random_stable_forms(stable_form):
    a = analyze(stable_form)
    I = np.asarray(a.I, dtype=float)
    assert_allclose(I @ I, -np.eye(6), atol=1e-10)
    assert a.hitchin_lambda < 0
    assert analyze(a.P).P.allclose(-stable_form, rtol=1e-8, atol=1e-10)


def test_volume_density_scales_quadratically(stable_form):
    a = analyze(stable_form)
    b = analyze(stable_form * 3.0)
    assert_allclose(b.vol_density, 9.0 * a.vol_density, rtol=1e-12)


def test_gl_equivariance(orientation_preserving):
    psi = PSI.evaluate(ORIGIN).astype(float)
    for _ in range(5):
        g = orientation_preserving()
        moved = analyze(pullback(psi, g))
        assert moved.P.allclose(pullback(PSI_TILDE.evaluate(ORIGIN).astype(float), g), rtol=1e-8, atol=1e-10)


@pytest.fixture
def direction(rng):
    return KVector(3, rng.standard_normal(20))


def convergence_orders(errors):
    return np.log10(np.array(errors[:-1]) / np.array(errors[1:]))


def test_central_difference_of_p_converges_to_j(stable_form, direction):
    exact = j_operator(analyze(stable_form), direction)
    errors = []
    for h in STEPS:
        plus, minus = analyze(stable_form + direction * h), analyze(stable_form - direction * h)
        errors.append(((plus.P - minus.P) * (0.5 / h) - exact).norm())
    assert_allclose(convergence_orders(errors), 2.0, atol=0.1)


def test_volume_first_variation_is_p_wedge_rho(stable_form, direction):
    a = analyze(stable_form)
    exact = wedge(a.P, direction).top()
    errors = []
    for h in STEPS:
        plus, minus = analyze(stable_form + direction * h), analyze(stable_form - direction * h)
        errors.append(abs((plus.vol_density - minus.vol_density) / (2.0 * h) - exact))
    assert_allclose(convergence_orders(errors), 2.0, atol=0.1)
    assert_allclose(wedge(a.P, stable_form).top(), 2.0 * a.vol_density, rtol=1e-10)


def test_batched_analysis_of_a_thousand_stable_forms(rng):
    coeffs = np.stack([selftest.random_stable_form(rng).coeffs for _ in range(1000)])
    data = batched_analysis(coeffs)
    assert data["stable"].all()
    I = data["I"]
    assert_allclose(I @ I, np.broadcast_to(-np.eye(6), I.shape), atol=1e-7)
    dual = batched_analysis(data["P"])
    assert dual["stable"].all()
    assert_allclose(dual["P"], -coeffs, atol=1e-7)
    assert_allclose(batched_analysis(3.0 * coeffs)["vol"], 9.0 * data["vol"], rtol=1e-10)
    single = analyze(KVector(3, coeffs[0]))
    assert_allclose(data["P"][0], single.P.coeffs, atol=1e-10)
    assert_allclose(data["vol"][0], single.vol_density, rtol=1e-10)


def test_batched_gl_equivariance(orientation_preserving):
    psi = PSI.evaluate(ORIGIN).astype(float)
    dual = PSI_TILDE.evaluate(ORIGIN).astype(float)
    gs = [orientation_preserving() for _ in range(200)]
    moved = batched_analysis(np.stack([pullback(psi, g).coeffs for g in gs]))
    assert moved["stable"].all()
    assert_allclose(moved["P"], np.stack([pullback(dual, g).coeffs for g in gs]), rtol=1e-8, atol=1e-8)
    assert_allclose(moved["vol"], [2.0 * np.linalg.det(g) for g in gs], rtol=1e-8)


def test_type_components_of_psi(stable_form):
    a = analyze(stable_form)
    parts = type_project(a, stable_form)
    assert parts[(2, 1)].norm() < 1e-10 * stable_form.norm()
    assert parts[(1, 2)].norm() < 1e-10 * stable_form.norm()
    assert (parts[(3, 0)] + parts[(0, 3)]).allclose(KVector(3, stable_form.coeffs.astype(complex)))
    assert parts.total().allclose(KVector(3, stable_form.coeffs.astype(complex)))


def test_two_form_split_reconstructs(flat, rng):
    omega = compatible_omega(flat)
    sigma = KVector(2, rng.standard_normal(15))
    split = two_form_split(flat, omega, sigma)
    assert split.reconstruct(flat, omega).allclose(sigma, rtol=1e-9, atol=1e-10)
    assert abs(wedge(split.part8, wedge(omega, omega)).top()) < 1e-10


def test_torsion_free_point_has_zero_nijenhuis(flat):
    n = nijenhuis_from_torsion(flat, KVector.zeros(4))
    assert n.is_zero()
    assert_allclose(n.classical(), 0.0)


def test_nijenhuis_solves_the_torsion_relation(flat, rng):
    dP = type_project(flat, KVector(4, rng.standard_normal(15)))[(2, 2)].real
    n = nijenhuis_from_torsion(flat, dP)
    assert n.relation_residual() < 1e-10


def test_torsion_of_the_wrong_type_is_rejected(flat, rng):
    with pytest.raises(TorsionTypeError):
        nijenhuis_from_torsion(flat, KVector(4, rng.standard_normal(15)))
