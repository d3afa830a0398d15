import numpy as np
import pytest
from numpy.testing import assert_allclose

from hitchin_bvp.mods.t3b3 import ALPHA, BETA, GAMMA, OMEGA, PSI, THETA, flat_analysis, flat_boundary_frame
from hitchin_bvp.utils.boundary import (boundary_decompose, boundary_frame, holomorphic_area_residual,
                                        hm_membership_residual, levi_form, project_partial4, sd_asd_split)
from hitchin_bvp.utils.errors import DegenerateContact, NotAntiSelfDual, NotPseudoconvexFrame
from hitchin_bvp.utils.exterior import KVector, pullback, wedge
from hitchin_bvp.utils.hitchin import analyze
from hitchin_bvp.utils.sphere import RATIONAL_POINTS, random_sphere_points

NORTH = (1, 0, 0)


@pytest.fixture(scope="module")
def frame():
    return flat_boundary_frame(NORTH)


def top(a, b):
    return float(wedge(a, b).top())


def test_contact_form_and_reeb_field(frame):
    assert_allclose(frame.theta, [0, 0, 0, 1, 0, 0], atol=1e-14)
    assert_allclose(frame.theta @ frame.reeb, 1.0)
    assert_allclose(frame.reeb, [0, 0, 0, 1, 0, 0], atol=1e-12)
    assert_allclose(frame.dr @ frame.H, 0.0, atol=1e-14)
    assert_allclose(frame.theta @ frame.H, 0.0, atol=1e-14)


def test_triple_relations_hold(frame):
    assert max(frame.residuals.values()) <= 1e-10
    assert_allclose(top(frame.alpha, frame.alpha), top(frame.beta, frame.beta), rtol=1e-12)
    assert abs(top(frame.alpha, frame.beta)) < 1e-12
    assert abs(top(frame.beta, frame.omega)) < 1e-12
    assert frame.levi_lambda == 0.0


def test_alpha_and_beta_against_the_closed_forms(frame):
    assert frame.restrict(ALPHA.evaluate(NORTH)).allclose(frame.alpha)
    # the Reeb contraction of P(psi) is the negative of the displayed beta
    assert frame.restrict(BETA.evaluate(NORTH)).allclose(-frame.beta)


def test_alpha_plus_i_beta_has_type_two_zero(frame):
    assert holomorphic_area_residual(frame) < 1e-12


def test_levi_form_is_definite(frame):
    _, eig, definite = levi_form(frame)
    assert definite
    assert frame.strongly_pseudoconvex
    assert_allclose(np.abs(eig), 1.0, rtol=1e-12)


def test_omega_tilde_is_normalised(frame):
    assert_allclose(top(frame.omega_tilde, frame.omega_tilde), top(frame.alpha, frame.alpha), rtol=1e-12)


def test_gamma_is_anti_self_dual(frame):
    split = sd_asd_split(frame, GAMMA.evaluate(NORTH))
    assert split.plus.norm() < 1e-12
    assert split.minus.allclose(frame.restrict(GAMMA.evaluate(NORTH)))


def test_projection_onto_omega_tilde_and_anti_self_dual():
    frame = flat_boundary_frame(RATIONAL_POINTS[1])
    point = frame.point
    gamma_H = frame.restrict(GAMMA.evaluate(point))
    assert project_partial4(frame, GAMMA.evaluate(point)).allclose(gamma_H)
    dr_theta = wedge(KVector.covector(frame.dr), KVector.covector(frame.theta))
    assert project_partial4(frame, dr_theta).norm() < 1e-12
    assert project_partial4(frame, frame.lift(frame.alpha)).norm() < 1e-12


def test_boundary_decomposition_reconstructs(frame, rng):
    sigma = KVector(2, rng.standard_normal(15))
    parts = boundary_decompose(frame, sigma)
    assert parts.reconstruct(frame).allclose(sigma, rtol=1e-10, atol=1e-12)


def test_perturbed_omega_shifts_the_levi_coefficient():
    analysis = flat_analysis()
    base = flat_boundary_frame(NORTH, analysis)
    omega = OMEGA.evaluate(NORTH).astype(float) + base.lift(base.beta) * 0.5
    frame = boundary_frame(analysis, base.dr, omega, point=NORTH + (0, 0, 0))
    assert_allclose(frame.levi_lambda, 0.5, rtol=1e-12)
    assert_allclose(top(frame.omega_tilde, frame.omega_tilde), top(frame.alpha, frame.alpha), rtol=1e-12)
    assert abs(top(frame.omega_tilde, frame.beta)) < 1e-12


def test_large_levi_coefficient_is_not_pseudoconvex():
    analysis = flat_analysis()
    base = flat_boundary_frame(NORTH, analysis)
    omega = OMEGA.evaluate(NORTH).astype(float) + base.lift(base.beta) * 1.5
    frame = boundary_frame(analysis, base.dr, omega, point=NORTH + (0, 0, 0))
    assert not frame.pseudoconvex
    with pytest.raises(NotPseudoconvexFrame):
        sd_asd_split(frame, GAMMA.evaluate(frame.point))


def test_zero_conormal_is_degenerate():
    with pytest.raises(DegenerateContact):
        boundary_frame(flat_analysis(), np.zeros(6), OMEGA.evaluate(NORTH))


def test_gamma_lies_in_the_harmonic_space():
    frames = [flat_boundary_frame(p) for p in RATIONAL_POINTS]
    assert hm_membership_residual(frames, GAMMA, THETA) == 0


def test_self_dual_forms_are_rejected():
    frames = [flat_boundary_frame(p) for p in RATIONAL_POINTS[:2]]
    with pytest.raises(NotAntiSelfDual):
        hm_membership_residual(frames, OMEGA, THETA)


def test_a_non_constant_multiple_of_gamma_is_not_closed():
    frames = [flat_boundary_frame(p) for p in RATIONAL_POINTS]
    assert hm_membership_residual(frames, GAMMA * "x1", THETA) > 0.1


@pytest.fixture(params=[0.0, 0.3], ids=["flat", "moved"])
def random_frames(request, rng):
    """Frames at random sphere points, for the flat structure pulled back by a random matrix."""
    psi = PSI.evaluate((0,) * 6).astype(float)
    frames = []
    for x in random_sphere_points(rng, 5):
        g = np.eye(6) + request.param * rng.standard_normal((6, 6))
        dr = np.concatenate([x, np.zeros(3)])
        omega = pullback(OMEGA.evaluate(tuple(x) + (0.0, 0.0, 0.0)), g)
        frames.append(boundary_frame(analyze(pullback(psi, g)), g.T @ dr, omega))
    return frames


def test_decomposition_round_trips_at_random_conormals(random_frames, rng):
    for frame in random_frames:
        assert max(frame.residuals.values()) <= 1e-9
        sigma = KVector(2, rng.standard_normal(15))
        assert boundary_decompose(frame, sigma).reconstruct(frame).allclose(sigma, rtol=1e-9, atol=1e-10)


def test_projections_are_idempotent(random_frames, rng):
    for frame in random_frames:
        sigma = KVector(2, rng.standard_normal(15))
        once = project_partial4(frame, sigma)
        assert project_partial4(frame, once).allclose(once, rtol=1e-9, atol=1e-10)
        split = sd_asd_split(frame, sigma)
        again = sd_asd_split(frame, split.plus)
        assert again.plus.allclose(split.plus, rtol=1e-9, atol=1e-10)
        assert again.minus.norm() <= 1e-9 * sigma.norm()
        assert sd_asd_split(frame, split.minus).plus.norm() <= 1e-9 * sigma.norm()
