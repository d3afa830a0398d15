#!/usr/bin/env python3
"""The flat domain B^3 x T^3 in C^3 / iZ^3 with holomorphic volume i dz1 dz2 dz3.

Builds the closed-form boundary data on M = S^2 x T^3 and checks the
boundary relations, the anti-self-dual class gamma and the two periods that
make the boundary and relative period maps injective.
"""

from pathlib import Path

import numpy as np

from ..utils.boundary import boundary_frame, hm_membership_residual
from ..utils.exterior import restrict_tangential
from ..utils.fields import Cycle, FormField, GridBallT3, integrate_cycle
from ..utils.hitchin import analyze, j_operator
from ..utils.logging import Log
from ..utils.polyforms import PolyForm, poly_d, poly_wedge
from ..utils.reporting import build_report, save_json_report
from ..utils.rng import generator
from ..utils.sphere import RATIONAL_POINTS, random_sphere_points

TOLERANCE = 1e-10

PSI = PolyForm.from_terms({"dy1 dy2 dy3": 1, "dy1 dx2 dx3": -1, "dy2 dx3 dx1": -1, "dy3 dx1 dx2": -1})
PSI_TILDE = PolyForm.from_terms({"dx1 dx2 dx3": 1, "dx1 dy2 dy3": -1, "dx2 dy3 dy1": -1, "dx3 dy1 dy2": -1})
THETA = PolyForm.from_terms({"dy1": "x1", "dy2": "x2", "dy3": "x3"})
DR = PolyForm.from_terms({"dx1": "x1", "dx2": "x2", "dx3": "x3"})
OMEGA = poly_d(THETA)
ALPHA = PolyForm.from_terms({
    "dy2 dy3": "x1", "dx2 dx3": "-x1",
    "dy3 dy1": "x2", "dx3 dx1": "-x2",
    "dy1 dy2": "x3", "dx1 dx2": "-x3",
})
BETA = PolyForm.from_terms({
    "dx2 dy3": "x1", "dx3 dy2": "-x1",
    "dx3 dy1": "x2", "dx1 dy3": "-x2",
    "dx1 dy2": "x3", "dx2 dy1": "-x3",
})
GAMMA = PolyForm.from_terms({
    "dx2 dx3": "x1", "dy2 dy3": "x1",
    "dx3 dx1": "x2", "dy3 dy1": "x2",
    "dx1 dx2": "x3", "dy1 dy2": "x3",
})
LAMBDA_FORM = PolyForm.from_terms({"dy1 dy2 dy3": 1, "dy1 dx2 dx3": 1, "dy2 dx3 dx1": 1, "dy3 dx1 dx2": 1})
CHI = PolyForm.from_terms({"dx1 dx2 dx3": 1})


def flat_analysis():
    """Exact stable analysis of the constant form psi."""
    return analyze(PSI.evaluate((0,) * 6))


def flat_boundary_frame(point, analysis=None):
    """Boundary frame of the flat structure at a point of S^2 x T^3 (x part on the unit sphere)."""
    analysis = flat_analysis() if analysis is None else analysis
    point = tuple(point) + (0,) * (6 - len(point))
    dr = np.array([float(c) for c in point[:3]] + [0.0, 0.0, 0.0])
    return boundary_frame(analysis, dr, OMEGA.evaluate(point), point=point)


def boundary_points(count, seed):
    """The rational sphere points plus `count` random float points (torus coordinates zero)."""
    points = [tuple(p) + (0, 0, 0) for p in RATIONAL_POINTS]
    rng = generator(seed, "t3b3", "points")
    for x in random_sphere_points(rng, count):
        points.append(tuple(float(c) for c in x) + (0.0, 0.0, 0.0))
    return points


def lambda_form_identity_residual(points):
    """max |restrict(gamma ^ theta - lambda-form)| over the points."""
    diff = poly_wedge(GAMMA, THETA) - LAMBDA_FORM
    return max(max(abs(float(c)) for c in restrict_tangential(diff, p).coeffs) for p in points)


def lift_identity_residual(points, analysis=None):
    """max |restrict(2 J(chi) - gamma ^ theta)| and max |restrict(chi)|: 2 chi lifts gamma."""
    analysis = flat_analysis() if analysis is None else analysis
    two_j_chi = PolyForm.constant(j_operator(analysis, CHI.evaluate((0,) * 6)) * 2)
    diff = two_j_chi - poly_wedge(GAMMA, THETA)
    lift = max(max(abs(float(c)) for c in restrict_tangential(diff, p).coeffs) for p in points)
    chi = max(max(abs(float(c)) for c in restrict_tangential(CHI, p).coeffs) for p in points)
    return lift, chi


def periods(nx, nt):
    """Integral of the lambda-form over a torus fiber and of chi over the ball slice."""
    grid = GridBallT3(nx, nt)
    lam = FormField.constant(grid, LAMBDA_FORM.evaluate((0,) * 6).astype(float))
    chi = FormField.constant(grid, CHI.evaluate((0,) * 6).astype(float))
    period_t3 = integrate_cycle(lam, Cycle.torus_fiber((3, 4, 5), grid.center_index()))
    period_b3 = integrate_cycle(chi, Cycle.ball_slice())
    return period_t3, period_b3


def check_example(count=64, seed=0, nx=32, nt=1):
    analysis = flat_analysis()
    points = boundary_points(count, seed)
    frames = [flat_boundary_frame(p, analysis) for p in points]
    exact_frames = frames[:len(RATIONAL_POINTS)]

    residuals = {}
    for frame in frames:
        for key, value in frame.residuals.items():
            residuals[key] = max(residuals.get(key, 0.0), float(value))
    levi = max(abs(frame.levi_lambda) for frame in frames)

    hm_exact = hm_membership_residual(exact_frames, GAMMA, THETA)
    hm_float = hm_membership_residual(frames, GAMMA, THETA)
    identity = lambda_form_identity_residual(points[:len(RATIONAL_POINTS)])
    lift, chi_restriction = lift_identity_residual(points[:len(RATIONAL_POINTS)], analysis)
    period_t3, period_b3 = periods(nx, nt)

    return {
        "triple_residuals": residuals,
        "levi_lambda": levi,
        "gamma_in_HM": hm_exact == 0 and hm_float <= TOLERANCE and identity == 0,
        "hm_residual": hm_float,
        "gamma_theta_identity": identity,
        "lift_residual": lift,
        "chi_restriction": chi_restriction,
        "period_T3": period_t3,
        "period_B3": period_b3,
        "points": len(points),
        "psi_tilde_matches": analysis.P == PSI_TILDE.evaluate((0,) * 6),
    }


def run(args):
    config = args.config
    Log.header("B3 x T3 boundary example")
    body = check_example(args.points, config.seed, args.nx, args.nt)
    worst = max(body["triple_residuals"].values())
    if worst > TOLERANCE:
        Log.warn("Boundary relations above tolerance", worst=worst)
    if body["gamma_in_HM"]:
        Log.success("gamma lies in H_M", period_T3=body["period_T3"], period_B3=body["period_B3"])
    else:
        Log.warn("gamma failed the H_M check", residual=body["hm_residual"])

    report = build_report(config, body)
    out = Path(args.out or config.report_json or Path(config.out_dir) / "example-t3b3.json")
    save_json_report(out, report)
    return report
