#!/usr/bin/env python3
"""Fast invariant checks across the algebra, boundary, field, spectral and solver layers."""

from fractions import Fraction
from pathlib import Path

import numpy as np

from ..utils.boundary import hm_membership_residual
from ..utils.errors import NumericalFailure
from ..utils.exterior import KVector, Metric6, hodge_star, interior, pullback, wedge
from ..utils.fields import FormField, GridT6, d_field, smooth_random_field
from ..utils.hitchin import analyze
from ..utils.logging import Log
from ..utils.polyforms import poly_d, random_polyform
from ..utils.reporting import build_report, save_json_report
from ..utils.rng import generator
from ..utils.sphere import RATIONAL_POINTS, random_sphere_points
from ..utils.workers import map_ordered
from . import spheremodes, t3b3
from .solver import SolveProblem, flat_base, solve


def random_exact_form(rng, grade, terms=4):
    coeffs = np.array([Fraction(int(c)) for c in rng.integers(-3, 4, size=len(KVector.zeros(grade).coeffs))],
                      dtype=object)
    if terms is not None:
        mask = rng.permutation(len(coeffs)) >= terms
        coeffs[mask] = Fraction(0)
    return KVector(grade, coeffs)


def random_stable_form(rng, spread=0.3):
    """The flat form pulled back by a random matrix near the identity."""
    g = np.eye(6) + spread * rng.standard_normal((6, 6))
    return pullback(t3b3.PSI.evaluate((0,) * 6).astype(float), g)


def check_wedge(seed):
    rng = generator(seed, "selftest", "wedge")
    worst = 0
    for _ in range(10):
        a, b, c = (random_exact_form(rng, k) for k in (1, 2, 2))
        worst = max(worst, (wedge(a, b) - wedge(b, a)).norm(), (wedge(wedge(a, b), c) - wedge(a, wedge(b, c))).norm())
    return worst, 0.0


def check_interior(seed):
    rng = generator(seed, "selftest", "interior")
    worst = 0
    for _ in range(10):
        v = rng.standard_normal(6)
        a = random_exact_form(rng, 3, terms=None).astype(float)
        worst = max(worst, interior(v, interior(v, a)).norm())
    return worst, 1e-12


def check_poly_dd(seed):
    rng = generator(seed, "selftest", "polyd")
    for grade in (0, 1, 2, 3):
        if not poly_d(poly_d(random_polyform(rng, grade, 4))).is_zero():
            return 1.0, 0.0
    return 0.0, 0.0


def check_hodge(seed):
    rng = generator(seed, "selftest", "hodge")
    m = Metric6()
    worst = 0.0
    for k in range(7):
        a = KVector(k, rng.standard_normal(len(KVector.zeros(k).coeffs)))
        worst = max(worst, (hodge_star(m, hodge_star(m, a)) - a * (-1) ** (k * (6 - k))).norm())
    return worst, 1e-12


def check_flat_dual(seed):
    analysis = t3b3.flat_analysis()
    ok = analysis.exact and analysis.P == t3b3.PSI_TILDE.evaluate((0,) * 6)
    return (0.0 if ok else 1.0), 0.0


def check_complex_structure(seed):
    rng = generator(seed, "selftest", "stable")
    worst = 0.0
    for _ in range(5):
        I = np.asarray(analyze(random_stable_form(rng)).I, dtype=float)
        worst = max(worst, np.abs(I @ I + np.eye(6)).max())
    return worst, 1e-10


def check_boundary_frame(seed):
    frame = t3b3.flat_boundary_frame((1, 0, 0))
    return max(max(frame.residuals.values()), abs(frame.levi_lambda)), 1e-10


def check_gamma_closed(seed):
    frames = [t3b3.flat_boundary_frame(p) for p in RATIONAL_POINTS[:3]]
    return hm_membership_residual(frames, t3b3.GAMMA, t3b3.THETA), 0.0


def check_field_dd(seed):
    grid = GridT6((4, 4, 1, 4, 1, 4))
    a = smooth_random_field(grid, 1, generator(seed, "selftest", "dd"))
    dd = d_field(d_field(a))
    return dd.max_abs() / max(a.max_abs(), 1e-300), 1e-13


def check_stokes(seed):
    grid = GridT6((4, 4, 4, 4, 1, 1))
    a = smooth_random_field(grid, 5, generator(seed, "selftest", "stokes"))
    total = float(np.sum(grid.weights * d_field(a).comps[..., 0]))
    return abs(total) / max(a.norm(), 1e-300), 1e-12


def check_sphere_symmetry(seed):
    rng = generator(seed, "selftest", "sphere")
    points = random_sphere_points(rng, 100)
    P = spheremodes.projector(points)
    e1 = np.einsum("nij,nj->ni", P, rng.standard_normal((100, 3)))
    e2 = np.einsum("nij,nj->ni", P, rng.standard_normal((100, 3)))
    lhs = spheremodes.star_product(e1, spheremodes.j_rotate(e2, points), points)
    rhs = spheremodes.star_product(e2, spheremodes.j_rotate(e1, points), points)
    return float(np.abs(lhs - rhs).max()), 1e-12


def check_mode_kernels(seed):
    basis = spheremodes.GalerkinBasis(3)
    if basis.check_constraints() != 0:
        return 1.0, 0.0
    counts = [spheremodes.kernel_dim(spheremodes.assemble_mode(basis, m, with_first_map=False)).dim
              for m in ((0, 0, 0), (1, 0, 0))]
    return float(abs(counts[0] - 1) + counts[1]), 0.0


def check_zero_perturbation(seed):
    grid = GridT6((4, 4, 1, 4, 1, 1))
    base = flat_base(grid)
    result = solve(SolveProblem(base, FormField.zeros(grid, 3)))
    return float(result.iterations) + result.residual_history[-1], 0.0


CHECKS = {
    "wedge_graded_commutative": check_wedge,
    "interior_squares_to_zero": check_interior,
    "poly_d_squares_to_zero": check_poly_dd,
    "hodge_star_involution": check_hodge,
    "flat_dual_form": check_flat_dual,
    "complex_structure": check_complex_structure,
    "boundary_frame": check_boundary_frame,
    "gamma_closed": check_gamma_closed,
    "field_d_squares_to_zero": check_field_dd,
    "discrete_stokes": check_stokes,
    "sphere_symmetry": check_sphere_symmetry,
    "mode_kernels": check_mode_kernels,
    "zero_perturbation_solve": check_zero_perturbation,
}


def run_checks(seed=0, names=None):
    names = list(names or CHECKS)

    def one(name):
        value, tol = CHECKS[name](seed)
        return {"check": name, "value": float(value), "tolerance": tol, "passed": bool(value <= tol)}

    # sequential: the symbolic checks share sympy caches
    return map_ordered(one, names, 1, desc="selftest")


def run(args):
    config = args.config
    Log.header("Self-test")
    rows = run_checks(config.seed)
    failed = [r["check"] for r in rows if not r["passed"]]
    for r in rows:
        (Log.success if r["passed"] else Log.error)(r["check"], value=r["value"], tolerance=r["tolerance"])

    report = build_report(config, {"checks": rows, "passed": not failed})
    out = Path(args.out or config.report_json or Path(config.out_dir) / "selftest.json")
    save_json_report(out, report)
    if failed:
        raise NumericalFailure(f"{len(failed)} self-test check(s) failed", failed=failed)
    return report
