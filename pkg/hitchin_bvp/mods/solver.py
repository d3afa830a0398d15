#!/usr/bin/env python3
"""Least-squares search for closed stable 3-forms with dP(psi) = 0 in a fixed class.

The unknown is a 2-form field alpha and the iterate is psi = psi0 + b + d alpha,
so every iterate stays closed and keeps the periods of psi0 + b. Under the
boundary-zero constraint alpha vanishes on the boundary layer, the discrete
form of alpha|_M = 0. The objective is

    f(alpha) = 1/2 sum_c w_c |dP(psi)_c|^2,

and its gradient with respect to the plain coefficient sum is
d^T J^T d^T (w R) restricted to the free entries.
"""

from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from tqdm import tqdm

from ..utils.errors import ConfigError, NotStable, StabilityBreakdown, Stalled
from ..utils.fields import (FormField, GridBallT3, GridT6, bump, d_field, d_transpose, dump_field, hitchin_volume,
                            period_table, pointwise_analysis, smooth_random_field, wedge_fields)
from ..utils.logging import Log
from ..utils.reporting import build_report, save_csv_report, save_json_report
from ..utils.rng import generator
from .t3b3 import PSI

ARMIJO = 1e-4
BACKTRACK = 0.5
MAX_HALVINGS = 30
STABILITY_FLOOR = 0.1
STALL_STEPS = 50
STALL_RTOL = 1e-12


@dataclass
class SolveProblem:
    base: FormField
    offset: FormField
    constraint: str = "periodic"
    rtol: float = 1e-3
    max_iter: int = 2000
    history: int = 10
    workers: int = None

    def __post_init__(self):
        if self.base.grade != 3 or self.offset.grade != 3:
            raise ConfigError("base and class offset must be 3-form fields")
        if self.base.grid != self.offset.grid:
            raise ConfigError("base and class offset live on different grids")
        self.free = self.grid.free_mask(self.constraint)

    @property
    def grid(self):
        return self.base.grid

    @property
    def start(self):
        return self.base + self.offset

    def psi(self, alpha):
        return self.start + d_field(alpha)

    def closedness(self):
        """max |d base|, max |d offset| relative to |base|."""
        scale = max(self.base.max_abs(), 1e-300)
        return d_field(self.base).max_abs() / scale, d_field(self.offset).max_abs() / scale


@dataclass
class Evaluation:
    f: float
    gradient: FormField
    residual: float
    min_neg_lambda: float
    psi: FormField
    analysis: object = field(repr=False, default=None)


def evaluate(problem, alpha):
    """Objective, masked gradient and residual norm at alpha; raises NotStable off the stability domain."""
    psi = problem.psi(alpha)
    analysis = pointwise_analysis(psi, problem.workers)
    R = d_field(analysis.P)
    weights = problem.grid.weights[..., None]
    f = 0.5 * float(np.sum(weights * R.comps ** 2))
    inner = d_transpose(FormField(R.grid, R.grade, weights * R.comps))
    g = d_transpose(analysis.apply_j(inner, transpose=True, workers=problem.workers))
    g.comps = np.where(problem.free[..., None], g.comps, 0.0)
    return Evaluation(f, g, float(np.sqrt(2.0 * f)), analysis.min_neg_lambda(), psi, analysis)


def objective_and_gradient(problem, alpha):
    ev = evaluate(problem, alpha)
    return ev.f, ev.gradient


def dot(a, b):
    """Plain coefficient pairing, the inner product the gradient is taken in."""
    return float(np.sum(a.comps * b.comps))


def volume_first_variation(problem, alpha, direction):
    """(int P(psi) ^ d delta, int dP(psi) ^ delta) for a 2-form direction delta."""
    analysis = pointwise_analysis(problem.psi(alpha), problem.workers)
    w = problem.grid.weights
    lhs = float(np.sum(w * wedge_fields(analysis.P, d_field(direction)).comps[..., 0]))
    rhs = float(np.sum(w * wedge_fields(d_field(analysis.P), direction).comps[..., 0]))
    return lhs, rhs


@dataclass
class SolveReport:
    residual_history: list
    volume_history: list
    objective_history: list
    final_psi: FormField
    alpha: FormField
    periods: dict
    period_drift: float
    closedness: float
    converged: bool
    iterations: int
    boundary_alpha_max: float = 0.0

    @property
    def reduction(self):
        first, last = self.residual_history[0], self.residual_history[-1]
        return first / last if last > 0 else float("inf")

    def rows(self):
        return [{"iteration": i, "residual": r, "volume": v, "objective": f}
                for i, (r, v, f) in enumerate(zip(self.residual_history, self.volume_history, self.objective_history))]

    def to_dict(self):
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_history": self.residual_history,
            "volume_history": self.volume_history,
            "residual_reduction": self.reduction,
            "periods": self.periods,
            "period_drift": self.period_drift,
            "closedness": self.closedness,
            "boundary_alpha_max": self.boundary_alpha_max,
        }


def _two_loop(g, pairs):
    """L-BFGS direction -H g from the stored (s, y, 1 / y.s) pairs."""
    q = g.comps.copy()
    coeffs = []
    for s, y, rho in reversed(pairs):
        a = rho * float(np.sum(s * q))
        coeffs.append(a)
        q -= a * y
    s, y, _ = pairs[-1]
    q *= float(np.sum(s * y)) / float(np.sum(y * y))
    for (s, y, rho), a in zip(pairs, reversed(coeffs)):
        b = rho * float(np.sum(y * q))
        q += (a - b) * s
    return FormField(g.grid, g.grade, -q)


def _line_search(problem, alpha, current, direction, step, floor):
    slope = dot(current.gradient, direction)
    for _ in range(MAX_HALVINGS):
        trial = alpha + direction * step
        try:
            ev = evaluate(problem, trial)
        except NotStable:
            step *= BACKTRACK
            continue
        if ev.min_neg_lambda >= floor and ev.f <= current.f + ARMIJO * step * slope:
            return trial, ev
        step *= BACKTRACK
    raise StabilityBreakdown(f"line search failed after {MAX_HALVINGS} halvings", objective=current.f,
                             min_neg_lambda=current.min_neg_lambda)


def solve(problem, progress=False):
    grid = problem.grid
    alpha = FormField.zeros(grid, 2)
    current = evaluate(problem, alpha)
    floor = STABILITY_FLOOR * current.min_neg_lambda
    target = problem.rtol * current.residual
    periods = period_table(current.psi)
    drift = 0.0
    closed = d_field(current.psi).max_abs() / max(current.psi.max_abs(), 1e-300)

    residuals = [current.residual]
    volumes = [hitchin_volume(current.psi, analysis=current.analysis)]
    objectives = [current.f]
    pairs = deque(maxlen=problem.history)
    stalled = 0
    iterations = 0
    converged = current.residual <= target or current.residual == 0.0

    bar = tqdm(total=problem.max_iter, desc="solve", disable=not progress or not Log.enabled("info"))
    while not converged and iterations < problem.max_iter:
        if pairs:
            direction = _two_loop(current.gradient, list(pairs))
            step = 1.0
        else:
            direction = current.gradient * -1.0
            gg = dot(current.gradient, current.gradient)
            step = current.f / gg if gg > 0 else 1.0
        if dot(current.gradient, direction) >= 0.0:
            pairs.clear()
            direction = current.gradient * -1.0
            gg = dot(current.gradient, current.gradient)
            step = current.f / gg if gg > 0 else 1.0

        new_alpha, new = _line_search(problem, alpha, current, direction, step, floor)
        s = new_alpha.comps - alpha.comps
        y = new.gradient.comps - current.gradient.comps
        sy = float(np.sum(s * y))
        if sy > 0.0:
            pairs.append((s, y, 1.0 / sy))

        decrease = (current.f - new.f) / current.f if current.f > 0 else 0.0
        stalled = stalled + 1 if decrease < STALL_RTOL else 0
        alpha, current = new_alpha, new
        iterations += 1

        table = period_table(current.psi)
        drift = max(drift, max(abs(table[k] - periods[k]) for k in periods))
        closed = max(closed, d_field(current.psi).max_abs() / max(current.psi.max_abs(), 1e-300))
        residuals.append(current.residual)
        volumes.append(hitchin_volume(current.psi, analysis=current.analysis))
        objectives.append(current.f)
        bar.update(1)
        bar.set_postfix(residual=f"{current.residual:.3e}")

        converged = current.residual <= target
        if not converged and stalled >= STALL_STEPS:
            bar.close()
            raise Stalled(f"no progress over {STALL_STEPS} accepted steps", iterations=iterations,
                          residual=current.residual, residual_history=residuals[-STALL_STEPS:])
    bar.close()

    frozen = ~problem.free
    return SolveReport(residuals, volumes, objectives, current.psi, alpha, periods, drift, closed, converged,
                       iterations, float(np.abs(alpha.comps[frozen]).max(initial=0.0)))


def flat_base(grid):
    return FormField.constant(grid, PSI.evaluate((0,) * 6))


def _scaled_exact_offset(base, mu, eps):
    b = d_field(mu)
    norm = b.norm()
    if eps == 0.0 or norm == 0.0:
        return FormField.zeros(base.grid, 3)
    return b * (eps * base.norm() / norm)


def torelli_problem(n, eps, seed, rtol=1e-3, max_iter=2000, workers=None):
    """Flat psi0 on T^6 plus b = d mu for a random lowest-mode mu, |b| = eps |psi0|."""
    grid = GridT6(n)
    base = flat_base(grid)
    mu = smooth_random_field(grid, 2, generator(seed, "solver", "mu"))
    return SolveProblem(base, _scaled_exact_offset(base, mu, eps), "periodic", rtol, max_iter, workers=workers)


def boundary_problem(nx, nt, eps, seed, rtol=1e-3, max_iter=2000, workers=None):
    """Flat psi0 on B^3 x T^3 plus b = d(bump mu), supported inside |x| <= 0.6; alpha is zero on the boundary layer."""
    grid = GridBallT3(nx, nt)
    base = flat_base(grid)
    mu = smooth_random_field(grid, 2, generator(seed, "solver", "mu"))
    mu = FormField(grid, 2, mu.comps * bump(grid)[..., None])
    return SolveProblem(base, _scaled_exact_offset(base, mu, eps), "boundary_zero", rtol, max_iter, workers=workers)


def _finish(args, problem, name):
    config = args.config
    closed_base, closed_offset = problem.closedness()
    Log.info("Problem ready", cells=problem.grid.npoints, free=int(problem.free.sum()),
             closed_base=closed_base, closed_offset=closed_offset)
    result = solve(problem, progress=True)
    if result.converged:
        Log.success("Converged", iterations=result.iterations, reduction=result.reduction)
    else:
        Log.warn("Iteration cap reached", iterations=result.iterations, reduction=result.reduction)

    body = {"grid": problem.grid.to_dict(), "constraint": problem.constraint, "solve": result}
    out = Path(args.out or config.report_json or Path(config.out_dir) / f"{name}.json")
    if args.dump_field:
        dump_field(result.final_psi, Path(args.dump_field))
        body["final_psi"] = str(args.dump_field)
    report = build_report(config, body)
    save_json_report(out, report)
    csv_path = config.report_csv or out.with_suffix(".csv")
    save_csv_report(csv_path, result.rows(), ["iteration", "residual", "volume", "objective"])
    return report


def run_torelli(args):
    Log.header(f"Torelli solve on T6 n={args.n}")
    problem = torelli_problem(args.n, args.eps, args.config.seed, args.rtol, args.max_iter, args.workers)
    return _finish(args, problem, "torelli-t6")


def run_boundary(args):
    Log.header(f"Boundary solve on B3xT3 nx={args.nx} nt={args.nt}")
    problem = boundary_problem(args.nx, args.nt, args.eps, args.config.seed, args.rtol, args.max_iter, args.workers)
    return _finish(args, problem, "boundary-solve")
