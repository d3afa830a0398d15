#!/usr/bin/env python3
"""Fourier-mode analysis of closed anti-self-dual forms on S^2 x T^3.

For a mode exp(xi . y), xi = 2 pi i m, a 1-form eta = sum a_i dx_i + b_i dy_i
(a, b tangent to S^2) has

    d(eta e^{xi.y}) = (sum_l d_l a_i dx_l^dx_i + d_l b_i dx_l^dy_i + sum_k xi_k dy_k^eta) e^{xi.y}.

Restricting to the contact plane H = TS^2 + I TS^2 and pairing with the
anti-self-dual sections f gamma (the area-form summand) and
q_S = sum S_ij dx_i^dy_j (S trace-free symmetric tangential) gives the
Galerkin matrix of the boundary operator from Omega^1_X + Omega^1_Y to
Omega^2 + Gamma(s^2_0). Spaces are spanned by raw polynomial generators,
orthonormalised through their exact moment Gram matrices. H is written in
the frame (u1, 0), (u2, 0), (0, u1), (0, u2) with u1 x u2 = x.
"""

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from pathlib import Path

import numpy as np
import scipy.linalg
import sympy

from ..utils.errors import ConfigError, GapNotResolved
from ..utils.logging import Log
from ..utils.reporting import build_report, save_csv_report, save_json_report
from ..utils.sphere import (RATIONAL_POINTS, SphereQuadrature, exponents_up_to, monomial_gradients, monomial_gram,
                            monomial_values)
from ..utils.workers import map_ordered

PAIRS4 = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# top coefficient of S ^ T for 2-forms on a 4-space, as a bilinear form on coefficients
W4 = np.zeros((6, 6))
for (_i, _j), _s in {((0, 1), (2, 3)): 1, ((0, 2), (1, 3)): -1, ((0, 3), (1, 2)): 1}.items():
    W4[PAIRS4.index(_i), PAIRS4.index(_j)] = _s
    W4[PAIRS4.index(_j), PAIRS4.index(_i)] = _s

# the triple and gamma in the frame of H; the same at every point
H_OMEGA = np.array([0.0, 1.0, 0.0, 0.0, 1.0, 0.0])
H_ALPHA = np.array([-1.0, 0.0, 0.0, 0.0, 0.0, 1.0])
H_BETA = np.array([0.0, 0.0, 1.0, -1.0, 0.0, 0.0])
H_GAMMA = np.array([1.0, 0.0, 0.0, 0.0, 0.0, 1.0])

SYMMETRIC_BASIS = tuple(
    np.array([[1.0 if {r, c} == {i, j} else 0.0 for c in range(3)] for r in range(3)])
    for i, j in ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
)


def wedge4(a, b):
    return np.stack([a[..., p] * b[..., q] - a[..., q] * b[..., p] for p, q in PAIRS4], axis=-1)


def w4(S, T):
    return np.einsum("...a,ab,...b->...", S, W4, T)


def asd_part(sigma):
    """Anti-self-dual part of 2-forms on H (coefficients in the frame basis)."""
    vol = w4(H_ALPHA, H_ALPHA)
    out = np.array(sigma, dtype=np.result_type(sigma, float))
    for e in (H_OMEGA, H_ALPHA, H_BETA):
        out = out - (w4(sigma, e) / vol)[..., None] * e
    return out


def pairing(sigma, tau):
    """<sigma, tau> = -(sigma ^ tau) / vol_H, positive on anti-self-dual forms."""
    return -w4(sigma, tau) / w4(H_ALPHA, H_ALPHA)


def projector(points):
    points = np.asarray(points, dtype=float)
    return np.eye(3) - points[..., :, None] * points[..., None, :]


def trace_free(X, P):
    return X - 0.5 * np.trace(X, axis1=-2, axis2=-1)[..., None, None] * P


def star_product(a, b, points):
    """Trace-free symmetric product a * b of tangent vectors."""
    P = projector(points)
    sym = 0.5 * (a[..., :, None] * b[..., None, :] + b[..., :, None] * a[..., None, :])
    return trace_free(P @ sym @ P, P)


def j_rotate(eta, points):
    return np.cross(points, eta)


def b_oracle(eta, xi, points):
    """-xi~ * eta pointwise, xi~ the tangential part of xi."""
    xi_t = np.einsum("...ij,...j->...i", projector(points), np.broadcast_to(xi, np.shape(points)))
    return -star_product(eta, xi_t, points)


def q_form(S, u1, u2):
    """sum S_ij dx_i ^ dy_j restricted to H."""
    out = np.zeros(np.shape(S)[:-2] + (6,), dtype=np.result_type(S, float))
    us = (u1, u2)
    for p in range(2):
        for q in range(2):
            out[..., PAIRS4.index((p, 2 + q))] = np.einsum("...i,...ij,...j->...", us[p], S, us[q])
    return out


def covector_frames(quad):
    """H-coefficients of dx_l and dy_l at the nodes: (npoints, 3, 4) each."""
    n = quad.size
    cx = np.zeros((n, 3, 4))
    cy = np.zeros((n, 3, 4))
    cx[:, :, 0], cx[:, :, 1] = quad.u1, quad.u2
    cy[:, :, 2], cy[:, :, 3] = quad.u1, quad.u2
    return cx, cy


@lru_cache(maxsize=None)
def _tf_trace_terms():
    """Polynomials (1/2) tr(TF(P E_a P) TF(P E_b P)) as [(exponent, coefficient)]."""
    xs = sympy.symbols("x1:4")
    X = sympy.Matrix(xs)
    P = sympy.eye(3) - X * X.T
    tf = []
    for E in SYMMETRIC_BASIS:
        M = P * sympy.Matrix(E.astype(int)) * P
        tf.append(M - sympy.Rational(1, 2) * M.trace() * P)
    out = {}
    for a, b in itertools.product(range(6), repeat=2):
        poly = sympy.Poly(sympy.expand((tf[a] * tf[b]).trace() / 2), *xs)
        out[(a, b)] = [(np.array(e, dtype=np.int64), float(c)) for e, c in poly.terms()]
    return out


def _orthonormalize(G, rtol=1e-10):
    w, V = scipy.linalg.eigh(G)
    keep = w > rtol * w.max()
    return V[:, keep] / np.sqrt(w[keep])


@dataclass(frozen=True)
class TolPolicy:
    absolute: float = 1e-9
    gap: float = 1e3


class GalerkinBasis:
    """Polynomial generator spaces over S^2, with moment Gram matrices and orthonormal bases."""

    def __init__(self, degree, trial_offset=3):
        if degree < 2:
            raise ConfigError(f"degree must be >= 2, got {degree}", degree=degree)
        if trial_offset < 1:
            raise ConfigError("trial offset must be >= 1", trial_offset=trial_offset)
        self.degree = degree
        self.trial_offset = trial_offset
        self.trial_degree = degree + trial_offset
        self.trial_mono = exponents_up_to((self.trial_degree, self.trial_degree - 1))
        self.target_mono = exponents_up_to((degree, degree - 1))
        self.quad = SphereQuadrature.for_degree(degree + self.trial_degree + 8)

        self.gram_trial_x = self._tangential_gram(self.trial_mono)
        self.gram_omega2 = monomial_gram(self.target_mono, self.target_mono)
        self.gram_q = self._trace_free_gram(self.target_mono)
        self.U_x = _orthonormalize(self.gram_trial_x)
        self.U_omega2 = _orthonormalize(self.gram_omega2)
        self.U_q = _orthonormalize(self.gram_q)
        self.dims = {
            "omega1_x": self.U_x.shape[1],
            "omega1_y": self.U_x.shape[1],
            "omega2": self.U_omega2.shape[1],
            "s2_0": self.U_q.shape[1],
        }

    @staticmethod
    def _tangential_gram(exps):
        """int m_i m_j (delta_kl - x_k x_l), generators ordered (k, i)."""
        n = len(exps)
        G = np.zeros((3 * n, 3 * n))
        for k, l in itertools.product(range(3), repeat=2):
            e = np.zeros(3, dtype=np.int64)
            e[k] += 1
            e[l] += 1
            terms = [(e, -1.0)]
            if k == l:
                terms.append((np.zeros(3, dtype=np.int64), 1.0))
            G[k * n:(k + 1) * n, l * n:(l + 1) * n] = monomial_gram(exps, exps, terms)
        return G

    @staticmethod
    def _trace_free_gram(exps):
        n = len(exps)
        G = np.zeros((6 * n, 6 * n))
        for (a, b), terms in _tf_trace_terms().items():
            if terms:
                G[a * n:(a + 1) * n, b * n:(b + 1) * n] = monomial_gram(exps, exps, terms)
        return G

    @property
    def U_target(self):
        return scipy.linalg.block_diag(self.U_omega2, self.U_q)

    @property
    def U_trial(self):
        return scipy.linalg.block_diag(self.U_x, self.U_x)

    @property
    def target_slices(self):
        r = self.dims["omega2"]
        return slice(0, r), slice(r, r + self.dims["s2_0"])

    @property
    def trial_slices(self):
        r = self.dims["omega1_x"]
        return slice(0, r), slice(r, 2 * r)

    def target_forms(self):
        """Raw target sections at the nodes: (npoints, n_omega2 + 6 * n_mono, 6)."""
        quad = self.quad
        f = monomial_values(self.target_mono, quad.points)
        omega2 = f[:, :, None] * H_GAMMA
        P = projector(quad.points)
        blocks = []
        for E in SYMMETRIC_BASIS:
            S = trace_free(P @ E @ P, P)
            blocks.append(f[:, :, None] * q_form(S, quad.u1, quad.u2)[:, None, :])
        return np.concatenate([omega2] + blocks, axis=1)

    def trial_forms(self):
        """d of the raw generators restricted to H: the xi-free part and the three dy_k^eta parts."""
        quad = self.quad
        cx, cy = covector_frames(quad)
        vals = monomial_values(self.trial_mono, quad.points)
        grads = monomial_gradients(self.trial_mono, quad.points)
        cgrad = np.einsum("nmi,nil->nml", grads, cx)
        n, nm = vals.shape

        def flat(arr):
            # (n, 3 components, nm, 6) -> (n, 3 * nm, 6), generator order (k, i)
            return arr.reshape(n, 3 * nm, 6)

        x0 = flat(np.swapaxes(wedge4(cgrad[:, :, None, :], cx[:, None, :, :]), 1, 2))
        y0 = flat(np.swapaxes(wedge4(cgrad[:, :, None, :], cy[:, None, :, :]), 1, 2))
        base = np.concatenate([x0, y0], axis=1)
        xi_parts = []
        for k in range(3):
            wx = wedge4(cy[:, k, None, :], cx)
            wy = wedge4(cy[:, k, None, :], cy)
            xk = flat(wx[:, :, None, :] * vals[:, None, :, None])
            yk = flat(wy[:, :, None, :] * vals[:, None, :, None])
            xi_parts.append(np.concatenate([xk, yk], axis=1))
        return base, xi_parts

    def galerkin(self, targets, forms):
        """int <target_i, form_j> over the sphere."""
        scaled = (targets @ W4) * (-self.quad.weights / w4(H_ALPHA, H_ALPHA))[:, None, None]
        n = self.quad.size
        left = np.transpose(scaled, (1, 0, 2)).reshape(scaled.shape[1], n * 6)
        right = np.transpose(forms, (0, 2, 1)).reshape(n * 6, forms.shape[1])
        return left @ right

    @cached_property
    def raw_matrices(self):
        targets = self.target_forms()
        base, xi_parts = self.trial_forms()
        return self.galerkin(targets, base), [self.galerkin(targets, part) for part in xi_parts]

    @cached_property
    def matrices(self):
        """Galerkin matrices in the orthonormal bases: (M0, [M1, M2, M3])."""
        raw0, raw_xi = self.raw_matrices
        Ut, Us = self.U_target, self.U_trial
        return Ut.T @ raw0 @ Us, [Ut.T @ r @ Us for r in raw_xi]

    def quadrature_gram(self, kind):
        quad = self.quad
        if kind == "trial":
            vals = monomial_values(self.trial_mono, quad.points)
            P = projector(quad.points)
            w = quad.weights
            n = vals.shape[1]
            G = np.zeros((3 * n, 3 * n))
            for k, l in itertools.product(range(3), repeat=2):
                G[k * n:(k + 1) * n, l * n:(l + 1) * n] = (vals * (w * P[:, k, l])[:, None]).T @ vals
            return G
        targets = self.target_forms()
        r = len(self.target_mono)
        part = targets[:, :r] if kind == "omega2" else targets[:, r:]
        return np.einsum("n,nij->ij", quad.weights, pairing(part[:, :, None, :], part[:, None, :, :]))

    def check_constraints(self, points=RATIONAL_POINTS):
        """Exact tangency/trace residuals of the generator constraints at rational sphere points."""
        worst = Fraction(0)
        for x in points:
            x = np.array([Fraction(c) for c in x], dtype=object)
            if sum(c * c for c in x) != 1:
                raise ConfigError("constraint check needs points on the unit sphere")
            P = np.array([[Fraction(int(i == j)) - x[i] * x[j] for j in range(3)] for i in range(3)], dtype=object)
            for k in range(3):
                worst = max(worst, abs((P[:, k] * x).sum()))
            for E in SYMMETRIC_BASIS:
                M = P.dot(np.array(E.astype(int), dtype=object)).dot(P)
                S = M - Fraction(1, 2) * sum(M[i, i] for i in range(3)) * P
                worst = max(worst, abs(sum(S[i, i] for i in range(3))), max(abs(c) for c in S.dot(x)))
        return worst

    def to_dict(self):
        return {"degree": self.degree, "trial_offset": self.trial_offset, "dims": self.dims,
                "quadrature_points": self.quad.size}


@dataclass
class FirstMap:
    """Galerkin matrices of f -> (df, f xi~) from scalars into Omega^1_X + Omega^1_Y."""

    d0: np.ndarray
    A: np.ndarray

    def stacked(self):
        return np.vstack([self.d0, self.A])


def first_map(basis, m):
    quad = basis.quad
    xi = 2j * np.pi * np.asarray(m, dtype=float)
    vals = monomial_values(basis.trial_mono, quad.points)
    grads = monomial_gradients(basis.trial_mono, quad.points)
    P = projector(quad.points)
    eta_x = np.einsum("nij,nsj->nsi", P, grads)
    eta_y = vals[:, :, None] * (P @ xi)[:, None, :]
    wv = vals * quad.weights[:, None]

    def project(eta):
        rhs = np.concatenate([wv.T @ eta[:, :, k] for k in range(3)], axis=0)
        return basis.U_x.T @ rhs

    return FirstMap(project(eta_x), project(eta_y))


@dataclass
class ModeOperator:
    m: tuple
    blocks: dict
    operator: np.ndarray
    laplacian: np.ndarray
    leakage: float
    first: FirstMap = None
    slices: tuple = field(default=None, repr=False)

    @property
    def hermiticity(self):
        norm = np.linalg.norm(self.laplacian)
        return float(np.linalg.norm(self.laplacian - self.laplacian.conj().T) / norm) if norm else 0.0

    def complex_residual(self):
        """|D_xi o (d, A)| relative to |D_xi| |(d, A)|."""
        if self.first is None:
            return float("nan")
        stacked = self.first.stacked()
        denom = np.linalg.norm(self.operator) * np.linalg.norm(stacked)
        return float(np.linalg.norm(self.operator @ stacked) / denom) if denom else 0.0


def assemble_mode(basis, m, with_first_map=True):
    m = tuple(int(c) for c in m)
    M0, Mxi = basis.matrices
    omega2, q = basis.target_slices
    xs, ys = basis.trial_slices
    xi_mat = sum((2.0 * np.pi * mk * Mk for mk, Mk in zip(m, Mxi)), np.zeros_like(M0))
    blocks = {
        "d": M0[omega2, xs].astype(complex),
        "C": 1j * xi_mat[omega2, ys],
        "B": 1j * xi_mat[q, xs],
        "D": M0[q, ys].astype(complex),
    }
    scale = max(np.abs(M0).max(), 1e-300)
    leakage = max(np.abs(M0[q, xs]).max(initial=0.0), np.abs(M0[omega2, ys]).max(initial=0.0),
                  np.abs(xi_mat[q, ys]).max(initial=0.0), np.abs(xi_mat[omega2, xs]).max(initial=0.0)) / scale
    operator = np.block([[blocks["d"], blocks["C"]], [blocks["B"], blocks["D"]]])
    first = first_map(basis, m) if with_first_map else None
    if first is not None:
        blocks["d0"], blocks["A"] = first.d0, first.A
    laplacian = operator @ operator.conj().T
    return ModeOperator(m, blocks, operator, laplacian, float(leakage), first, (omega2, q))


def diagonality_residual(op):
    """|Delta[s2_0, Omega^2]| / |Delta| in the spectral norm."""
    omega2, q = op.slices
    norm = np.linalg.norm(op.laplacian, 2)
    if norm == 0.0:
        return 0.0
    return float(np.linalg.norm(op.laplacian[q, omega2], 2) / norm)


@dataclass
class KernelCount:
    dim: int
    eigenvalues: np.ndarray
    vectors: np.ndarray


def realify(H):
    return np.block([[H.real, -H.imag], [H.imag, H.real]])


def kernel_dim(op, tol_policy=TolPolicy(), laplacian=None):
    """Number of eigenvalues below absolute * lambda_max, with a verified gap to the rest."""
    L = op.laplacian if laplacian is None else laplacian
    L = 0.5 * (L + L.conj().T)
    n = L.shape[0]
    w, V = scipy.linalg.eigh(realify(L))
    eigenvalues = w[::2]
    vectors = V[:n, ::2] + 1j * V[n:, ::2]
    top = float(w.max()) if w.size else 0.0
    if top <= 0.0:
        return KernelCount(n, eigenvalues, vectors)
    low = int(np.sum(eigenvalues <= tol_policy.absolute * top))
    high = int(np.sum(eigenvalues <= tol_policy.gap * tol_policy.absolute * top))
    if low != high:
        raise GapNotResolved(f"no spectral gap at mode {op.m}: {low} vs {high} small eigenvalues",
                             m=list(op.m), count_absolute=low, count_gap=high,
                             eigenvalues=(eigenvalues[:10] / top).tolist())
    return KernelCount(low, eigenvalues, vectors)


def kernel_overlap(op, basis, vector):
    """Overlap of a target-space vector with the constant multiple of the area form."""
    omega2, _ = op.slices
    integrals = basis.U_omega2.T @ monomial_gram(basis.target_mono, np.zeros((1, 3), dtype=np.int64))[:, 0]
    z = np.asarray(vector)
    norm = np.linalg.norm(z)
    if norm == 0.0:
        return 0.0
    return float(abs(np.dot(z[omega2], integrals)) / (np.sqrt(4.0 * np.pi) * norm))


def mode_grid(mmax):
    return [m for m in itertools.product(range(-mmax, mmax + 1), repeat=3)]


def analyze_mode(basis, m, policy):
    op = assemble_mode(basis, m)
    count = kernel_dim(op, policy)
    top = float(count.eigenvalues.max()) if count.eigenvalues.size else 0.0
    row = {
        "m": list(op.m),
        "kernel_dim": count.dim,
        "eigenvalues": (count.eigenvalues[:10] / top if top else count.eigenvalues[:10]).tolist(),
        "lambda_max": top,
        "diagonality_residual": diagonality_residual(op),
        "leakage": op.leakage,
        "hermiticity": op.hermiticity,
        "complex_residual": op.complex_residual(),
    }
    if not any(op.m):
        row["area_overlap"] = kernel_overlap(op, basis, count.vectors[:, 0]) if count.dim else 0.0
    return row


def sweep(degree, mmax, trial_offset=3, policy=TolPolicy(), workers=None):
    basis = GalerkinBasis(degree, trial_offset)
    _ = basis.matrices  # shared by every worker
    rows = map_ordered(lambda m: analyze_mode(basis, m, policy), mode_grid(mmax), workers, desc="modes")
    return basis, rows


def run(args):
    config = args.config
    policy = TolPolicy(args.tol, args.gap)
    Log.header(f"Spectrum D={args.degree} M={args.mmax}")
    basis, rows = sweep(args.degree, args.mmax, args.trial_offset, policy, args.workers)
    body = {"basis": basis.to_dict(), "modes": rows}
    if args.compare_offset:
        _, check = sweep(args.degree, args.mmax, args.trial_offset + 1, policy, args.workers)
        body["offset_counts_agree"] = [r["kernel_dim"] for r in rows] == [r["kernel_dim"] for r in check]
    kernel_zero = next(r for r in rows if not any(r["m"]))
    Log.success("Spectrum done", kernel_dim_m0=kernel_zero["kernel_dim"],
                nonzero_kernels=sum(r["kernel_dim"] for r in rows if any(r["m"])))

    report = build_report(config, body)
    out = Path(args.out or config.report_json or Path(config.out_dir) / "spectrum.json")
    save_json_report(out, report)
    csv_path = config.report_csv or out.with_suffix(".csv")
    fields = ["m", "kernel_dim", "lambda_max", "diagonality_residual", "leakage", "hermiticity"]
    save_csv_report(csv_path, [dict(r, m=" ".join(map(str, r["m"]))) for r in rows], fields)
    return report
