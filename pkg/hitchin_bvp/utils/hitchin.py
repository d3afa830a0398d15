#!/usr/bin/env python3
"""Pointwise algebra of stable 3-forms in six dimensions.

For a 3-form psi and reference volume eps, K(v) is the vector w with
iota_w eps = iota_v psi ^ psi; lambda = tr(K^2) / 6. When lambda < 0 the form
is complex-stable, I = K / sqrt(-lambda) is an almost complex structure and
psi + i P(psi) has type (3,0), with P(psi)(X, Y, Z) = -psi(IX, Y, Z).

Covectors are acted on by theta -> theta o I, i.e. by the matrix I^T, and
that action extends to a derivation D of the exterior algebra. D acts as
i(p - q) on forms of type (p, q). Everything that depends only on types
(P, the linearisation J, type projectors) is written as a polynomial in D,
which keeps rational inputs rational.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.linalg

from .errors import NotStable, NumericalFailure, TorsionTypeError
from .exterior import (DIM, KVector, basis, default_orientation, derivation, derivation_coeffs, interior,
                       wedge)

STABILITY_RTOL = 1e-12


def densitized_k(psi, eps=None):
    """The endomorphism K of psi relative to eps, columns K(e_j)."""
    eps = default_orientation() if eps is None else eps
    c = eps.top()
    exact = psi.exact and isinstance(c, (int, Fraction))
    K = np.empty((DIM, DIM), dtype=object if exact else float)
    for j in range(DIM):
        e = np.zeros(DIM, dtype=np.int64)
        e[j] = 1
        five = wedge(interior(e, psi), psi)
        for i in range(DIM):
            # iota_{e_i} e^{012345} = (-1)^i e^{(omit i)}, stored at position 5 - i
            value = five.coeffs[DIM - 1 - i] * (-1) ** i
            K[i, j] = Fraction(value) / Fraction(c) if exact else float(value) / float(c)
    return K


def hitchin_invariant(psi, eps=None):
    K = densitized_k(psi, eps)
    K2 = K.dot(K)
    trace = sum(K2[i, i] for i in range(DIM))
    lam = trace / 6 if K.dtype == object else float(trace) / 6.0
    return lam, K


def stability_threshold(psi_norm):
    return -STABILITY_RTOL * psi_norm ** 4


def exact_sqrt(q):
    """sqrt of a non-negative Fraction when it is rational, else None."""
    q = Fraction(q)
    if q < 0:
        return None
    num, den = math.isqrt(q.numerator), math.isqrt(q.denominator)
    if num * num == q.numerator and den * den == q.denominator:
        return Fraction(num, den)
    return None


@dataclass
class StableAnalysis:
    psi: KVector
    eps: KVector
    hitchin_lambda: object
    K: np.ndarray
    I: np.ndarray
    P: KVector
    vol_density: object
    exact: bool = False

    @property
    def covector_action(self):
        return self.I.T

    @property
    def holomorphic_volume(self):
        """Omega = psi + i P(psi) as a complex 3-form."""
        return KVector(3, self.psi.coeffs.astype(complex) + 1j * self.P.coeffs.astype(complex))

    def to_dict(self):
        return {
            "lambda": self.hitchin_lambda,
            "stable": True,
            "vol_density": self.vol_density,
            "P_coeffs": self.P.to_json()["coeffs"],
            "I_matrix": self.I,
            "exact": self.exact,
        }


def analyze(psi, eps=None):
    """Full stable-form package of psi; raises NotStable unless lambda < 0."""
    eps = default_orientation() if eps is None else eps
    lam, K = hitchin_invariant(psi, eps)
    if not float(lam) < stability_threshold(psi.norm()):
        raise NotStable(f"3-form is not complex-stable (lambda={float(lam):.6g})", hitchin_lambda=float(lam))
    root = exact_sqrt(-lam) if K.dtype == object else None
    if root is not None:
        I = K / root
        P = derivation(I.T, psi) * Fraction(-1, 3)
        return StableAnalysis(psi, eps, lam, K, I, P, root, exact=True)
    K = K.astype(float)
    root = math.sqrt(-float(lam))
    I = K / root
    P = derivation(I.T, psi.astype(float) if psi.exact else psi) * (-1.0 / 3.0)
    return StableAnalysis(psi, eps, float(lam), K, I, P, root, exact=False)


def j_operator(analysis, rho):
    """Linearisation J of psi -> P(psi) at `analysis`: -i on (3,0)+(2,1), +i on (1,2)+(0,3)."""
    A = analysis.covector_action
    d1 = derivation(A, rho)
    d3 = derivation(A, derivation(A, d1))
    if analysis.exact and rho.exact:
        return (d1 * 13 + d3) * Fraction(-1, 12)
    return (d1 * 13 + d3) * (-1.0 / 12.0)


def j_coeffs(A, coeffs, transpose=False):
    """Batched J on 3-form coefficients for covector actions A of shape (..., 6, 6)."""
    d1 = derivation_coeffs(A, coeffs, DIM, 3, transpose)
    d2 = derivation_coeffs(A, d1, DIM, 3, transpose)
    d3 = derivation_coeffs(A, d2, DIM, 3, transpose)
    return -(13.0 * d1 + d3) / 12.0


def form_types(grade):
    return [(p, grade - p) for p in range(min(grade, 3), -1, -1) if grade - p <= 3]


def project_type_coeffs(A, coeffs, grade, p, q):
    """Spectral projector of D onto eigenvalue i(p - q), as a Lagrange polynomial in D."""
    x = np.asarray(coeffs).astype(complex)
    mu = p - q
    for (pp, qq) in form_types(grade):
        nu = pp - qq
        if nu == mu:
            continue
        x = (derivation_coeffs(A, x, DIM, grade) - 1j * nu * x) / (1j * (mu - nu))
    return x


class TypeComponents:
    """Complex (p, q) components of a real or complex form."""

    def __init__(self, grade, parts):
        self.grade = grade
        self.parts = dict(parts)

    def __getitem__(self, key):
        return self.parts[key]

    def __iter__(self):
        return iter(self.parts)

    def items(self):
        return self.parts.items()

    def total(self):
        out = KVector.zeros(self.grade, dtype=complex)
        for part in self.parts.values():
            out = out + part
        return out

    def to_dict(self):
        return {f"{p},{q}": part.coeffs for (p, q), part in self.parts.items()}


def type_project(analysis, a):
    A = np.asarray(analysis.covector_action, dtype=float)
    parts = {}
    for (p, q) in form_types(a.grade):
        parts[(p, q)] = KVector(a.grade, project_type_coeffs(A, a.coeffs.astype(complex), a.grade, p, q))
    return TypeComponents(a.grade, parts)


def compatible_omega(analysis, g=None):
    """The (1,1)-form omega(X, Y) = h(IX, Y) of the I-averaged background metric h."""
    I = np.asarray(analysis.I, dtype=float)
    g = np.eye(DIM) if g is None else np.asarray(g, dtype=float)
    h = 0.5 * (g + I.T @ g @ I)
    return KVector.from_matrix(I.T @ h)


@dataclass
class TwoFormSplit:
    f: float
    part8: KVector
    X: np.ndarray

    def reconstruct(self, analysis, omega):
        return omega.astype(float) * self.f + self.part8 + interior(self.X, analysis.psi.astype(float))


def two_form_split(analysis, omega, sigma):
    """sigma = f omega + part8 + iota_X psi, part8 primitive of type (1,1)."""
    omega = omega.astype(float) if omega.exact else omega
    sigma = sigma.astype(float) if sigma.exact else sigma
    psi = analysis.psi.astype(float) if analysis.psi.exact else analysis.psi
    s11 = type_project(analysis, sigma)[(1, 1)].real
    s6 = sigma - s11
    w2 = wedge(omega, omega)
    f = float(wedge(s11, w2).top() / wedge(omega, w2).top())
    part8 = s11 - omega * f
    cols = np.stack([interior(np.eye(DIM)[j], psi).coeffs for j in range(DIM)], axis=1)
    X, *_ = np.linalg.lstsq(cols, s6.coeffs, rcond=None)
    resid = np.linalg.norm(cols @ X - s6.coeffs)
    if resid > 1e-9 * max(1.0, sigma.norm()):
        raise NumericalFailure(f"type-6 part is not of the form iota_X psi ({resid:.3g})", residual=float(resid))
    return TwoFormSplit(f, part8, X)


def holomorphic_coframe(analysis):
    """Three (1,0)-forms theta with theta o I = i theta, preferring e^j - i e^j o I for x1..x3."""
    A = np.asarray(analysis.covector_action, dtype=float)
    cand = np.eye(DIM) - 1j * A
    if np.linalg.matrix_rank(cand[:, :3], tol=1e-8) == 3:
        cols = [0, 1, 2]
    else:
        _, _, piv = scipy.linalg.qr(cand, pivoting=True)
        cols = sorted(piv[:3])
    return cand[:, cols].T


@lru_cache(maxsize=None)
def _pairs():
    return ((0, 1), (0, 2), (1, 2))


class NijenhuisTorsion:
    """N'' recovered from dP: nu^a = i_{N''} theta^a in Lambda^{0,2}, N'' = sum_a nu^a Z_a."""

    def __init__(self, analysis, dP, theta, components):
        self.analysis = analysis
        self.dP = dP
        self.theta = theta
        self.components = components
        full = np.vstack([theta, np.conj(theta)])
        self.frame = np.linalg.inv(full)[:, :3]

    def nu(self, a):
        out = KVector.zeros(2, dtype=complex)
        bar = np.conj(self.theta)
        for c, (b, d) in zip(self.components[a], _pairs()):
            out = out + wedge(KVector.covector(bar[b]), KVector.covector(bar[d])) * c
        return out

    def tensor(self):
        """Components N''[k, i, j] of the vector-valued 2-form, coordinate basis."""
        out = np.zeros((DIM, DIM, DIM), dtype=complex)
        for a in range(3):
            out += np.einsum("k,ij->kij", self.frame[:, a], self.nu(a).to_matrix())
        return out

    def classical(self):
        """Real Nijenhuis tensor [IX,IY] - I[IX,Y] - I[X,IY] - [X,Y] = 4 (N'' + conj N'')."""
        return 8.0 * self.tensor().real

    def contract(self, one_form):
        return KVector.from_matrix(np.einsum("k,kij->ij", np.asarray(one_form.coeffs, dtype=complex), self.tensor()))

    def relation_residual(self):
        """max_a |nu^a ^ Omega - i theta^a ^ dP| relative to |dP|."""
        omega = self.analysis.holomorphic_volume
        dP = self.dP.astype(complex) if not self.dP.exact else KVector(4, self.dP.coeffs.astype(complex))
        worst = 0.0
        for a in range(3):
            lhs = wedge(self.nu(a), omega)
            rhs = wedge(KVector.covector(self.theta[a]), dP) * 1j
            worst = max(worst, (lhs - rhs).norm())
        return worst / max(dP.norm(), 1e-300)

    def is_zero(self, tol=0.0):
        return bool(np.all(np.abs(self.components) <= tol))

    def to_dict(self):
        return {"components": self.components, "classical": self.classical()}


def nijenhuis_from_torsion(analysis, dP, type_tol=1e-6):
    """Solve nu^a ^ (psi + iP) = i theta^a ^ dP for the (0,2)-forms nu^a."""
    theta = holomorphic_coframe(analysis)
    components = np.zeros((3, 3), dtype=complex)
    norm = dP.norm()
    if norm == 0.0:
        return NijenhuisTorsion(analysis, dP, theta, components)
    parts = type_project(analysis, dP)
    dP22 = parts[(2, 2)]
    off = (KVector(4, dP.coeffs.astype(complex)) - dP22).norm() / norm
    if off > type_tol:
        raise TorsionTypeError(f"dP has a non-(2,2) part of relative size {off:.3g}", relative_size=off)
    omega = analysis.holomorphic_volume
    bar = np.conj(theta)
    cols = np.stack([wedge(wedge(KVector.covector(bar[b]), KVector.covector(bar[d])), omega).coeffs
                     for b, d in _pairs()], axis=1)
    for a in range(3):
        rhs = wedge(KVector.covector(theta[a]), dP22).coeffs * 1j
        sol, *_ = np.linalg.lstsq(cols, rhs, rcond=None)
        components[a] = sol
    return NijenhuisTorsion(analysis, dP, theta, components)


@lru_cache(maxsize=None)
def _k_quadratic_table():
    """K as a quadratic form in the 20 coefficients: K_flat = sum coef * psi_A psi_B."""
    n = len(basis(DIM, 3))
    singles = []
    for a in range(n):
        e = KVector.zeros(3, dtype=object)
        e.coeffs[a] = Fraction(1)
        singles.append((e, densitized_k(e)))
    ia, ib, coef, dst = [], [], [], []
    for a in range(n):
        for b in range(a, n):
            if a == b:
                Q = singles[a][1]
                weight = 1
            else:
                Q = densitized_k(singles[a][0] + singles[b][0]) - singles[a][1] - singles[b][1]
                weight = 1
            for i in range(DIM):
                for j in range(DIM):
                    if Q[i, j] != 0:
                        ia.append(a)
                        ib.append(b)
                        coef.append(float(Q[i, j]) * weight)
                        dst.append(i * DIM + j)
    scatter = np.zeros((len(dst), DIM * DIM))
    scatter[np.arange(len(dst)), dst] = 1.0
    return np.array(ia, dtype=np.intp), np.array(ib, dtype=np.intp), np.array(coef), scatter


def batched_k(psi_coeffs, eps_top=1.0):
    ia, ib, coef, scatter = _k_quadratic_table()
    flat = (psi_coeffs[..., ia] * psi_coeffs[..., ib] * coef) @ scatter
    return flat.reshape(psi_coeffs.shape[:-1] + (DIM, DIM)) / eps_top


def batched_analysis(psi_coeffs, eps_top=1.0):
    """lambda, I, P and vol density for an array of 3-form coefficients (..., 20).

    Points that are not stable get lambda >= threshold and NaN in I, P, vol;
    callers decide whether that is an error.
    """
    K = batched_k(psi_coeffs, eps_top)
    lam = np.einsum("...ij,...ji->...", K, K) / 6.0
    thresh = -STABILITY_RTOL * np.sum(psi_coeffs ** 2, axis=-1) ** 2
    stable = lam < thresh
    root = np.sqrt(np.where(stable, -lam, np.nan))
    I = K / root[..., None, None]
    A = np.swapaxes(I, -1, -2)
    P = derivation_coeffs(A, psi_coeffs, DIM, 3) * (-1.0 / 3.0)
    return {"lambda": lam, "stable": stable, "I": I, "A": A, "P": P, "vol": root}
