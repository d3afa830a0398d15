#!/usr/bin/env python3
"""Contact and SU(2) data induced by a stable 3-form on a hypersurface.

At a boundary point with conormal dr the stable structure gives the contact
form theta = -dr o I, the Reeb field v (theta(v) = 1, iota_v omega = 0 on
TM), the contact plane H = ker dr cap ker theta and the triple
alpha = iota_v psi, beta = iota_v P(psi) on H. omega = d theta is
derivative-level data and is passed in by the caller.

Forms on H are KVectors of dim 4 in the orthonormal basis `frame.H`. They
are lifted to the ambient space by extension by zero on Iv and v.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateContact, NotAntiSelfDual, NotPseudoconvexFrame
from .exterior import DIM, KVector, derivation, interior, pullback, restrict_tangential, wedge
from .polyforms import poly_d, poly_wedge

LEVI_TOL = 1e-12
ASD_TOL = 1e-9


def _float(form):
    return form.astype(float) if form.exact else form


@dataclass
class BoundaryFrame:
    analysis: object
    dr: np.ndarray
    theta: np.ndarray
    reeb: np.ndarray
    H: np.ndarray
    coframe: np.ndarray
    omega_ambient: KVector
    omega: KVector
    alpha: KVector
    beta: KVector
    vol_H: KVector
    levi_lambda: float
    omega_tilde: KVector = None
    point: tuple = None
    residuals: dict = field(default_factory=dict)

    @property
    def I_H(self):
        """Complex structure restricted to H, in the basis `H`."""
        return self.H.T @ np.asarray(self.analysis.I, dtype=float) @ self.H

    def restrict(self, sigma):
        """Restriction of an ambient form to H."""
        return pullback(_float(sigma), self.H)

    def lift(self, sigma_H):
        """Ambient form vanishing on Iv and v whose restriction to H is sigma_H."""
        return pullback(sigma_H, self.coframe[2:, :])

    def pairing(self, sigma, tau):
        """Wedge pairing (sigma ^ tau) / vol_H on 2-forms over H."""
        return float(wedge(sigma, tau).top() / self.vol_H.top())

    @property
    def pseudoconvex(self):
        return self.omega_tilde is not None

    @property
    def strongly_pseudoconvex(self):
        """Definiteness of the Levi form; the complete algebraic criterion is not decided here."""
        return levi_form(self)[2]

    def to_dict(self):
        return {
            "levi_lambda": self.levi_lambda,
            "strongly_pseudoconvex": self.strongly_pseudoconvex,
            "theta": self.theta,
            "reeb": self.reeb,
            "triple_residuals": self.residuals,
        }


def boundary_frame(analysis, dr, omega, point=None):
    """Contact frame at a boundary point with conormal `dr` and ambient 2-form omega = d theta."""
    dr = np.asarray(dr, dtype=float)
    if np.linalg.norm(dr) == 0.0:
        raise DegenerateContact("conormal dr vanishes")
    I = np.asarray(analysis.I, dtype=float)
    theta = -I.T @ dr
    omega = _float(omega)
    Om = omega.to_matrix().astype(float)

    tangent = scipy.linalg.null_space(dr[None, :])
    kernel = scipy.linalg.null_space(tangent.T @ Om @ tangent, rcond=1e-10)
    if kernel.shape[1] != 1:
        raise DegenerateContact(f"omega on TM has a {kernel.shape[1]}-dimensional kernel", kernel_dim=kernel.shape[1])
    reeb = tangent @ kernel[:, 0]
    scale = float(theta @ reeb)
    if abs(scale) < 1e-12 * np.linalg.norm(theta):
        raise DegenerateContact("Reeb direction lies in ker theta", theta_of_reeb=scale)
    reeb = reeb / scale

    H = scipy.linalg.null_space(np.vstack([dr, theta]))
    frame_matrix = np.column_stack([I @ reeb, reeb, H])
    coframe = np.linalg.inv(frame_matrix)

    psi = _float(analysis.psi)
    P = _float(analysis.P)
    alpha = pullback(interior(reeb, psi), H)
    beta = pullback(interior(reeb, P), H)
    omega_H = pullback(omega, H)
    vol_H = wedge(alpha, alpha)
    if abs(vol_H.top()) < 1e-14 * max(psi.norm(), 1.0) ** 4:
        raise DegenerateContact("alpha is degenerate on H")

    beta2 = wedge(beta, beta).top()
    levi = float(wedge(omega_H, beta).top() / beta2)
    if abs(levi) < LEVI_TOL:
        levi = 0.0
    omega_tilde = None
    if abs(levi) < 1.0:
        shifted = omega_H - beta * levi
        ratio = float(wedge(shifted, shifted).top() / vol_H.top())
        if ratio > 0:
            omega_tilde = shifted / np.sqrt(ratio)

    frame = BoundaryFrame(analysis, dr, theta, reeb, H, coframe, omega, omega_H, alpha, beta,
                          vol_H, levi, omega_tilde, tuple(point) if point is not None else None)
    frame.residuals = triple_residuals(frame)
    return frame


def _tm_basis_form(sigma_H):
    """Extend a form on H by zero to TM in the basis (v, H)."""
    return pullback(sigma_H, np.hstack([np.zeros((4, 1)), np.eye(4)]))


def triple_residuals(frame):
    """Residuals of the boundary relations, relative to |vol_H| (or |psi| for the restrictions)."""
    tm = np.column_stack([frame.reeb, frame.H])
    theta5 = KVector.covector(np.eye(5)[0])
    psi = _float(frame.analysis.psi)
    P = _float(frame.analysis.P)
    scale = max(psi.norm(), 1e-300)
    vol = abs(frame.vol_H.top())

    def top(a, b):
        return float(wedge(a, b).top())

    out = {
        "psi_restriction": (pullback(psi, tm) - wedge(theta5, _tm_basis_form(frame.alpha))).norm() / scale,
        "psihat_restriction": (pullback(P, tm) - wedge(theta5, _tm_basis_form(frame.beta))).norm() / scale,
        "alpha2_minus_beta2": abs(top(frame.alpha, frame.alpha) - top(frame.beta, frame.beta)) / vol,
        "omega_alpha": abs(top(frame.omega, frame.alpha)) / vol,
        "alpha_beta": abs(top(frame.alpha, frame.beta)) / vol,
        "omega_beta_levi": abs(top(frame.omega, frame.beta) - frame.levi_lambda * top(frame.beta, frame.beta)) / vol,
        "omega2_minus_alpha2": abs(top(frame.omega, frame.omega) - top(frame.alpha, frame.alpha)) / vol,
    }
    if frame.omega_tilde is not None:
        out["omega_tilde2_minus_alpha2"] = abs(top(frame.omega_tilde, frame.omega_tilde) - float(frame.vol_H.top())) / vol
    return out


@dataclass
class SelfDualSplit:
    plus: KVector
    minus: KVector
    coefficients: dict


def _as_H(frame, sigma):
    return frame.restrict(sigma) if sigma.dim == DIM else _float(sigma)


def sd_asd_split(frame, sigma):
    """Split a 2-form on H into its span{omega~, alpha, beta} part and its anti-self-dual rest."""
    if frame.omega_tilde is None:
        raise NotPseudoconvexFrame(f"Levi coefficient {frame.levi_lambda:.6g} is not below 1",
                                   levi_lambda=frame.levi_lambda)
    sigma = _as_H(frame, sigma)
    coefficients = {}
    plus = KVector.zeros(2, dim=4)
    for name, e in (("omega_tilde", frame.omega_tilde), ("alpha", frame.alpha), ("beta", frame.beta)):
        c = frame.pairing(sigma, e)
        coefficients[name] = c
        plus = plus + e * c
    return SelfDualSplit(plus, sigma - plus, coefficients)


def project_partial4(frame, sigma):
    """Component of sigma|_H in R omega~ + Lambda^-_H."""
    split = sd_asd_split(frame, sigma)
    return split.minus + frame.omega_tilde * split.coefficients["omega_tilde"]


@dataclass
class BoundaryDecomposition:
    """sigma = c dr^theta + (dr^a + theta^Ia) + (dr^b - theta^Ib) + sigma_H along the boundary."""

    c: float
    mixed11: np.ndarray
    mixed6: np.ndarray
    split: SelfDualSplit

    def reconstruct(self, frame):
        dr = KVector.covector(frame.dr)
        theta = KVector.covector(frame.theta)
        I_star = -frame.I_H.T
        h = frame.coframe[2:, :]

        def lift1(eta):
            return KVector.covector(eta @ h)

        a, b = self.mixed11, self.mixed6
        out = wedge(dr, theta) * self.c
        out = out + wedge(dr, lift1(a)) + wedge(theta, lift1(I_star @ a))
        out = out + wedge(dr, lift1(b)) - wedge(theta, lift1(I_star @ b))
        return out + frame.lift(self.split.plus + self.split.minus)


def boundary_decompose(frame, sigma):
    sigma = _float(sigma)
    Iv = np.asarray(frame.analysis.I, dtype=float) @ frame.reeb
    Sm = sigma.to_matrix().astype(float)
    c = -float(Iv @ Sm @ frame.reeb)
    eta1 = -(Iv @ Sm @ frame.H)
    eta2 = frame.reeb @ Sm @ frame.H
    I_eta2 = -frame.I_H.T @ eta2
    mixed11 = 0.5 * (eta1 - I_eta2)
    mixed6 = 0.5 * (eta1 + I_eta2)
    return BoundaryDecomposition(c, mixed11, mixed6, sd_asd_split(frame, sigma))


def levi_form(frame):
    """L(u, w) = omega(u, Iw) on H and its eigenvalues."""
    Om = frame.omega_ambient.to_matrix().astype(float)
    I = np.asarray(frame.analysis.I, dtype=float)
    L = frame.H.T @ Om @ I @ frame.H
    L = 0.5 * (L + L.T)
    eig = np.linalg.eigvalsh(L)
    definite = bool(np.all(eig > 0) or np.all(eig < 0))
    return L, eig, definite


def holomorphic_area_residual(frame):
    """|D_H(alpha + i beta) - 2i(alpha + i beta)| / |alpha|: zero iff alpha + i beta has type (2,0) on H."""
    area = KVector(2, frame.alpha.coeffs + 1j * frame.beta.coeffs, 4)
    image = derivation(frame.I_H.T, area)
    return (image - area * 2j).norm() / frame.alpha.norm()


def hm_membership_residual(frames, gamma, theta):
    """max over boundary points of |d(gamma ^ theta)| restricted to M; gamma must be anti-self-dual on H."""
    worst = 0.0
    closed = poly_d(poly_wedge(gamma, theta))
    for frame in frames:
        if frame.point is None:
            raise NotAntiSelfDual("frame carries no boundary point")
        split = sd_asd_split(frame, gamma.evaluate(frame.point))
        size = max(split.minus.norm(), split.plus.norm(), 1e-300)
        if split.plus.norm() > ASD_TOL * size:
            raise NotAntiSelfDual("form is not anti-self-dual on H", point=[float(c) for c in frame.point],
                                  self_dual_part=split.plus.norm())
        value = restrict_tangential(closed, frame.point)
        worst = max(worst, max((abs(float(c)) for c in value.coeffs), default=0.0))
    return worst
