#!/usr/bin/env python3
"""Polynomials on the unit sphere: exact monomial moments and product quadrature."""

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
import scipy.special

RATIONAL_POINTS = (
    (Fraction(1), Fraction(0), Fraction(0)),
    (Fraction(3, 5), Fraction(4, 5), Fraction(0)),
    (Fraction(0), Fraction(0), Fraction(1)),
    (Fraction(2, 3), Fraction(1, 3), Fraction(2, 3)),
    (Fraction(2, 7), Fraction(3, 7), Fraction(6, 7)),
    (Fraction(1, 3), Fraction(2, 3), Fraction(2, 3)),
)


def _double_factorial(n):
    out = 1
    while n > 1:
        out *= n
        n -= 2
    return out


def moment_ratio(a, b, c):
    """Exact r with int_{S^2} x^a y^b z^c dA = 4 pi r."""
    if a % 2 or b % 2 or c % 2:
        return Fraction(0)
    num = _double_factorial(a - 1) * _double_factorial(b - 1) * _double_factorial(c - 1)
    return Fraction(num, _double_factorial(a + b + c + 1))


def sphere_moment(a, b, c):
    return 4.0 * np.pi * float(moment_ratio(a, b, c))


@lru_cache(maxsize=None)
def moment_table(degree):
    """table[a, b, c] = int x^a y^b z^c over the sphere, for a, b, c <= degree."""
    out = np.zeros((degree + 1,) * 3)
    for a in range(0, degree + 1, 2):
        for b in range(0, degree + 1, 2):
            for c in range(0, degree + 1, 2):
                out[a, b, c] = sphere_moment(a, b, c)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=None)
def monomial_exponents(degree):
    """Exponent triples of total degree `degree`, in a fixed order."""
    out = [(a, b, degree - a - b) for a in range(degree, -1, -1) for b in range(degree - a, -1, -1)]
    return np.array(out, dtype=np.int64).reshape(-1, 3)


def exponents_up_to(degrees):
    return np.vstack([monomial_exponents(d) for d in degrees])


def monomial_values(exps, points):
    points = np.asarray(points, dtype=float)
    return np.prod(points[:, None, :] ** exps[None, :, :], axis=-1)


def monomial_gradients(exps, points):
    """d/dx_l of every monomial at every point: shape (npoints, nmono, 3)."""
    points = np.asarray(points, dtype=float)
    out = np.empty((points.shape[0], exps.shape[0], 3))
    for l in range(3):
        lowered = exps.copy()
        lowered[:, l] = np.maximum(lowered[:, l] - 1, 0)
        out[:, :, l] = exps[None, :, l] * monomial_values(lowered, points)
    return out


def monomial_gram(exps_a, exps_b, weight_terms=((np.zeros(3, dtype=np.int64), 1.0),)):
    """int m_i m'_j w over the sphere, w given as [(exponent, coefficient)]."""
    top = int(exps_a.sum(axis=1).max() + exps_b.sum(axis=1).max()
              + max(int(np.sum(e)) for e, _ in weight_terms)) + 1
    table = moment_table(top)
    pair = exps_a[:, None, :] + exps_b[None, :, :]
    out = np.zeros((exps_a.shape[0], exps_b.shape[0]))
    for exp, coef in weight_terms:
        e = pair + np.asarray(exp, dtype=np.int64)
        out += coef * table[e[..., 0], e[..., 1], e[..., 2]]
    return out


@dataclass
class SphereQuadrature:
    """Gauss-Legendre in cos(theta) times the trapezoid rule in phi, with the frame (e_theta, e_phi)."""

    points: np.ndarray
    weights: np.ndarray
    u1: np.ndarray
    u2: np.ndarray

    @classmethod
    def for_degree(cls, degree):
        n_theta = degree // 2 + 2
        n_phi = degree + 2
        t, wt = scipy.special.roots_legendre(n_theta)
        phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
        T, PHI = np.meshgrid(t, phi, indexing="ij")
        S = np.sqrt(1.0 - T ** 2)
        points = np.stack([S * np.cos(PHI), S * np.sin(PHI), T], axis=-1).reshape(-1, 3)
        u1 = np.stack([T * np.cos(PHI), T * np.sin(PHI), -S], axis=-1).reshape(-1, 3)
        u2 = np.stack([-np.sin(PHI), np.cos(PHI), np.zeros_like(PHI)], axis=-1).reshape(-1, 3)
        weights = np.outer(wt, np.full(n_phi, 2.0 * np.pi / n_phi)).reshape(-1)
        return cls(points, weights, u1, u2)

    @property
    def size(self):
        return self.points.shape[0]

    def integrate(self, values):
        return np.tensordot(self.weights, values, axes=(0, 0))


def random_sphere_points(rng, count):
    v = rng.standard_normal((count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)
