#!/usr/bin/env python3
"""Differential forms with exact rational polynomial coefficients (sympy over QQ)."""

import math
from fractions import Fraction

import numpy as np
import sympy

from .errors import GradeError
from .exterior import DIM, KVector, basis, basis_index, restrict_tangential, sort_sign, wedge_table

GENS = sympy.symbols("x1 x2 x3 y1 y2 y3")


def poly(expr):
    return sympy.Poly(expr, *GENS, domain=sympy.QQ)


_ZERO = None


def _zero():
    global _ZERO
    if _ZERO is None:
        _ZERO = poly(0)
    return _ZERO


def _to_fraction(value):
    value = sympy.Rational(value)
    return Fraction(int(value.p), int(value.q))


class PolyForm:
    """A grade-k form sum_I p_I(x, y) dx^I with sympy.Poly coefficients."""

    __slots__ = ("grade", "coeffs")
    __hash__ = None

    def __init__(self, grade, coeffs=None):
        if not 0 <= grade <= DIM:
            raise GradeError(f"grade {grade} outside 0..{DIM}")
        self.grade = grade
        self.coeffs = {idx: p for idx, p in (coeffs or {}).items() if not p.is_zero}

    @classmethod
    def from_terms(cls, terms, grade=None):
        """{"y1 x2 x3": "x1**2", ...}; coefficient values are sympy expressions or strings."""
        names = [str(g) for g in GENS]
        out = {}
        for key, expr in terms.items():
            idx = tuple(names.index(t[1:] if t.startswith("d") else t) for t in key.split())
            if grade is None:
                grade = len(idx)
            elif len(idx) != grade:
                raise GradeError(f"term {key!r} has grade {len(idx)}, expected {grade}")
            merged, s = sort_sign(idx)
            if not s:
                continue
            p = poly(sympy.sympify(expr)) * s
            out[merged] = out.get(merged, _zero()) + p
        return cls(grade if grade is not None else 0, out)

    @classmethod
    def constant(cls, form):
        return cls(form.grade, {idx: poly(sympy.Rational(str(c)) if isinstance(c, Fraction) else c)
                                for idx, c in zip(basis(DIM, form.grade), form.coeffs) if c != 0})

    def __add__(self, other):
        self._check(other)
        out = dict(self.coeffs)
        for idx, p in other.coeffs.items():
            out[idx] = out.get(idx, _zero()) + p
        return PolyForm(self.grade, out)

    def __neg__(self):
        return PolyForm(self.grade, {idx: -p for idx, p in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, factor):
        """Multiply by a scalar, an expression or a Poly."""
        factor = factor if isinstance(factor, sympy.Poly) else poly(sympy.sympify(factor))
        return PolyForm(self.grade, {idx: p * factor for idx, p in self.coeffs.items()})

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, PolyForm):
            return NotImplemented
        return self.grade == other.grade and (self - other).is_zero()

    def _check(self, other):
        if self.grade != other.grade:
            raise GradeError(f"grade mismatch {self.grade} vs {other.grade}")

    def is_zero(self):
        return all(p.is_zero for p in self.coeffs.values())

    def wedge(self, other):
        return poly_wedge(self, other)

    def evaluate(self, point):
        """Exact KVector at a rational point (floats give a float KVector)."""
        point = tuple(point) + (0,) * (DIM - len(point))
        if not all(isinstance(c, (int, Fraction)) for c in point):
            return KVector(self.grade, self.evaluate_many([point])[0])
        subs = dict(zip(GENS, [sympy.Rational(str(c)) for c in point]))
        out = KVector.zeros(self.grade, dtype=object)
        index = basis_index(DIM, self.grade)
        for idx, p in self.coeffs.items():
            out.coeffs[index[idx]] = _to_fraction(p.as_expr().xreplace(subs))
        return out

    def evaluate_many(self, points):
        """Float evaluation at an array of points (N, 6) -> (N, ncoeffs)."""
        points = np.asarray(points, dtype=float)
        out = np.zeros((points.shape[0], math.comb(DIM, self.grade)))
        index = basis_index(DIM, self.grade)
        for idx, p in self.coeffs.items():
            fn = sympy.lambdify(GENS, p.as_expr(), "numpy")
            out[:, index[idx]] = np.broadcast_to(fn(*points.T), (points.shape[0],))
        return out

    def restrict(self, point, tangent_basis=None):
        return restrict_tangential(self, point, tangent_basis)

    def __repr__(self):
        names = [str(g) for g in GENS]
        body = " + ".join(f"({p.as_expr()})*d({' '.join(names[i] for i in idx)})"
                          for idx, p in sorted(self.coeffs.items()))
        return f"PolyForm(grade={self.grade}, {body or '0'})"


def poly_wedge(a, b):
    grade = a.grade + b.grade
    if grade > DIM:
        raise GradeError(f"wedge grade {grade} exceeds {DIM}")
    ia, ib, sign, scatter = wedge_table(DIM, a.grade, b.grade)
    src_a = basis(DIM, a.grade)
    src_b = basis(DIM, b.grade)
    dst = basis(DIM, grade)
    out = {}
    for i, j, s, row in zip(ia, ib, sign, scatter):
        pa = a.coeffs.get(src_a[i])
        pb = b.coeffs.get(src_b[j])
        if pa is None or pb is None:
            continue
        key = dst[int(np.argmax(row))]
        out[key] = out.get(key, _zero()) + pa * pb * int(s)
    return PolyForm(grade, out)


def poly_d(a):
    """Exact exterior derivative: d(p dx^I) = sum_l dp/dx_l dx_l ^ dx^I."""
    if a.grade == DIM:
        return PolyForm(DIM)
    out = {}
    for idx, p in a.coeffs.items():
        for l, gen in enumerate(GENS):
            if l in idx:
                continue
            dp = p.diff(gen)
            if dp.is_zero:
                continue
            merged, s = sort_sign((l,) + idx)
            out[merged] = out.get(merged, _zero()) + dp * s
    return PolyForm(a.grade + 1, out)


def random_polyform(rng, grade, degree, terms=4):
    """Random form with small integer coefficients and monomials of degree <= `degree`."""
    out = {}
    forms = basis(DIM, grade)
    for _ in range(terms):
        idx = forms[int(rng.integers(len(forms)))]
        exps = rng.integers(0, degree + 1, size=DIM)
        while exps.sum() > degree:
            exps[int(np.argmax(exps))] -= 1
        mono = sympy.Mul(*[g ** int(e) for g, e in zip(GENS, exps)])
        coef = int(rng.integers(-5, 6)) or 1
        out[idx] = out.get(idx, _zero()) + poly(coef * mono)
    return PolyForm(grade, out)
