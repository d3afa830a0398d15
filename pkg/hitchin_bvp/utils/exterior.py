#!/usr/bin/env python3
"""Exterior algebra over a small real vector space.

Forms are stored densely: a grade-k form on an n-dimensional space keeps
binom(n, k) coefficients in the lexicographic order of strictly increasing
index tuples. Indices are 0-based internally; the JSON literal and the
coordinate names are 1-based. On the 6-dimensional model space the
coordinates are ordered (x1, x2, x3, y1, y2, y3).

Coefficient arrays may be float, complex or object (fractions.Fraction)
for exact work. The table-driven kernels below accept arrays with any
number of leading batch axes, which is how the field layer reuses them.
"""

import itertools
import json
import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
import sympy

from .errors import GradeError, InvalidMetric, NotOnSphere

DIM = 6
COORDS = ("x1", "x2", "x3", "y1", "y2", "y3")


def coordinate_names(dim):
    return COORDS if dim == DIM else tuple(f"e{i + 1}" for i in range(dim))


def sort_sign(seq):
    """Return (sorted tuple, sign of the sorting permutation), or (None, 0) on a repeat."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return None, 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return tuple(sorted(seq)), sign


@lru_cache(maxsize=None)
def basis(dim, grade):
    return tuple(itertools.combinations(range(dim), grade))


@lru_cache(maxsize=None)
def basis_index(dim, grade):
    return {idx: i for i, idx in enumerate(basis(dim, grade))}


def _scatter_matrix(targets, size):
    s = np.zeros((len(targets), size), dtype=np.int64)
    s[np.arange(len(targets)), targets] = 1
    return s


@lru_cache(maxsize=None)
def wedge_table(dim, k, l):
    ia, ib, sign, out = [], [], [], []
    target = basis_index(dim, k + l)
    for a, ka in enumerate(basis(dim, k)):
        for b, kb in enumerate(basis(dim, l)):
            merged, s = sort_sign(ka + kb)
            if s:
                ia.append(a)
                ib.append(b)
                sign.append(s)
                out.append(target[merged])
    return (np.array(ia, dtype=np.intp), np.array(ib, dtype=np.intp),
            np.array(sign, dtype=np.int64), _scatter_matrix(out, len(basis(dim, k + l))))


@lru_cache(maxsize=None)
def interior_table(dim, k):
    """Entries (vector slot j, form index I, sign): iota_{e_j} e^I = sign e^{I minus j}."""
    jv, ia, sign, out = [], [], [], []
    target = basis_index(dim, k - 1)
    for a, idx in enumerate(basis(dim, k)):
        for pos, j in enumerate(idx):
            jv.append(j)
            ia.append(a)
            sign.append(-1 if pos % 2 else 1)
            out.append(target[idx[:pos] + idx[pos + 1:]])
    return (np.array(jv, dtype=np.intp), np.array(ia, dtype=np.intp),
            np.array(sign, dtype=np.int64), _scatter_matrix(out, len(basis(dim, k - 1))))


@lru_cache(maxsize=None)
def derivation_table(dim, k):
    """Derivation extending a covector endomorphism M (e^p -> sum_i M[i, p] e^i).

    Entries (row i, column p, source I, sign) with scatter matrices onto the
    target index J (forward) and the source index I (transpose).
    """
    rows, cols, src, sign, dst = [], [], [], [], []
    index = basis_index(dim, k)
    for a, idx in enumerate(basis(dim, k)):
        for pos, p in enumerate(idx):
            rest = idx[:pos] + idx[pos + 1:]
            for i in range(dim):
                if i in rest:
                    continue
                merged, s = sort_sign(idx[:pos] + (i,) + idx[pos + 1:])
                rows.append(i)
                cols.append(p)
                src.append(a)
                sign.append(s)
                dst.append(index[merged])
    size = len(basis(dim, k))
    return (np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp),
            np.array(src, dtype=np.intp), np.array(dst, dtype=np.intp),
            np.array(sign, dtype=np.int64), _scatter_matrix(dst, size), _scatter_matrix(src, size))


def wedge_coeffs(a, b, dim, k, l):
    ia, ib, sign, scatter = wedge_table(dim, k, l)
    return (a[..., ia] * b[..., ib] * sign) @ scatter


def interior_coeffs(v, a, dim, k):
    if k == 0:
        return np.zeros(a.shape[:-1] + (0,), dtype=a.dtype)
    jv, ia, sign, scatter = interior_table(dim, k)
    return (v[..., jv] * a[..., ia] * sign) @ scatter


def derivation_coeffs(m, a, dim, k, transpose=False):
    """Apply the derivation induced by the covector map `m` (shape (..., dim, dim))."""
    if k == 0:
        return np.zeros_like(a)
    rows, cols, src, dst, sign, scatter, scatter_t = derivation_table(dim, k)
    weights = m[..., rows, cols] * sign
    if transpose:
        return (weights * a[..., dst]) @ scatter_t
    return (weights * a[..., src]) @ scatter


def _exact_det(mat):
    value = sympy.Matrix(mat.tolist()).det()
    return Fraction(int(value.p), int(value.q))


def _as_coeff_array(values, exact):
    if exact:
        return np.array([Fraction(v) if not isinstance(v, Fraction) else v for v in values], dtype=object)
    return np.asarray(values)


class KVector:
    """A grade-k exterior form on a `dim`-dimensional space (default 6)."""

    __slots__ = ("dim", "grade", "coeffs")
    __hash__ = None

    def __init__(self, grade, coeffs, dim=DIM):
        if grade < 0:
            raise GradeError(f"negative grade {grade}", grade=grade, dim=dim)
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (math.comb(dim, grade),):
            raise GradeError(f"expected {math.comb(dim, grade)} coefficients, got {coeffs.shape}")
        self.dim = dim
        self.grade = grade
        self.coeffs = coeffs

    @classmethod
    def zeros(cls, grade, dim=DIM, dtype=float):
        if dtype is object:
            return cls(grade, np.array([Fraction(0)] * math.comb(dim, grade), dtype=object), dim)
        return cls(grade, np.zeros(math.comb(dim, grade), dtype=dtype), dim)

    @classmethod
    def from_terms(cls, terms, dim=DIM, grade=None, exact=None):
        """Build a form from {"x1 y2": c, ...}; keys may be out of order (antisymmetry applies).

        Keys are coordinate names or 1-based index strings ("1 5"). The result is exact
        when every coefficient is an int or Fraction, unless `exact` says otherwise.
        """
        names = coordinate_names(dim)
        parsed = []
        for key, value in terms.items():
            idx = _parse_key(key, names)
            if grade is None:
                grade = len(idx)
            elif len(idx) != grade:
                raise GradeError(f"term {key!r} has grade {len(idx)}, expected {grade}")
            parsed.append((idx, value))
        if grade is None:
            grade = 0
        values = [v for _, v in parsed]
        if exact is None:
            exact = all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values)
        is_complex = any(isinstance(v, complex) for v in values)
        out = cls.zeros(grade, dim, object if exact else (complex if is_complex else float))
        index = basis_index(dim, grade)
        for idx, value in parsed:
            merged, s = sort_sign(idx)
            if not s:
                continue
            out.coeffs[index[merged]] += Fraction(value) * s if exact else value * s
        return out

    @classmethod
    def basis_form(cls, idx, dim=DIM, exact=True):
        return cls.from_terms({tuple(idx): 1}, dim=dim, exact=exact)

    @classmethod
    def covector(cls, values, dim=None):
        values = np.asarray(values)
        return cls(1, values.copy(), dim or values.shape[0])

    @classmethod
    def from_matrix(cls, mat):
        """2-form with sigma(X, Y) = X^T mat Y for an antisymmetric matrix."""
        mat = np.asarray(mat)
        dim = mat.shape[0]
        return cls(2, np.array([mat[i, j] for i, j in basis(dim, 2)]), dim)

    def to_matrix(self):
        if self.grade != 2:
            raise GradeError("to_matrix needs a 2-form", grade=self.grade)
        mat = np.zeros((self.dim, self.dim), dtype=self.coeffs.dtype)
        if self.coeffs.dtype == object:
            mat[:] = Fraction(0)
        for c, (i, j) in zip(self.coeffs, basis(self.dim, 2)):
            mat[i, j] = c
            mat[j, i] = -c
        return mat

    @property
    def exact(self):
        return self.coeffs.dtype == object

    def astype(self, dtype):
        if dtype is object:
            return KVector(self.grade, np.array([Fraction(c) for c in self.coeffs], dtype=object), self.dim)
        return KVector(self.grade, self.coeffs.astype(dtype), self.dim)

    def _check_same(self, other):
        if self.grade != other.grade or self.dim != other.dim:
            raise GradeError(f"grade/dim mismatch: {self.grade}/{self.dim} vs {other.grade}/{other.dim}")

    def __add__(self, other):
        self._check_same(other)
        return KVector(self.grade, self.coeffs + other.coeffs, self.dim)

    def __sub__(self, other):
        self._check_same(other)
        return KVector(self.grade, self.coeffs - other.coeffs, self.dim)

    def __neg__(self):
        return KVector(self.grade, -self.coeffs, self.dim)

    def __mul__(self, scalar):
        return KVector(self.grade, self.coeffs * scalar, self.dim)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        if self.exact and isinstance(scalar, (int, Fraction)):
            return KVector(self.grade, self.coeffs * Fraction(1, 1) / Fraction(scalar), self.dim)
        return KVector(self.grade, self.coeffs / scalar, self.dim)

    def __eq__(self, other):
        if not isinstance(other, KVector):
            return NotImplemented
        return (self.grade, self.dim) == (other.grade, other.dim) and bool(np.all(self.coeffs == other.coeffs))

    def wedge(self, other):
        return wedge(self, other)

    def conj(self):
        return KVector(self.grade, np.conj(self.coeffs), self.dim)

    @property
    def real(self):
        return KVector(self.grade, np.real(self.coeffs), self.dim)

    @property
    def imag(self):
        return KVector(self.grade, np.imag(self.coeffs), self.dim)

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.coeffs.astype(complex)) ** 2)))

    def top(self):
        """Coefficient of the volume form (grade == dim)."""
        if self.grade != self.dim:
            raise GradeError("top() needs a form of top degree", grade=self.grade, dim=self.dim)
        return self.coeffs[0]

    def is_zero(self, tol=0.0):
        if self.exact and tol == 0:
            return all(c == 0 for c in self.coeffs)
        return self.norm() <= tol

    def allclose(self, other, rtol=1e-10, atol=1e-12):
        self._check_same(other)
        a = self.coeffs.astype(complex)
        b = other.coeffs.astype(complex)
        return bool(np.all(np.abs(a - b) <= atol + rtol * max(np.max(np.abs(b), initial=0.0), 1.0)))

    def terms(self):
        names = coordinate_names(self.dim)
        return {" ".join(names[i] for i in idx): c
                for idx, c in zip(basis(self.dim, self.grade), self.coeffs) if c != 0}

    def __repr__(self):
        body = " + ".join(f"{c}*d({k})" for k, c in self.terms().items()) or "0"
        return f"KVector(grade={self.grade}, {body})"

    def to_json(self):
        coeffs = {}
        for idx, c in zip(basis(self.dim, self.grade), self.coeffs):
            if c == 0:
                continue
            key = " ".join(str(i + 1) for i in idx)
            if isinstance(c, Fraction):
                coeffs[key] = c.numerator if c.denominator == 1 else str(c)
            else:
                coeffs[key] = float(c)
        return {"grade": self.grade, "coeffs": coeffs}

    @classmethod
    def from_json(cls, data, dim=DIM):
        """Parse a literal {"grade": k, "coeffs": {"1 2 3": 1, "4 5 6": "-1/2"}}."""
        if isinstance(data, str):
            data = json.loads(data)
        grade = int(data["grade"])
        if not 0 <= grade <= dim:
            raise GradeError(f"grade {grade} outside 0..{dim}", grade=grade, dim=dim)
        coeffs = data.get("coeffs", {})
        values = {}
        for key, value in coeffs.items():
            idx = tuple(int(t) - 1 for t in key.split())
            if any(b <= a for a, b in zip(idx, idx[1:])) or any(not 0 <= i < dim for i in idx):
                raise GradeError(f"key {key!r} is not a strictly increasing 1-based index tuple")
            values[idx] = Fraction(value) if isinstance(value, str) else value
        exact = all(isinstance(v, (int, Fraction)) and not isinstance(v, bool) for v in values.values())
        return cls.from_terms(values, dim=dim, grade=grade, exact=exact)


def _parse_key(key, names):
    if isinstance(key, tuple):
        return tuple(names.index(k) if isinstance(k, str) else int(k) for k in key)
    idx = []
    for tok in key.split():
        if tok.startswith("d") and tok[1:] in names:
            tok = tok[1:]
        if tok in names:
            idx.append(names.index(tok))
        else:
            idx.append(int(tok) - 1)
    return tuple(idx)


def wedge(a, b, allow_overflow=False):
    grade = a.grade + b.grade
    if a.dim != b.dim:
        raise GradeError("wedge of forms on different spaces")
    if grade > a.dim:
        if allow_overflow:
            return KVector.zeros(grade, a.dim, np.result_type(a.coeffs, b.coeffs))
        raise GradeError(f"wedge grade {grade} exceeds {a.dim}", grade=grade)
    return KVector(grade, wedge_coeffs(a.coeffs, b.coeffs, a.dim, a.grade, b.grade), a.dim)


def interior(v, a):
    """Contraction iota_v a; a 0-form contracts to zero."""
    v = np.asarray(v)
    if a.grade == 0:
        return KVector.zeros(0, a.dim)
    return KVector(a.grade - 1, interior_coeffs(v, a.coeffs, a.dim, a.grade), a.dim)


def derivation(m, a, transpose=False):
    """Derivation of the exterior algebra extending the covector map `m`."""
    return KVector(a.grade, derivation_coeffs(np.asarray(m), a.coeffs, a.dim, a.grade, transpose), a.dim)


def evaluate(a, vectors):
    """a(v_1, ..., v_k) for the columns of `vectors`."""
    if a.grade == 0:
        return a.coeffs[0]
    vectors = np.asarray(vectors)
    if vectors.ndim == 1:
        vectors = vectors[:, None]
    return pullback(a, vectors).coeffs[0]


def pullback(a, mat):
    """Pull `a` back along the linear map whose matrix (a.dim x m) has the images of the new basis as columns."""
    mat = np.asarray(mat)
    m = mat.shape[1]
    k = a.grade
    src = basis(a.dim, k)
    dst = basis(m, k)
    if k == 0:
        return KVector(0, a.coeffs.copy(), m)
    if mat.dtype == object:
        out = []
        for cols in dst:
            total = Fraction(0)
            for c, rows in zip(a.coeffs, src):
                if c != 0:
                    total = total + c * _exact_det(mat[np.ix_(rows, cols)])
            out.append(total)
        return KVector(k, np.array(out, dtype=object), m)
    rows = np.array(src, dtype=np.intp)
    cols = np.array(dst, dtype=np.intp)
    coeffs = a.coeffs.astype(float) if a.exact else a.coeffs
    minors = mat[rows[:, None, :, None], cols[None, :, None, :]]
    return KVector(k, coeffs @ np.linalg.det(minors), m)


def complement_sign(dim, idx):
    """Sign s with e^idx ^ e^(complement) = s * e^(0..dim-1)."""
    rest = tuple(i for i in range(dim) if i not in idx)
    return sort_sign(tuple(idx) + rest)[1], rest


class Metric6:
    """Positive-definite metric with a reference orientation form."""

    def __init__(self, g=None, eps=None):
        g = np.eye(DIM) if g is None else np.asarray(g, dtype=float)
        if g.shape != (DIM, DIM) or not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise InvalidMetric("metric must be a symmetric 6x6 matrix")
        eig = np.linalg.eigvalsh(g)
        if eig.min() <= 0:
            raise InvalidMetric("metric is not positive definite", min_eigenvalue=float(eig.min()))
        eps = default_orientation() if eps is None else eps
        if eps.grade != DIM or eps.top() == 0:
            raise InvalidMetric("orientation must be a nonzero 6-form")
        self.g = g
        self.eps = eps
        self.g_inv = np.linalg.inv(g)

    @property
    def orientation_sign(self):
        return 1.0 if float(self.eps.top()) > 0 else -1.0

    @property
    def volume(self):
        return KVector(DIM, np.array([self.orientation_sign * math.sqrt(np.linalg.det(self.g))]))

    def gram(self, grade):
        """Induced inner product on grade-k forms, as a matrix on the coefficient basis."""
        idx = np.array(basis(DIM, grade), dtype=np.intp)
        if grade == 0:
            return np.ones((1, 1))
        return np.linalg.det(self.g_inv[idx[:, None, :, None], idx[None, :, None, :]])

    def inner(self, a, b):
        return a.coeffs.astype(float) @ self.gram(a.grade) @ b.coeffs.astype(float)


def default_orientation(exact=True):
    return KVector.basis_form(range(DIM), exact=exact)


@lru_cache(maxsize=None)
def _complement_permutation(grade):
    perm = np.zeros((math.comb(DIM, grade), math.comb(DIM, DIM - grade)))
    index = basis_index(DIM, DIM - grade)
    for i, idx in enumerate(basis(DIM, grade)):
        s, rest = complement_sign(DIM, idx)
        perm[i, index[rest]] = s
    return perm


def hodge_star(m, a):
    """Hodge star of `m`: b ^ *a = <b, a> vol_m for every b of the same grade."""
    w = _complement_permutation(a.grade)
    vol = m.volume.top()
    return KVector(DIM - a.grade, vol * (w.T @ (m.gram(a.grade) @ a.coeffs.astype(float))))


def tangent_frame_s2t3(point):
    """Rational-friendly frame of T(S^2 x T^3) at `point`: two of x cross e_k and d/dy_1..3."""
    x = point[:3]
    order = sorted(range(3), key=lambda k: abs(float(x[k])))
    cols = []
    for k in sorted(order[:2]):
        e = [0, 0, 0]
        e[k] = 1
        cols.append([x[1] * e[2] - x[2] * e[1], x[2] * e[0] - x[0] * e[2], x[0] * e[1] - x[1] * e[0], 0, 0, 0])
    for k in range(3):
        col = [0] * 6
        col[3 + k] = 1
        cols.append(col)
    exact = all(isinstance(c, (int, Fraction)) for c in point)
    return np.array(cols, dtype=object if exact else float).T


def check_on_sphere(point, tol=1e-12):
    x = point[:3]
    r2 = sum(c * c for c in x)
    if isinstance(r2, Fraction) or all(isinstance(c, (int, Fraction)) for c in x):
        if r2 != 1:
            raise NotOnSphere(f"point {tuple(str(c) for c in x)} is not on the unit sphere")
    elif abs(float(r2) - 1.0) > tol:
        raise NotOnSphere(f"point {tuple(float(c) for c in x)} is not on the unit sphere", radius2=float(r2))


def restrict_tangential(a, point, tangent_basis=None):
    """Pull a form (KVector or PolyForm) back to T_p(S^2 x T^3) in the given frame."""
    point = tuple(point) + (0,) * (DIM - len(point))
    check_on_sphere(point)
    if hasattr(a, "evaluate"):
        a = a.evaluate(point)
    frame = tangent_frame_s2t3(point) if tangent_basis is None else np.asarray(tangent_basis)
    if frame.dtype != object and a.exact:
        a = a.astype(float)
    return pullback(a, frame)
