#!/usr/bin/env python3
"""Grid-sampled differential forms on T^6 and on the masked B^3 x T^3.

Components are collocated at cell centres; `FormField.comps` has shape
grid.shape + (binom(6, k),). Periodic axes use the centred difference,
the x-axes of the ball grid use centred differences inside and one-sided
second-order differences on the two cells at each cube face. Every stencil
depends only on the index along its own axis, so stencils on different axes
commute and d o d vanishes up to rounding.

Pointwise maps (P, J, type projections) go through the batched kernels of
`hitchin` and are chunked over cells on the worker pool.
"""

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .errors import ConfigError, NotStable
from .exterior import DIM, KVector, basis, basis_index, sort_sign, wedge_coeffs
from .hitchin import analyze, batched_analysis, form_types, j_coeffs, nijenhuis_from_torsion, project_type_coeffs
from .workers import map_ordered

CHUNK = 8192
LAYER_PLANES = 3


@dataclass(frozen=True)
class Axis:
    size: int
    h: float
    periodic: bool
    origin: float = 0.0

    @property
    def centers(self):
        offset = 0.0 if self.periodic else 0.5
        return self.origin + (np.arange(self.size) + offset) * self.h


class Grid:
    """Six axes (x1, x2, x3, y1, y2, y3) with integration weights and an activity mask."""

    kind = "grid"

    def __init__(self, axes):
        self.axes = tuple(axes)
        self.shape = tuple(a.size for a in self.axes)
        self.cell_volume = float(np.prod([a.h for a in self.axes]))
        self.active = np.ones(self.shape, dtype=bool)
        self.boundary_layer = np.zeros(self.shape, dtype=bool)

    @property
    def npoints(self):
        return int(np.prod(self.shape))

    @property
    def weights(self):
        return np.where(self.active, self.cell_volume, 0.0)

    def coords(self):
        """Broadcastable coordinate arrays, one per axis."""
        out = []
        for i, axis in enumerate(self.axes):
            shape = [1] * DIM
            shape[i] = axis.size
            out.append(axis.centers.reshape(shape))
        return out

    def free_mask(self, constraint):
        if constraint == "periodic":
            return self.active.copy()
        if constraint == "boundary_zero":
            return self.active & ~self.boundary_layer
        raise ConfigError(f"unknown constraint {constraint!r}")

    def __eq__(self, other):
        return isinstance(other, Grid) and self.to_dict() == other.to_dict()

    __hash__ = None

    def to_dict(self):
        return {"kind": self.kind, "axes": [{"size": a.size, "h": a.h, "periodic": a.periodic, "origin": a.origin}
                                            for a in self.axes]}

    @staticmethod
    def from_dict(data):
        if data["kind"] == "T6":
            return GridT6(tuple(a["size"] for a in data["axes"]))
        if data["kind"] == "B3xT3":
            return GridBallT3(data["axes"][0]["size"], data["axes"][3]["size"])
        raise ConfigError(f"unknown grid kind {data['kind']!r}")


def _check_periodic_size(n, what):
    if n != 1 and (n < 4 or n % 2):
        raise ConfigError(f"{what} must be 1 or an even number >= 4, got {n}", size=n)


class GridT6(Grid):
    """Periodic grid on the unit torus; axes of size 1 carry fields constant along them."""

    kind = "T6"

    def __init__(self, shape):
        shape = (shape,) * DIM if isinstance(shape, int) else tuple(shape)
        if len(shape) != DIM:
            raise ConfigError(f"T6 grid needs {DIM} axis sizes, got {len(shape)}")
        for n in shape:
            _check_periodic_size(n, "T6 axis size")
        super().__init__([Axis(n, 1.0 / n, True) for n in shape])

    @classmethod
    def uniform(cls, n):
        return cls((n,) * DIM)


class GridBallT3(Grid):
    """Cube [-1, 1]^3 times the unit T^3, with the unit ball as active mask."""

    kind = "B3xT3"

    def __init__(self, nx, nt):
        if nx < 4 or nx % 2:
            raise ConfigError(f"nx must be an even number >= 4, got {nx}", nx=nx)
        _check_periodic_size(nt, "nt")
        box = Axis(nx, 2.0 / nx, False, -1.0)
        torus = Axis(nt, 1.0 / nt, True)
        super().__init__([box] * 3 + [torus] * 3)
        self.nx, self.nt = nx, nt
        c = box.centers
        r2 = c[:, None, None] ** 2 + c[None, :, None] ** 2 + c[None, None, :] ** 2
        ball = r2 <= 1.0
        edge = np.zeros_like(ball)
        for axis in range(3):
            for step in (1, -1):
                shifted = np.roll(ball, step, axis=axis)
                idx = [slice(None)] * 3
                idx[axis] = 0 if step == 1 else -1
                shifted[tuple(idx)] = False
                edge |= ball & ~shifted
        near_face = np.zeros_like(ball)
        for axis in range(3):
            idx = np.arange(nx)
            band = (idx < LAYER_PLANES) | (idx >= nx - LAYER_PLANES)
            shape = [1, 1, 1]
            shape[axis] = nx
            near_face |= np.broadcast_to(band.reshape(shape), ball.shape)
        layer = ball & (edge | near_face)
        self.active = np.broadcast_to(ball[..., None, None, None], self.shape).copy()
        self.boundary_layer = np.broadcast_to(layer[..., None, None, None], self.shape).copy()

    def center_index(self):
        """Index of an active cell nearest the origin of the ball, torus base 0."""
        k = self.nx // 2
        return (k, k, k, 0, 0, 0)


def _axis_derivative(f, axis, spec):
    """Derivative of f along `axis` (an axis of f), second order, difference-first."""
    n = spec.size
    if n == 1:
        return np.zeros_like(f)
    if spec.periodic:
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2.0 * spec.h)
    f = np.moveaxis(f, axis, 0)
    out = np.empty_like(f)
    out[1:-1] = (f[2:] - f[:-2]) / (2.0 * spec.h)
    out[0] = (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * spec.h)
    out[-1] = (4.0 * (f[-1] - f[-2]) - (f[-1] - f[-3])) / (2.0 * spec.h)
    return np.moveaxis(out, 0, axis)


@lru_cache(maxsize=None)
def _box_matrix(n, h):
    D = np.zeros((n, n))
    for i in range(1, n - 1):
        D[i, i - 1], D[i, i + 1] = -1.0, 1.0
    D[0, :3] = (-3.0, 4.0, -1.0)
    D[-1, -3:] = (1.0, -4.0, 3.0)
    return D / (2.0 * h)


def _axis_derivative_t(f, axis, spec):
    """Transpose of `_axis_derivative` with respect to the plain coefficient sum."""
    if spec.size == 1:
        return np.zeros_like(f)
    if spec.periodic:
        return -_axis_derivative(f, axis, spec)
    D = _box_matrix(spec.size, spec.h)
    return np.moveaxis(np.tensordot(D.T, np.moveaxis(f, axis, 0), axes=(1, 0)), 0, axis)


@lru_cache(maxsize=None)
def _d_table(k):
    """Entries (axis l, source component, target component, sign) of d on grade-k forms."""
    out = []
    src_index = basis(DIM, k)
    dst_index = basis_index(DIM, k + 1)
    for a, idx in enumerate(src_index):
        for l in range(DIM):
            if l in idx:
                continue
            merged, s = sort_sign((l,) + idx)
            out.append((l, a, dst_index[merged], s))
    return tuple(out)


class FormField:
    """A grade-k form sampled on a grid."""

    __slots__ = ("grid", "grade", "comps")
    __hash__ = None

    def __init__(self, grid, grade, comps):
        comps = np.asarray(comps)
        expected = grid.shape + (math.comb(DIM, grade),)
        if comps.shape != expected:
            raise ConfigError(f"field components have shape {comps.shape}, expected {expected}")
        self.grid = grid
        self.grade = grade
        self.comps = comps

    @classmethod
    def zeros(cls, grid, grade, dtype=float):
        return cls(grid, grade, np.zeros(grid.shape + (math.comb(DIM, grade),), dtype=dtype))

    @classmethod
    def constant(cls, grid, form):
        coeffs = np.asarray(form.coeffs.astype(float) if form.exact else form.coeffs)
        return cls(grid, form.grade, np.broadcast_to(coeffs, grid.shape + coeffs.shape).copy())

    @classmethod
    def from_function(cls, grid, grade, fn):
        """`fn(coords)` returns {component tuple or name string: array} broadcastable to the grid."""
        out = cls.zeros(grid, grade)
        for key, values in fn(grid.coords()).items():
            unit = KVector.from_terms({key: 1}, grade=grade, exact=True).coeffs.astype(float)
            out.comps += np.broadcast_to(values, grid.shape)[..., None] * unit
        return out

    def _same(self, other):
        if self.grade != other.grade or self.grid.shape != other.grid.shape:
            raise ConfigError("field grade or grid mismatch")

    def __add__(self, other):
        self._same(other)
        return FormField(self.grid, self.grade, self.comps + other.comps)

    def __sub__(self, other):
        self._same(other)
        return FormField(self.grid, self.grade, self.comps - other.comps)

    def __neg__(self):
        return FormField(self.grid, self.grade, -self.comps)

    def __mul__(self, scalar):
        return FormField(self.grid, self.grade, self.comps * scalar)

    __rmul__ = __mul__

    def copy(self):
        return FormField(self.grid, self.grade, self.comps.copy())

    @property
    def real(self):
        return FormField(self.grid, self.grade, np.real(self.comps))

    def at(self, index):
        return KVector(self.grade, self.comps[tuple(index)])

    def flat(self):
        return self.comps.reshape(-1, self.comps.shape[-1])

    def norm(self):
        """Weighted L2 norm over the active cells."""
        w = self.grid.weights[..., None]
        return float(np.sqrt(np.sum(w * np.abs(self.comps) ** 2)))

    def max_abs(self, mask=None):
        values = np.abs(self.comps)
        if mask is not None:
            values = values[mask]
        return float(values.max(initial=0.0))

    def inner(self, other):
        self._same(other)
        return float(np.sum(self.grid.weights[..., None] * self.comps * other.comps))


def d_field(a):
    """Discrete exterior derivative."""
    if a.grade >= DIM:
        raise ConfigError("d of a top-degree field")
    out = np.zeros(a.grid.shape + (math.comb(DIM, a.grade + 1),), dtype=a.comps.dtype)
    by_axis = {}
    for l, src, dst, s in _d_table(a.grade):
        if a.grid.axes[l].size == 1:
            continue
        if l not in by_axis:
            by_axis[l] = _axis_derivative(a.comps, l, a.grid.axes[l])
        out[..., dst] += s * by_axis[l][..., src]
    return FormField(a.grid, a.grade + 1, out)


def d_transpose(b):
    """Adjoint of d_field for the unweighted coefficient sum over all cells."""
    k = b.grade - 1
    out = np.zeros(b.grid.shape + (math.comb(DIM, k),), dtype=b.comps.dtype)
    for l in range(DIM):
        spec = b.grid.axes[l]
        if spec.size == 1:
            continue
        entries = [(src, dst, s) for ll, src, dst, s in _d_table(k) if ll == l]
        dst = [e[1] for e in entries]
        gathered = b.comps[..., dst] * np.array([e[2] for e in entries], dtype=float)
        moved = _axis_derivative_t(gathered, l, spec)
        for j, (src, _, _) in enumerate(entries):
            out[..., src] += moved[..., j]
    return FormField(b.grid, k, out)


def wedge_fields(a, b):
    comps = wedge_coeffs(a.comps, b.comps, DIM, a.grade, b.grade)
    return FormField(a.grid, a.grade + b.grade, comps)


def _chunked(fn, arrays, workers=None, desc=None):
    n = arrays[0].shape[0]
    bounds = [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]
    parts = map_ordered(lambda b: fn(*[arr[b[0]:b[1]] for arr in arrays]), bounds, workers, desc)
    if isinstance(parts[0], dict):
        return {key: np.concatenate([p[key] for p in parts]) for key in parts[0]}
    return np.concatenate(parts)


class FieldAnalysis:
    """Pointwise stable-form data of a 3-form field."""

    def __init__(self, field, data):
        self.field = field
        self.grid = field.grid
        shape = field.grid.shape
        self.hitchin_lambda = data["lambda"].reshape(shape)
        self.stable = data["stable"].reshape(shape)
        self.I = data["I"].reshape(shape + (DIM, DIM))
        self.A = data["A"].reshape(-1, DIM, DIM)
        self.P = FormField(field.grid, 3, data["P"].reshape(shape + (20,)))
        self.vol = data["vol"].reshape(shape)

    def require_stable(self):
        if not self.stable.all():
            flat = int(np.argmin(self.stable.reshape(-1)))
            cell = tuple(int(i) for i in np.unravel_index(flat, self.grid.shape))
            lam = float(self.hitchin_lambda[cell])
            raise NotStable(f"field is not stable at cell {cell} (lambda={lam:.6g})", hitchin_lambda=lam, cell=cell)
        return self

    def min_neg_lambda(self):
        return float(np.min(-self.hitchin_lambda[self.grid.active]))

    def apply_j(self, rho, transpose=False, workers=None):
        comps = _chunked(lambda A, r: j_coeffs(A, r, transpose), [self.A, rho.flat()], workers)
        return FormField(rho.grid, 3, comps.reshape(rho.comps.shape))

    def type_project(self, a, p, q, workers=None):
        comps = _chunked(lambda A, x: project_type_coeffs(A, x, a.grade, p, q), [self.A, a.flat()], workers)
        return FormField(a.grid, a.grade, comps.reshape(a.comps.shape))

    def type_components(self, a, workers=None):
        return {(p, q): self.type_project(a, p, q, workers) for p, q in form_types(a.grade)}


def pointwise_analysis(psi, workers=None, require_stable=True):
    if psi.grade != 3:
        raise ConfigError("pointwise analysis needs a 3-form field")
    data = _chunked(batched_analysis, [psi.flat()], workers)
    out = FieldAnalysis(psi, data)
    return out.require_stable() if require_stable else out


def torsion_residual(psi, workers=None, analysis=None):
    """dP(psi) for a stable 3-form field."""
    analysis = analysis or pointwise_analysis(psi, workers)
    return d_field(analysis.P)


def hitchin_volume(psi, workers=None, analysis=None):
    analysis = analysis or pointwise_analysis(psi, workers)
    return float(np.sum(psi.grid.weights * analysis.vol))


def djd_apply(base, alpha, workers=None, analysis=None):
    """d J_base d alpha."""
    analysis = analysis or pointwise_analysis(base, workers)
    return d_field(analysis.apply_j(d_field(alpha), workers=workers))


def _flat_zbar(conjugate):
    out = []
    for l in range(3):
        dz = np.zeros(DIM, dtype=complex)
        dz[l], dz[3 + l] = 1.0, (-1j if conjugate else 1j)
        out.append(dz)
    return out


def flat_dolbeault(a, antiholomorphic):
    """del or delbar for the standard structure, assembled from complex coordinate stencils."""
    out = np.zeros(a.grid.shape + (math.comb(DIM, a.grade + 1),), dtype=complex)
    for l, dz in enumerate(_flat_zbar(antiholomorphic)):
        dx = _axis_derivative(a.comps, l, a.grid.axes[l])
        dy = _axis_derivative(a.comps, 3 + l, a.grid.axes[3 + l])
        dzl = 0.5 * (dx + 1j * dy) if antiholomorphic else 0.5 * (dx - 1j * dy)
        out += wedge_coeffs(dz, dzl, DIM, 1, a.grade)
    return FormField(a.grid, a.grade + 1, out)


def flat_ddbar(a):
    """2i del delbar for the standard flat structure."""
    return flat_dolbeault(flat_dolbeault(a, True), False) * 2j


class DDecomposition:
    """Type components of d(phi) for phi of type (p, q)."""

    def __init__(self, p, q, parts):
        self.p, self.q = p, q
        self.parts = parts

    def _get(self, key):
        return self.parts.get(key)

    @property
    def n_prime(self):
        return self._get((self.p + 2, self.q - 1))

    @property
    def del_part(self):
        return self._get((self.p + 1, self.q))

    @property
    def delbar_part(self):
        return self._get((self.p, self.q + 1))

    @property
    def n_double_prime(self):
        return self._get((self.p - 1, self.q + 2))

    def four(self):
        keys = [(self.p + 2, self.q - 1), (self.p + 1, self.q), (self.p, self.q + 1), (self.p - 1, self.q + 2)]
        return {k: self.parts[k] for k in keys if k in self.parts}

    def total(self):
        fields = list(self.four().values())
        out = fields[0]
        for f in fields[1:]:
            out = out + f
        return out


def decompose_d(analysis, phi, p, q, workers=None):
    dphi = d_field(phi)
    parts = analysis.type_components(dphi, workers)
    return DDecomposition(p, q, parts)


def integrability_residual(analysis, phi01, workers=None):
    """(0,3) part of d(pi^{0,2} d phi) + d(pi^{1,1} d phi) for a (0,1) field phi."""
    dphi = d_field(phi01)
    part02 = analysis.type_project(dphi, 0, 2, workers)
    part11 = analysis.type_project(dphi, 1, 1, workers)
    return analysis.type_project(d_field(part02) + d_field(part11), 0, 3, workers)


def nijenhuis_field(analysis, dP, index, type_tol=1e-6):
    """Pointwise N'' at one cell, recovered from the torsion field."""
    return nijenhuis_from_torsion(analyze(analysis.field.at(index)), dP.at(index), type_tol)


@dataclass(frozen=True)
class Cycle:
    """An axis-aligned 3-cycle: a coordinate torus fiber or the ball slice B^3 x {y}."""

    kind: str
    axes: tuple
    base: tuple

    @classmethod
    def torus_fiber(cls, axes=(3, 4, 5), base=(0,) * DIM):
        return cls("torus", tuple(sorted(axes)), tuple(base))

    @classmethod
    def ball_slice(cls, base=(0,) * DIM):
        return cls("ball", (0, 1, 2), tuple(base))

    @property
    def name(self):
        label = "".join(str(a + 1) for a in self.axes)
        return f"{self.kind}[{label}]@{','.join(str(b) for b in self.base)}"


def integrate_cycle(a, cycle):
    if a.grade != 3:
        raise ConfigError("cycle integrals need a 3-form field")
    grid = a.grid
    comp = basis_index(DIM, 3)[cycle.axes]
    if cycle.kind == "torus":
        if not all(grid.axes[ax].periodic for ax in cycle.axes):
            raise ConfigError(f"torus fiber along non-periodic axes {cycle.axes}")
        index = [slice(None) if i in cycle.axes else cycle.base[i] for i in range(DIM)]
        h = float(np.prod([grid.axes[ax].h for ax in cycle.axes]))
        return float(np.sum(a.comps[tuple(index) + (comp,)]) * h)
    if cycle.kind == "ball":
        if not isinstance(grid, GridBallT3):
            raise ConfigError("ball slices exist only on the B3xT3 grid")
        index = (slice(None),) * 3 + tuple(cycle.base[3:])
        h = float(np.prod([grid.axes[ax].h for ax in range(3)]))
        values = np.where(grid.active[index], a.comps[index + (comp,)], 0.0)
        return float(np.sum(values) * h)
    raise ConfigError(f"unsupported cycle kind {cycle.kind!r}")


def default_cycles(grid):
    if isinstance(grid, GridBallT3):
        return [Cycle.torus_fiber((3, 4, 5), grid.center_index()), Cycle.ball_slice((0,) * DIM)]
    return [Cycle.torus_fiber(axes) for axes in basis(DIM, 3)]


def period_table(a, cycles=None):
    return {c.name: integrate_cycle(a, c) for c in (cycles or default_cycles(a.grid))}


def dump_field(field, path):
    """JSON header plus a row-major little-endian float64 sidecar `<path>.bin`."""
    path = Path(path)
    sidecar = path.with_suffix(".bin")
    header = {
        "grid": field.grid.to_dict(),
        "grade": field.grade,
        "component_order": [" ".join(str(i + 1) for i in idx) for idx in basis(DIM, field.grade)],
        "dtype": "<f8",
        "shape": list(field.comps.shape),
        "data": sidecar.name,
    }
    path.write_text(json.dumps(header, indent=2, sort_keys=True))
    np.ascontiguousarray(field.comps, dtype="<f8").tofile(sidecar)
    return sidecar


def load_field(path):
    path = Path(path)
    header = json.loads(path.read_text())
    grid = Grid.from_dict(header["grid"])
    comps = np.fromfile(path.parent / header["data"], dtype=header["dtype"]).reshape(header["shape"])
    return FormField(grid, header["grade"], comps.astype(float))


def smooth_random_field(grid, grade, rng, amplitude=1.0):
    """Lowest-mode trigonometric field: per component, random sin/cos of each active axis plus one cross term."""
    coords = grid.coords()
    active = [i for i, axis in enumerate(grid.axes) if axis.size > 1]
    comps = np.zeros(grid.shape + (math.comb(DIM, grade),))
    for c in range(comps.shape[-1]):
        acc = np.zeros(grid.shape)
        for i in active:
            s, k = rng.standard_normal(2)
            acc = acc + s * np.sin(2 * np.pi * coords[i]) + k * np.cos(2 * np.pi * coords[i])
        if len(active) >= 2:
            i, j = rng.choice(active, size=2, replace=False)
            acc = acc + rng.standard_normal() * np.sin(2 * np.pi * (coords[i] + coords[j]))
        comps[..., c] = acc
    return FormField(grid, grade, amplitude * comps)


def bump(grid, radius=0.6):
    """Smooth bump in the ball coordinates, supported in |x| <= radius, equal to 1 at the centre."""
    x1, x2, x3 = grid.coords()[:3]
    s = (x1 ** 2 + x2 ** 2 + x3 ** 2) / radius ** 2
    inside = s < 1.0
    out = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - s, 1.0)), 0.0)
    return np.broadcast_to(out, grid.shape).copy()
