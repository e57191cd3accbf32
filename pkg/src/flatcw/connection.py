"""Connections on the trivial bundle T^n x G, curvature, gauge action, flat generators.

In the global trivialisation a connection is a Lie-valued 1-form ``A`` and a
gauge transformation is a grid of group matrices ``Phi``.  Conventions:

    F^A      = dA + 1/2 [A ^ A],       [A ^ A](d_i, d_j) = 2 [A_i, A_j]
    nabla^A  = d + [A ^ .]
    Phi . A  = Phi A Phi^{-1} - (d Phi) Phi^{-1}
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import (DegreeError, DimensionError, GridMismatchError, InvalidDirection,
                     InvalidGaugeField, NonCommutingError)
from .forms import GridForm, TorusGrid, exterior_derivative, multi_indices, partial_derivative, wedge
from .lie import LieAlgebraBasis, bracket

__all__ = [
    "Connection",
    "GaugeField",
    "curvature",
    "covariant_derivative",
    "gauge_transform",
    "flatness_residual",
    "FLAT_TOL",
    "cartan_flat",
    "winding_gauge",
    "winding_numbers",
    "pure_gauge",
    "adjoint_form",
    "exp_gauge",
    "quaternion_gauge",
    "random_trig_field",
    "random_connection",
    "random_tangent",
    "random_gauge_field",
]

FLAT_TOL = 1e-7
UNITARY_TOL = 1e-10
SMOOTH_TAIL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Connection:
    """Lie-valued 1-form A = A_i dx^i on the trivial bundle."""

    form: GridForm

    def __post_init__(self):
        if not self.form.is_lie or self.form.degree != 1:
            raise DegreeError("a connection is a Lie-valued 1-form")

    @classmethod
    def zero(cls, grid: TorusGrid, algebra: LieAlgebraBasis) -> "Connection":
        return cls(GridForm.zeros(grid, 1, algebra))

    @classmethod
    def from_components(cls, grid: TorusGrid, algebra: LieAlgebraBasis, components: dict) -> "Connection":
        """``components`` maps axis i to a coefficient vector (m,) or field (m, *grid)."""
        return cls(GridForm.from_components(grid, 1, {(i,): v for i, v in components.items()}, algebra))

    @property
    def grid(self) -> TorusGrid:
        return self.form.grid

    @property
    def algebra(self) -> LieAlgebraBasis:
        return self.form.algebra

    @property
    def data(self) -> np.ndarray:
        return self.form.data

    def __add__(self, other):
        if isinstance(other, Connection):
            other = other.form
        if not isinstance(other, GridForm):
            return NotImplemented
        return Connection(self.form + other)

    __radd__ = __add__

    def __sub__(self, other):
        """Connection - Connection is a tangent vector (plain 1-form); Connection - form is a connection."""
        if isinstance(other, Connection):
            return self.form - other.form
        if isinstance(other, GridForm):
            return Connection(self.form - other)
        return NotImplemented

    def __mul__(self, c):
        if np.ndim(c) != 0:
            return NotImplemented
        return Connection(self.form * c)

    __rmul__ = __mul__

    def matrices(self) -> np.ndarray:
        """Matrix components, shape (n, *grid, d, d)."""
        return self.algebra.to_matrix(np.moveaxis(self.data, 1, 0))

    def __repr__(self) -> str:
        return f"Connection({self.algebra.name}, n={self.grid.n}, N={self.grid.N})"


def _matrix_partial(mats: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    """Spectral d/dx^axis of a matrix field of shape (*grid, d, d)."""
    moved = np.moveaxis(mats, (-2, -1), (0, 1))
    return np.moveaxis(partial_derivative(moved, grid, axis), (0, 1), (-2, -1))


@dataclass(frozen=True, eq=False)
class GaugeField:
    """Grid of group matrices Phi(x), shape (*grid, d, d)."""

    grid: TorusGrid
    algebra: LieAlgebraBasis
    matrices: np.ndarray

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=np.complex128)
        d = self.algebra.matrix_size
        if mats.shape != self.grid.shape + (d, d):
            raise DimensionError(f"gauge field must have shape {self.grid.shape + (d, d)}")
        if self.algebra.is_real:
            err = self.unitarity_defect(mats)
            if err > UNITARY_TOL:
                raise InvalidGaugeField(f"gauge field is not unitary (defect {err:.3e})")
        else:
            dets = np.abs(np.linalg.det(mats))
            if dets.min() < 1e-12:
                raise InvalidGaugeField("gauge field is singular somewhere")
        mats = mats.view()
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)

    @staticmethod
    def unitarity_defect(mats: np.ndarray) -> float:
        d = mats.shape[-1]
        return float(np.abs(np.conj(np.swapaxes(mats, -1, -2)) @ mats - np.eye(d)).max())

    @classmethod
    def identity(cls, grid: TorusGrid, algebra: LieAlgebraBasis) -> "GaugeField":
        d = algebra.matrix_size
        return cls(grid, algebra, np.broadcast_to(np.eye(d, dtype=np.complex128), grid.shape + (d, d)).copy())

    @classmethod
    def constant(cls, grid: TorusGrid, algebra: LieAlgebraBasis, g) -> "GaugeField":
        g = np.asarray(g, dtype=np.complex128)
        return cls(grid, algebra, np.broadcast_to(g, grid.shape + g.shape).copy())

    def inverse(self) -> np.ndarray:
        if self.algebra.is_real:
            return np.conj(np.swapaxes(self.matrices, -1, -2))
        return np.linalg.inv(self.matrices)

    def __matmul__(self, other: "GaugeField") -> "GaugeField":
        """Pointwise product (self o other): acting by it equals acting by other, then self."""
        if other.grid != self.grid:
            raise GridMismatchError("gauge fields on different grids")
        return GaugeField(self.grid, self.algebra, self.matrices @ other.matrices)

    def smoothness_tail(self) -> float:
        """Fraction of spectral energy of the matrix entries in modes with |k|_inf > N/4."""
        moved = np.moveaxis(self.matrices, (-2, -1), (0, 1))
        axes = tuple(range(2, moved.ndim))
        power = np.abs(scipy.fft.fftn(moved, axes=axes)) ** 2
        k = np.abs(scipy.fft.fftfreq(self.grid.N, d=1.0 / self.grid.N))
        kmax = np.zeros(self.grid.shape)
        for ax in range(self.grid.n):
            shape = [1] * self.grid.n
            shape[ax] = self.grid.N
            kmax = np.maximum(kmax, k.reshape(shape))
        tail = power[..., kmax > self.grid.N // 4].sum()
        return float(tail / power.sum())

    def validate(self) -> None:
        tail = self.smoothness_tail()
        if tail > SMOOTH_TAIL_TOL:
            raise InvalidGaugeField(f"gauge field is under-resolved (Fourier tail {tail:.3e})")

    def __repr__(self) -> str:
        return f"GaugeField({self.algebra.name}, n={self.grid.n}, N={self.grid.N})"


def _as_form(x) -> GridForm:
    return x.form if isinstance(x, Connection) else x


def curvature(A: Connection) -> GridForm:
    """F^A = dA + 1/2 [A ^ A] as a Lie-valued 2-form."""
    a = _as_form(A)
    dA = exterior_derivative(a)
    data = np.array(dA.data)
    pairs = multi_indices(a.grid.n, 2)
    for k, (i, j) in enumerate(pairs):
        # 1/2 [A ^ A] has dx^i ^ dx^j component [A_i, A_j]
        data[k] += bracket(a.algebra, a.data[i], a.data[j])
    return GridForm(a.grid, 2, data, a.algebra)


def covariant_derivative(A: Connection, xi: GridForm) -> GridForm:
    """nabla^A xi = d xi + [A ^ xi] for a Lie-valued form xi of degree < n."""
    a = _as_form(A)
    if not xi.is_lie or xi.algebra.name != a.algebra.name:
        raise DimensionError("covariant derivative needs a form with values in the connection's algebra")
    if xi.grid != a.grid:
        raise GridMismatchError("connection and form live on different grids")
    return exterior_derivative(xi) + wedge(a, xi, "bracket")


def flatness_residual(A: Connection) -> float:
    """Max-norm of the curvature; A counts as flat when this is <= FLAT_TOL."""
    return curvature(A).max_norm()


def gauge_transform(phi: GaugeField, A: Connection) -> Connection:
    """Phi . A = Phi A Phi^{-1} - (d Phi) Phi^{-1}."""
    A = A if isinstance(A, Connection) else Connection(A)
    if phi.grid != A.grid:
        raise GridMismatchError("gauge field and connection on different grids")
    if phi.algebra.name != A.algebra.name:
        raise DimensionError("gauge field and connection use different algebras")
    algebra = A.algebra
    P, Pinv = phi.matrices, phi.inverse()
    mats = A.matrices()
    real = algebra.is_real and not np.iscomplexobj(A.data)
    out = []
    for i in range(A.grid.n):
        Mi = P @ mats[i] @ Pinv - _matrix_partial(P, A.grid, i) @ Pinv
        c = algebra.from_matrix(Mi, keep_complex=True)
        # for compact algebras the result is anti-Hermitian up to resolution error
        out.append(c.real if real else c)
    data = np.stack(out)
    return Connection(GridForm(A.grid, 1, data, algebra))


def adjoint_form(phi: GaugeField, xi: GridForm) -> GridForm:
    """Pointwise Ad_Phi xi = Phi xi Phi^{-1} of a Lie-valued form of any degree."""
    if phi.grid != xi.grid:
        raise GridMismatchError("gauge field and form on different grids")
    algebra = xi.algebra
    mats = algebra.to_matrix(np.moveaxis(xi.data, 1, 0))
    conj = phi.matrices @ mats @ phi.inverse()
    data = algebra.from_matrix(conj, keep_complex=True)
    data = np.moveaxis(data, 0, 1)
    if algebra.is_real and not np.iscomplexobj(xi.data):
        data = data.real
    return GridForm(xi.grid, xi.degree, np.ascontiguousarray(data), algebra)


def pure_gauge(phi: GaugeField) -> Connection:
    """The flat connection Phi . 0 = -(d Phi) Phi^{-1}."""
    return gauge_transform(phi, Connection.zero(phi.grid, phi.algebra))


def cartan_flat(grid: TorusGrid, algebra: LieAlgebraBasis, thetas, tol: float = 1e-12) -> Connection:
    """Constant connection sum_i theta_i dx^i from pairwise commuting elements."""
    thetas = [np.asarray(t) for t in thetas]
    if len(thetas) != grid.n:
        raise DimensionError(f"need {grid.n} algebra elements, got {len(thetas)}")
    for i in range(grid.n):
        for j in range(i + 1, grid.n):
            c = bracket(algebra, thetas[i], thetas[j])
            norm = float(np.abs(c).max())
            if norm > tol:
                raise NonCommutingError((i, j), norm)
    return Connection.from_components(grid, algebra, dict(enumerate(thetas)))


def _matrix_exp_field(algebra: LieAlgebraBasis, X: np.ndarray) -> np.ndarray:
    """exp of an algebra-valued field X (m, *grid), returned as (*grid, d, d)."""
    M = algebra.to_matrix(X)
    if algebra.is_real and not np.iscomplexobj(X):
        # M anti-Hermitian: M = -i H with H Hermitian
        w, V = np.linalg.eigh(1j * M)
        return (V * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))
    w, V = np.linalg.eig(M)
    return (V * np.exp(w)[..., None, :]) @ np.linalg.inv(V)


def exp_gauge(grid: TorusGrid, algebra: LieAlgebraBasis, X) -> GaugeField:
    """Phi(x) = exp(X(x)) for an algebra-valued grid function X of shape (m, *grid)."""
    X = np.asarray(X)
    if X.shape != (algebra.dim,) + grid.shape:
        raise DimensionError("exponent must have shape (m, *grid)")
    return GaugeField(grid, algebra, _matrix_exp_field(algebra, X))


def winding_gauge(grid: TorusGrid, algebra: LieAlgebraBasis, w, direction, tol: float = 1e-10) -> GaugeField:
    """Phi(x) = exp((sum_i w_i x^i) H) for a direction H with exp(H) = 1.

    ``direction`` is a coefficient vector or a d x d matrix.
    """
    w = np.asarray(w)
    if w.shape != (grid.n,) or not np.all(np.equal(np.round(w), w)):
        raise DimensionError(f"winding vector must be {grid.n} integers")
    H = np.asarray(direction, dtype=np.complex128)
    if H.ndim == 1:
        H = algebra.to_matrix(H)
    d = algebra.matrix_size
    if np.abs(scipy.linalg.expm(H) - np.eye(d)).max() > tol:
        raise InvalidDirection("exp(H) != 1: the winding gauge would not be single valued")
    lam, V = np.linalg.eig(H)
    phase = sum(wi * xi for wi, xi in zip(w, grid.coords()))
    mats = (V * np.exp(phase[..., None] * lam)[..., None, :]) @ np.linalg.inv(V)
    return GaugeField(grid, algebra, mats)


def winding_numbers(phi: GaugeField, direction) -> np.ndarray:
    """Average of the H-component of (d_i Phi) Phi^{-1} over the torus, per axis."""
    H = np.asarray(direction, dtype=np.complex128)
    if H.ndim == 1:
        H = phi.algebra.to_matrix(H)
    norm = np.trace(H @ np.conj(H.T)).real
    Pinv = phi.inverse()
    out = []
    for i in range(phi.grid.n):
        R = _matrix_partial(phi.matrices, phi.grid, i) @ Pinv
        proj = np.einsum("...ab,ab->...", R, np.conj(H))
        out.append(proj.mean().real / norm)
    return np.array(out)


def quaternion_gauge(grid: TorusGrid, algebra: LieAlgebraBasis | None = None, axes=(0, 1, 2),
                     mass: float = 2.0, offsets=(0.0, 0.0, 0.0)) -> GaugeField:
    """SU(2)-valued map of nonzero degree built from a unit quaternion field.

    q = (mass + sum_a cos 2pi y_a, sin 2pi y_1, sin 2pi y_2, sin 2pi y_3) / |.|
    with y_a = x^{axes[a]} + offsets[a] (an axis of None means y_a = offsets[a],
    which lets one angle play the role of a loop parameter).  For 1 < mass < 3
    the map T^3 -> S^3 has degree +-1.  Unlisted coordinates are ignored.
    """
    from .lie import su2
    algebra = algebra or su2()
    if algebra.kind != "su2":
        raise DimensionError("quaternion_gauge produces SU(2) fields")
    x = grid.coords()
    ang = [2 * np.pi * ((x[a] if a is not None else np.zeros(grid.shape)) + o)
           for a, o in zip(axes, offsets)]
    q = np.stack([mass + sum(np.cos(t) for t in ang)] + [np.sin(t) for t in ang])
    q = q / np.sqrt((q ** 2).sum(axis=0))
    sigma = np.array([[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]])
    mats = q[0][..., None, None] * np.eye(2) + 1j * np.einsum("a...,aij->...ij", q[1:], sigma)
    return GaugeField(grid, algebra, mats)


# random band-limited data -------------------------------------------------------

def random_trig_field(grid: TorusGrid, rng: np.random.Generator, max_mode: int = 2,
                      lead_shape=(), amplitude: float = 1.0, complex_values: bool = False) -> np.ndarray:
    """Random trigonometric polynomial with all modes |k_i| <= max_mode, shape lead + grid."""
    if 2 * max_mode >= grid.N // 2:
        raise DimensionError("max_mode too large for the grid")
    n, N = grid.n, grid.N
    size = 2 * max_mode + 1
    coeffs = rng.normal(size=tuple(lead_shape) + (size,) * n) + 1j * rng.normal(size=tuple(lead_shape) + (size,) * n)
    spec = np.zeros(tuple(lead_shape) + grid.shape, dtype=np.complex128)
    idx = np.r_[0:max_mode + 1, N - max_mode:N]
    order = np.r_[max_mode:size, 0:max_mode]
    spec[(Ellipsis,) + np.ix_(*([idx] * n))] = coeffs[(Ellipsis,) + np.ix_(*([order] * n))]
    field = np.fft.ifftn(spec, axes=tuple(range(len(lead_shape), len(lead_shape) + n))) * N ** n
    scale = amplitude / math.sqrt(2 * size ** n)
    if complex_values:
        return field * scale
    return field.real * scale * math.sqrt(2)


def random_connection(grid: TorusGrid, algebra: LieAlgebraBasis, rng: np.random.Generator,
                      max_mode: int = 2, amplitude: float = 0.5) -> Connection:
    return Connection(GridForm(grid, 1, random_trig_field(
        grid, rng, max_mode, (grid.n, algebra.dim), amplitude, complex_values=not algebra.is_real), algebra))


def random_tangent(grid: TorusGrid, algebra: LieAlgebraBasis, rng: np.random.Generator,
                   max_mode: int = 2, amplitude: float = 0.5, degree: int = 1) -> GridForm:
    return GridForm(grid, degree, random_trig_field(
        grid, rng, max_mode, (math.comb(grid.n, degree), algebra.dim), amplitude,
        complex_values=not algebra.is_real), algebra)


def random_gauge_field(grid: TorusGrid, algebra: LieAlgebraBasis, rng: np.random.Generator,
                       max_mode: int = 1, amplitude: float = 0.3) -> GaugeField:
    X = random_trig_field(grid, rng, max_mode, (algebra.dim,), amplitude,
                          complex_values=not algebra.is_real)
    return exp_gauge(grid, algebra, X)
