"""Bidegree calculus on the complex torus T^{2m} = C^m / Z^{2m}.

Real axes are paired as z^j = x^{2j} + i x^{2j+1} (0-based).  The complex
coframe is ordered (dz^1, dzbar^1, dz^2, dzbar^2, ...); a q-form changes
frame through the q-th compound of the 1-form change-of-basis matrix.
"""

from __future__ import annotations

import functools
import warnings
from dataclasses import dataclass

import numpy as np

from .connection import Connection, curvature
from .errors import BidegreeError, DegreeError, DimensionError
from .forms import GridForm, TorusGrid, closed_tolerance, exterior_derivative, multi_indices, period_vector
from .invariants.core import InvariantReport, _lambda_sum, beta, beta_variation, pairwise_sum
from .invariants.families import ConnectionFamily
from .invariants.quadrature import ParameterDomain
from .lie import InvariantPolynomial

__all__ = [
    "ComplexStructure",
    "BigradedForm",
    "bidegree_project",
    "dbar",
    "del_",
    "f02_residual",
    "F02_TOL",
    "beta_tilde",
    "lambda_tilde",
    "dbar_variation_residual",
]

F02_TOL = 1e-7


@functools.lru_cache(maxsize=None)
def _frame_matrices(n: int, q: int) -> tuple:
    """(to_complex, to_real) compound matrices acting on the component axis of q-forms."""
    M = np.zeros((n, n), dtype=np.complex128)
    for j in range(n // 2):
        x, y = 2 * j, 2 * j + 1
        # dx = (dz + dzbar) / 2,  dy = (dz - dzbar) / (2i)
        M[x, x], M[y, x] = 0.5, 0.5
        M[x, y], M[y, y] = 0.5 / 1j, -0.5 / 1j
    Minv = np.linalg.inv(M)
    idx = multi_indices(n, q)
    C = np.empty((len(idx), len(idx)), dtype=np.complex128)
    Cinv = np.empty_like(C)
    for a, K in enumerate(idx):
        for b, I in enumerate(idx):
            C[a, b] = np.linalg.det(M[np.ix_(K, I)]) if q else 1.0
            Cinv[a, b] = np.linalg.det(Minv[np.ix_(K, I)]) if q else 1.0
    C.setflags(write=False)
    Cinv.setflags(write=False)
    return C, Cinv


@functools.lru_cache(maxsize=None)
def _bidegrees(n: int, q: int) -> tuple:
    """Bidegree (a, b) of each complex-frame basis q-form."""
    return tuple((sum(1 for i in K if i % 2 == 0), sum(1 for i in K if i % 2 == 1))
                 for K in multi_indices(n, q))


@dataclass(frozen=True)
class ComplexStructure:
    """Standard complex structure on an even-dimensional torus."""

    grid: TorusGrid

    def __post_init__(self):
        if self.grid.n % 2:
            raise DimensionError(f"a complex structure needs an even torus dimension, got {self.grid.n}")

    @property
    def m(self) -> int:
        return self.grid.n // 2

    def bidegrees(self, q: int) -> tuple:
        return _bidegrees(self.grid.n, q)

    def to_complex(self, omega: GridForm) -> np.ndarray:
        """Coefficients in the (dz, dzbar) frame, same array layout as ``omega.data``."""
        C, _ = _frame_matrices(self.grid.n, omega.degree)
        return np.tensordot(C, omega.data, axes=(1, 0))

    def from_complex(self, coeffs: np.ndarray, degree: int, algebra=None) -> GridForm:
        _, Cinv = _frame_matrices(self.grid.n, degree)
        return GridForm(self.grid, degree, np.tensordot(Cinv, coeffs, axes=(1, 0)), algebra)

    def project(self, omega: GridForm, a: int, b: int) -> GridForm:
        if a + b != omega.degree:
            raise BidegreeError(f"bidegree ({a}, {b}) does not sum to the form degree {omega.degree}")
        c = self.to_complex(omega)
        keep = np.array([bd == (a, b) for bd in self.bidegrees(omega.degree)])
        c[~keep] = 0
        return self.from_complex(c, omega.degree, omega.algebra)


def _structure(omega_or_grid) -> ComplexStructure:
    grid = omega_or_grid if isinstance(omega_or_grid, TorusGrid) else omega_or_grid.grid
    return ComplexStructure(grid)


def bidegree_project(omega: GridForm, a: int, b: int) -> GridForm:
    """rho^{a,b}(omega) in the real frame, with complex coefficients."""
    return _structure(omega).project(omega, a, b)


@dataclass(frozen=True, eq=False)
class BigradedForm:
    """A form split into its (a, b) parts; ``parts`` is keyed by bidegree."""

    form: GridForm
    parts: dict

    @classmethod
    def split(cls, omega: GridForm) -> "BigradedForm":
        cs = _structure(omega)
        q = omega.degree
        parts = {(a, q - a): cs.project(omega, a, q - a)
                 for a in range(max(0, q - cs.m), min(q, cs.m) + 1)}
        return cls(omega, parts)

    def reconstruct(self) -> GridForm:
        return pairwise_sum([self.parts[k] for k in sorted(self.parts)])

    def __getitem__(self, bd) -> GridForm:
        q = self.form.degree
        if bd[0] + bd[1] != q:
            raise BidegreeError(f"bidegree {bd} does not sum to {q}")
        if bd not in self.parts:
            return GridForm.zeros(self.form.grid, q, self.form.algebra, dtype=np.complex128)
        return self.parts[bd]


def _split_d(omega: GridForm) -> tuple:
    """(del omega, dbar omega) via rho^{a+1,b} d and rho^{a,b+1} d on each (a, b) part."""
    if omega.degree >= omega.grid.n:
        raise DegreeError("the Dolbeault operators vanish on top-degree forms; refusing degree n input")
    cs = _structure(omega)
    q = omega.degree
    holo, anti = [], []
    bds = np.array(cs.bidegrees(q + 1))
    for a in range(q + 1):
        part = cs.project(omega, a, q - a)
        c = cs.to_complex(exterior_derivative(part))
        ch, ca = c.copy(), c.copy()
        ch[~((bds[:, 0] == a + 1) & (bds[:, 1] == q - a))] = 0
        ca[~((bds[:, 0] == a) & (bds[:, 1] == q - a + 1))] = 0
        holo.append(cs.from_complex(ch, q + 1, omega.algebra))
        anti.append(cs.from_complex(ca, q + 1, omega.algebra))
    return pairwise_sum(holo), pairwise_sum(anti)


def dbar(omega: GridForm) -> GridForm:
    return _split_d(omega)[1]


def del_(omega: GridForm) -> GridForm:
    return _split_d(omega)[0]


def f02_residual(A: Connection) -> float:
    """Largest (dzbar^i ^ dzbar^j) coefficient of F^A, over grid points and algebra entries."""
    F = curvature(A)
    cs = _structure(F)
    c = cs.to_complex(F)
    sel = [i for i, bd in enumerate(cs.bidegrees(2)) if bd == (0, 2)]
    return float(np.abs(c[sel]).max(initial=0.0))


def beta_tilde(p: InvariantPolynomial, A: Connection, *xis: GridForm, F: GridForm | None = None) -> GridForm:
    """rho^{0, 2r-k} of beta_k."""
    b = beta(p, A, *xis, F=F)
    return bidegree_project(b, 0, b.degree)


def lambda_tilde(p: InvariantPolynomial, k: int, family: ConnectionFamily, domain: ParameterDomain | None = None,
                 f02_tol: float = F02_TOL, workers: int | None = None) -> InvariantReport:
    """rho^{0, 2r-k} of the quadrature Lambda_k, with a dbar-closure report.

    Periods are subtorus integrals of the projected form and may be complex.
    Results outside 1 < k < r carry ``validated = False``.
    """
    form, domain, norms = _lambda_sum(p, k, family, domain, workers)
    q = form.degree
    cs = _structure(form)
    tilde = cs.project(form, 0, q)
    bnd = max((f02_residual(family.evaluate(u)) for u in family.boundary_points(domain)), default=0.0)
    if bnd > f02_tol:
        warnings.warn(f"family boundary leaves F^(0,2) (residual {bnd:.3e} > {f02_tol:.1e})", stacklevel=2)
    res = dbar(tilde).max_norm() if q < form.grid.n else 0.0
    tol = closed_tolerance(tilde)
    periods = period_vector(tilde, check_closed=False, normalization=p.normalization)
    class_level = 1 < k < p.degree
    meta = {
        "polynomial": p.descriptor,
        "normalization": p.normalization,
        "r": p.degree,
        "k": k,
        "bidegree": [0, q],
        "form_degree": q,
        "algebra": p.algebra.name,
        "grid": {"n": form.grid.n, "N": form.grid.N},
        "family": family.describe(),
        "domain": domain.describe(),
        "f02_tolerance": f02_tol,
        "closure": "dbar",
        "class_level_range": "1 < k < r",
    }
    return InvariantReport(tilde, periods, res, tol, class_level and bnd <= f02_tol, bnd, meta, norms)


def dbar_variation_residual(p: InvariantPolynomial, A: Connection, xis, t: float = 1e-4,
                            factor: float | None = None) -> float:
    """max |rho^{0,q} Delta_t beta_k - factor * dbar beta~_{k+1}| with k + 1 = len(xis).

    ``factor`` defaults to r - k.
    """
    xis = list(xis)
    k = len(xis) - 1
    if factor is None:
        factor = p.degree - k
    lhs = beta_tilde_of(beta_variation(p, A, xis, t))
    nxt = beta_tilde(p, A, *xis)
    if nxt.degree >= nxt.grid.n:
        rhs = GridForm.zeros(A.grid, lhs.degree, dtype=np.complex128)
    else:
        rhs = dbar(nxt)
    return (lhs - factor * rhs).max_norm()


def beta_tilde_of(omega: GridForm) -> GridForm:
    return bidegree_project(omega, 0, omega.degree)
