"""Matrix Lie algebras, adjoint action and Ad-invariant symmetric polynomials.

Elements of an algebra are plain coefficient arrays ``x`` of shape ``(m, ...)``
with respect to the stored basis ``B_a``; the matrix is ``sum_a x[a] B_a``.
Structure constants are stored as ``c[a, b, c]`` with ``[B_b, B_c] = c[a,b,c] B_a``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import _kernels
from .errors import ArityError, DimensionError, InvalidGroupElement

__all__ = [
    "LieAlgebraBasis",
    "InvariantPolynomial",
    "su2",
    "u",
    "gl",
    "algebra_by_name",
    "bracket",
    "adjoint",
    "polynomial_eval",
    "build_trace_polynomial",
    "su2_inner_product",
    "preset_polynomial",
    "POLYNOMIAL_PRESETS",
    "ALGEBRAS",
]


@dataclass(frozen=True, eq=False)
class LieAlgebraBasis:
    """A real or complex matrix Lie algebra with a fixed basis.

    ``kind`` is one of ``"su2"``, ``"u_m"``, ``"gl_m_complex"``.  For the
    compact real forms (``is_real``) coefficients are real; complex
    coefficients are still accepted and then describe the complexification.
    """

    name: str
    kind: str
    matrices: np.ndarray
    is_real: bool
    structure_constants: np.ndarray = field(init=False, repr=False)
    _pinv: np.ndarray = field(init=False, repr=False)
    _sparse: tuple = field(init=False, repr=False)

    def __post_init__(self):
        mats = np.asarray(self.matrices, dtype=np.complex128)
        if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
            raise DimensionError("basis must be an (m, d, d) array")
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        flat = mats.reshape(mats.shape[0], -1).T  # (d*d, m)
        pinv = np.linalg.pinv(flat)
        object.__setattr__(self, "_pinv", pinv)
        comm = np.einsum("bij,cjk->bcik", mats, mats) - np.einsum("cij,bjk->bcik", mats, mats)
        c = np.einsum("ad,bcd->abc", pinv, comm.reshape(self.dim, self.dim, -1))
        c[np.abs(c) < 1e-13] = 0.0
        if self.is_real:
            c = c.real.copy()
        c.setflags(write=False)
        object.__setattr__(self, "structure_constants", c)
        object.__setattr__(self, "_sparse", _kernels.sparse_entries(c))

    @property
    def dim(self) -> int:
        return self.matrices.shape[0]

    @property
    def matrix_size(self) -> int:
        return self.matrices.shape[1]

    @property
    def dtype(self):
        return np.float64 if self.is_real else np.complex128

    def to_matrix(self, x) -> np.ndarray:
        """Coefficients of shape (m, ...) to matrices of shape (..., d, d)."""
        x = np.asarray(x)
        if x.shape[0] != self.dim:
            raise DimensionError(f"expected {self.dim} coefficients, got {x.shape[0]}")
        return np.tensordot(x, self.matrices, axes=(0, 0))

    def from_matrix(self, M, keep_complex: bool = False) -> np.ndarray:
        """Matrices (..., d, d) to coefficients (m, ...), least-squares projected.

        For a real algebra the result is returned real when the imaginary part
        is at round-off level, unless ``keep_complex``.
        """
        M = np.asarray(M)
        d = self.matrix_size
        if M.shape[-2:] != (d, d):
            raise DimensionError(f"expected trailing ({d}, {d}) matrices, got {M.shape[-2:]}")
        lead = M.shape[:-2]
        coeffs = self._pinv @ M.reshape(-1, d * d).T
        coeffs = coeffs.reshape((self.dim,) + lead)
        if self.is_real and not keep_complex:
            scale = 1.0 + (np.abs(coeffs).max() if coeffs.size else 0.0)
            if coeffs.size == 0 or np.abs(coeffs.imag).max() <= 1e-11 * scale:
                coeffs = coeffs.real.copy()
        return coeffs

    def projection_residual(self, M) -> float:
        """Largest entry of ``M - to_matrix(from_matrix(M))``."""
        back = self.to_matrix(self.from_matrix(M, keep_complex=True))
        return float(np.abs(np.asarray(M) - back).max())

    def commutator_residual(self) -> float:
        """max || [B_b, B_c] - c^a_{bc} B_a ||, a self-check of the stored constants."""
        mats = self.matrices
        comm = np.einsum("bij,cjk->bcik", mats, mats) - np.einsum("cij,bjk->bcik", mats, mats)
        rebuilt = np.einsum("abc,aij->bcij", self.structure_constants, mats)
        return float(np.abs(comm - rebuilt).max())

    def jacobi_residual(self) -> float:
        c = self.structure_constants
        t = (np.einsum("mbg,amd->abgd", c, c)
             + np.einsum("mgd,amb->abgd", c, c)
             + np.einsum("mdb,amg->abgd", c, c))
        return float(np.abs(t).max())

    def exp(self, x) -> np.ndarray:
        """Group element exp(X) for a single algebra element."""
        return scipy.linalg.expm(self.to_matrix(x))

    def random_element(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        x = rng.normal(scale=scale, size=self.dim)
        if not self.is_real:
            x = x + 1j * rng.normal(scale=scale, size=self.dim)
        return x

    def random_group_element(self, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
        return self.exp(self.random_element(rng, scale))

    def __repr__(self) -> str:
        return f"LieAlgebraBasis({self.name!r}, dim={self.dim}, d={self.matrix_size})"


def su2() -> LieAlgebraBasis:
    """su(2) with the anti-Hermitian basis B_j = sigma_j / (2i), so [B_1, B_2] = B_3."""
    sigma = np.array([
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ], dtype=np.complex128)
    return LieAlgebraBasis("su2", "su2", sigma / 2j, True)


def u(m: int) -> LieAlgebraBasis:
    """u(m): i E_jj, then E_jk - E_kj and i (E_jk + E_kj) for j < k."""
    if m < 1:
        raise DimensionError("u(m) needs m >= 1")
    mats = []
    for j in range(m):
        e = np.zeros((m, m), dtype=np.complex128)
        e[j, j] = 1j
        mats.append(e)
    for j, k in itertools.combinations(range(m), 2):
        a = np.zeros((m, m), dtype=np.complex128)
        a[j, k], a[k, j] = 1, -1
        s = np.zeros((m, m), dtype=np.complex128)
        s[j, k] = s[k, j] = 1j
        mats.extend([a, s])
    return LieAlgebraBasis(f"u{m}", "u_m", np.array(mats), True)


def gl(m: int) -> LieAlgebraBasis:
    """gl(m, C) with the matrix-unit basis E_jk (complex coefficients)."""
    if m < 1:
        raise DimensionError("gl(m) needs m >= 1")
    mats = np.zeros((m * m, m, m), dtype=np.complex128)
    for idx, (j, k) in enumerate(itertools.product(range(m), repeat=2)):
        mats[idx, j, k] = 1
    return LieAlgebraBasis(f"gl{m}", "gl_m_complex", mats, False)


ALGEBRAS = {
    "su2": su2,
    "u1": lambda: u(1),
    "u2": lambda: u(2),
    "u3": lambda: u(3),
    "gl1": lambda: gl(1),
    "gl2": lambda: gl(2),
}


def algebra_by_name(name: str) -> LieAlgebraBasis:
    try:
        return ALGEBRAS[name]()
    except KeyError:
        raise DimensionError(f"unknown algebra {name!r}; known: {sorted(ALGEBRAS)}") from None


def _check_element(algebra: LieAlgebraBasis, x) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim < 1 or x.shape[0] != algebra.dim:
        raise DimensionError(f"{algebra.name} elements have {algebra.dim} coefficients, got shape {x.shape}")
    return x


def bracket(algebra: LieAlgebraBasis, X, Y) -> np.ndarray:
    """[X, Y]^a = c^a_{bc} X^b Y^c; X and Y may carry trailing grid axes."""
    X = _check_element(algebra, X)
    Y = _check_element(algebra, Y)
    if X.shape != Y.shape:
        raise DimensionError(f"shape mismatch {X.shape} vs {Y.shape}")
    tail = X.shape[1:]
    m = algebra.dim
    Z = _kernels.bracket_field(algebra.structure_constants, X.reshape(m, -1), Y.reshape(m, -1),
                               sparse=algebra._sparse)
    return Z.reshape((m,) + tail)


def adjoint(algebra: LieAlgebraBasis, g, X, tol: float = 1e-10) -> np.ndarray:
    """Ad_g X = g X g^{-1}, expressed back in the basis."""
    g = np.asarray(g, dtype=np.complex128)
    X = _check_element(algebra, X)
    d = algebra.matrix_size
    if g.shape != (d, d):
        raise InvalidGroupElement(f"group element must be {d}x{d}")
    if algebra.is_real:
        if np.abs(g.conj().T @ g - np.eye(d)).max() > tol:
            raise InvalidGroupElement("group element is not unitary")
        ginv = g.conj().T
    else:
        if abs(np.linalg.det(g)) < 1e-12 or np.linalg.cond(g) > 1e12:
            raise InvalidGroupElement("group element is singular")
        ginv = np.linalg.inv(g)
    M = g @ algebra.to_matrix(X) @ ginv
    if algebra.projection_residual(M) > tol * (1 + np.abs(M).max()):
        raise InvalidGroupElement("conjugation left the algebra")
    return algebra.from_matrix(M, keep_complex=np.iscomplexobj(X))


@dataclass(frozen=True, eq=False)
class InvariantPolynomial:
    """Symmetric Ad-invariant r-linear form stored as a dense tensor p(B_a1, ..., B_ar)."""

    algebra: LieAlgebraBasis
    tensor: np.ndarray
    descriptor: str
    normalization: str = "raw"
    _sparse: tuple = field(init=False, repr=False)
    _core: np.ndarray = field(init=False, repr=False)
    _phase: complex = field(init=False, repr=False)

    def __post_init__(self):
        t = np.array(self.tensor)
        m = self.algebra.dim
        if t.ndim < 1 or any(s != m for s in t.shape):
            raise DimensionError(f"tensor must have shape ({m},)*r, got {t.shape}")
        if t.ndim > 4:
            raise ArityError("degrees r > 4 are not supported")
        scale = 1.0 + np.abs(t).max()
        for perm in itertools.permutations(range(t.ndim)):
            if np.abs(t - t.transpose(perm)).max() > 1e-12 * scale:
                raise ValueError("polynomial tensor is not symmetric")
        if np.iscomplexobj(t) and np.abs(t.imag).max() <= 1e-14 * scale:
            t = t.real.copy()
        t.setflags(write=False)
        object.__setattr__(self, "tensor", t)
        # purely imaginary tensors (traces over anti-Hermitian bases) contract as real ones
        core, phase = t, 1.0
        if np.iscomplexobj(t) and np.abs(t.real).max() <= 1e-14 * scale:
            core, phase = np.ascontiguousarray(t.imag), 1j
        object.__setattr__(self, "_core", core)
        object.__setattr__(self, "_phase", phase)
        object.__setattr__(self, "_sparse", _kernels.sparse_entries(core, atol=1e-15 * scale))

    @property
    def degree(self) -> int:
        return self.tensor.ndim

    def N(self, k: int) -> int:
        """r (r-1) ... (r-k+1); zero when k > r."""
        r = self.degree
        if k > r:
            return 0
        return math.factorial(r) // math.factorial(r - k)

    def __call__(self, *args):
        return polynomial_eval(self, *args)

    def contract(self, args) -> np.ndarray:
        """Pointwise p(args[0], ..., args[r-1]) for coefficient arrays of shape (m, P)."""
        out = _kernels.contract_field(self._core, args, sparse=self._sparse)
        return out * self._phase if self._phase != 1.0 else out

    def scaled(self, factor, normalization: str | None = None) -> "InvariantPolynomial":
        return InvariantPolynomial(self.algebra, self.tensor * factor, self.descriptor,
                                   normalization or self.normalization)

    def integral(self) -> "InvariantPolynomial":
        """Chern-Weil normalisation: one factor i/(2 pi) per slot."""
        if self.normalization == "integral":
            return self
        return self.scaled((1j / (2 * np.pi)) ** self.degree, "integral")

    def __repr__(self) -> str:
        return (f"InvariantPolynomial({self.descriptor!r}, r={self.degree}, "
                f"algebra={self.algebra.name}, normalization={self.normalization!r})")


def polynomial_eval(p: InvariantPolynomial, *args):
    """p(X_1, ..., X_r); arguments may carry matching trailing grid axes."""
    if len(args) != p.degree:
        raise ArityError(f"polynomial of degree {p.degree} takes {p.degree} arguments, got {len(args)}")
    xs = [_check_element(p.algebra, x) for x in args]
    tail = xs[0].shape[1:]
    if any(x.shape[1:] != tail for x in xs):
        raise DimensionError("arguments have mismatched trailing shapes")
    m = p.algebra.dim
    out = p.contract([x.reshape(m, -1) for x in xs])
    out = out.reshape(tail)
    return out[()] if out.ndim == 0 else out


def _trace_block(mats: np.ndarray, size: int) -> np.ndarray:
    """T[a1..as] = tr(B_a1 ... B_as)."""
    letters = "abcd"[:size]
    idx = "ijklm"
    terms = [f"{letters[s]}{idx[s]}{idx[(s + 1) % size]}" for s in range(size)]
    return np.einsum(",".join(terms) + "->" + letters, *([mats] * size))


def _symmetrize(t: np.ndarray) -> np.ndarray:
    perms = list(itertools.permutations(range(t.ndim)))
    return sum(t.transpose(p) for p in perms) / len(perms)


def build_trace_polynomial(algebra: LieAlgebraBasis, partition, coefficients=None,
                           descriptor: str | None = None) -> InvariantPolynomial:
    """Polarised combination of trace patterns.

    ``partition`` is either one list of block sizes, e.g. ``[2, 1]`` for
    tr(X^2) tr(X), or a list of such lists combined with ``coefficients``.
    The tensor is (1/r!) sum over slot permutations of the pattern, so that
    p(X, ..., X) equals the unpolarised trace expression.
    """
    if not partition:
        raise ArityError("empty partition")
    if isinstance(partition[0], (int, np.integer)):
        terms = [list(partition)]
    else:
        terms = [list(b) for b in partition]
    if coefficients is None:
        coefficients = [1.0] * len(terms)
    if len(coefficients) != len(terms):
        raise ArityError("one coefficient per partition required")
    r = sum(terms[0])
    if any(not blocks or sum(blocks) != r or min(blocks) < 1 for blocks in terms):
        raise ArityError("all partitions must be nonempty with equal total degree")
    if r > 4:
        raise ArityError("degrees r > 4 are not supported")
    mats = algebra.matrices
    total = 0
    for coef, blocks in zip(coefficients, terms):
        pattern = np.ones(())
        for size in blocks:
            pattern = np.multiply.outer(pattern, _trace_block(mats, size))
        total = total + coef * pattern
    if descriptor is None:
        descriptor = " + ".join(f"{c}*tr{b}" for c, b in zip(coefficients, terms))
    return InvariantPolynomial(algebra, _symmetrize(np.asarray(total)), descriptor)


def su2_inner_product(algebra: LieAlgebraBasis | None = None) -> InvariantPolynomial:
    """Identity Gram matrix in the B_j = sigma_j/(2i) basis (equals -2 tr(XY))."""
    algebra = algebra or su2()
    if algebra.kind != "su2":
        raise DimensionError("su2_inner_product needs the su2 algebra")
    return InvariantPolynomial(algebra, np.eye(3), "su2_inner_product")


# name -> (required algebra or None for any, builder)
POLYNOMIAL_PRESETS = {
    "su2_inner_product": ("su2", lambda a: su2_inner_product(a)),
    "tr": (None, lambda a: build_trace_polynomial(a, [1], descriptor="tr")),
    "tr2": (None, lambda a: build_trace_polynomial(a, [2], descriptor="tr2")),
    "tr_pair": (None, lambda a: build_trace_polynomial(a, [1, 1], descriptor="tr_pair")),
    "u2_p1_cubed": ("u2", lambda a: build_trace_polynomial(a, [1, 1, 1], descriptor="u2_p1_cubed")),
    # det(X) tr(X) = (tr(X)^3 - tr(X^2) tr(X)) / 2 for 2x2 matrices
    "u2_p2p1": ("u2", lambda a: build_trace_polynomial(a, [[1, 1, 1], [2, 1]], [0.5, -0.5],
                                                       descriptor="u2_p2p1")),
    "u2_p2": ("u2", lambda a: build_trace_polynomial(a, [[1, 1], [2]], [0.5, -0.5],
                                                     descriptor="u2_p2")),
}


def preset_polynomial(name: str, algebra: LieAlgebraBasis, integral: bool = False) -> InvariantPolynomial:
    try:
        required, builder = POLYNOMIAL_PRESETS[name]
    except KeyError:
        raise ArityError(f"unknown polynomial preset {name!r}; known: {sorted(POLYNOMIAL_PRESETS)}") from None
    if required is not None and algebra.name != required:
        raise DimensionError(f"preset {name!r} needs algebra {required!r}, got {algebra.name!r}")
    p = builder(algebra)
    return p.integral() if integral else p
