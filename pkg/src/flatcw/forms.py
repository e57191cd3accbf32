"""Differential forms on the flat torus T^n = R^n / Z^n sampled on a periodic grid.

A :class:`GridForm` of degree q stores one array per increasing multi-index
``(i_1 < ... < i_q)`` in lexicographic order.  Lie-valued forms carry an extra
coefficient axis, so ``data`` has shape ``(C(n, q), [m,] N, ..., N)``.
Exterior derivatives are spectral: exact on trigonometric polynomials whose
modes stay below N/2.
"""

from __future__ import annotations

import functools
import io
import itertools
import json
import math
import struct
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.fft

from .errors import DegreeError, DimensionError, GridMismatchError, NonClosedFormError

__all__ = [
    "TorusGrid",
    "GridForm",
    "PeriodVector",
    "wedge",
    "poly_wedge",
    "exterior_derivative",
    "partial_derivative",
    "integrate",
    "closure_residual",
    "is_closed",
    "closed_tolerance",
    "period_vector",
    "multi_indices",
    "save_form",
    "load_form",
    "write_form_csv",
    "set_threads",
]

CLOSED_RTOL = 1e-7
PERIOD_SHIFT_TOL = 1e-8

_THREADS = 1


def set_threads(n: int) -> None:
    """Worker count handed to scipy.fft (results do not depend on it)."""
    global _THREADS
    _THREADS = max(1, int(n))


@functools.lru_cache(maxsize=None)
def multi_indices(n: int, q: int) -> tuple:
    return tuple(itertools.combinations(range(n), q))


@functools.lru_cache(maxsize=None)
def _index_of(n: int, q: int) -> dict:
    return {I: i for i, I in enumerate(multi_indices(n, q))}


def _merge_sign(*parts) -> int:
    """Sign of the permutation sorting the concatenation of index tuples."""
    seq = [i for part in parts for i in part]
    inv = sum(1 for a in range(len(seq)) for b in range(a + 1, len(seq)) if seq[a] > seq[b])
    return -1 if inv % 2 else 1


@functools.lru_cache(maxsize=None)
def _product_table(n: int, degrees: tuple) -> tuple:
    """All (component indices per slot, output component, sign) with disjoint supports."""
    total = sum(degrees)
    out_index = _index_of(n, total)
    table = []
    for combo in itertools.product(*[multi_indices(n, q) for q in degrees]):
        flat = [i for I in combo for i in I]
        if len(set(flat)) != len(flat):
            continue
        K = tuple(sorted(flat))
        idx = tuple(_index_of(n, q)[I] for q, I in zip(degrees, combo))
        table.append((idx, out_index[K], _merge_sign(*combo)))
    return tuple(table)


@dataclass(frozen=True)
class TorusGrid:
    """Regular N^n grid on the unit torus."""

    n: int
    N: int

    def __post_init__(self):
        if not 1 <= self.n <= 4:
            raise DimensionError(f"torus dimension must be 1..4, got {self.n}")
        if self.N < 8 or self.N & (self.N - 1):
            raise DimensionError(f"points per axis must be a power of two >= 8, got {self.N}")

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.n

    @property
    def size(self) -> int:
        return self.N ** self.n

    @property
    def spacing(self) -> float:
        return 1.0 / self.N

    def coords(self) -> tuple:
        """Coordinate arrays x^1..x^n, each of full grid shape."""
        x = np.arange(self.N) / self.N
        return tuple(np.meshgrid(*([x] * self.n), indexing="ij"))

    def refined(self, factor: int = 2) -> "TorusGrid":
        return TorusGrid(self.n, self.N * factor)


@dataclass(frozen=True, eq=False)
class GridForm:
    """Immutable scalar- or Lie-valued differential form on a :class:`TorusGrid`."""

    grid: TorusGrid
    degree: int
    data: np.ndarray
    algebra: object = None  # LieAlgebraBasis or None for scalar forms

    def __post_init__(self):
        if not 0 <= self.degree <= self.grid.n:
            raise DegreeError(f"degree {self.degree} outside 0..{self.grid.n}")
        data = np.asarray(self.data)
        if not (np.issubdtype(data.dtype, np.floating) or np.issubdtype(data.dtype, np.complexfloating)):
            data = data.astype(np.float64)
        expected = (math.comb(self.grid.n, self.degree),)
        if self.algebra is not None:
            expected += (self.algebra.dim,)
        expected += self.grid.shape
        if data.shape != expected:
            raise DimensionError(f"form data has shape {data.shape}, expected {expected}")
        if data.flags.writeable:
            data = data.view()
            data.setflags(write=False)
        object.__setattr__(self, "data", data)

    # construction -----------------------------------------------------------
    @classmethod
    def zeros(cls, grid: TorusGrid, degree: int, algebra=None, dtype=np.float64) -> "GridForm":
        shape = (math.comb(grid.n, degree),) + ((algebra.dim,) if algebra is not None else ()) + grid.shape
        return cls(grid, degree, np.zeros(shape, dtype=dtype), algebra)

    @classmethod
    def from_components(cls, grid: TorusGrid, degree: int, components: dict, algebra=None) -> "GridForm":
        """Build from {multi-index: array or scalar or coefficient vector}; missing components are zero."""
        index = _index_of(grid.n, degree)
        lead = (algebra.dim,) if algebra is not None else ()
        vals = {}
        for I, v in components.items():
            I = tuple(I)
            if tuple(sorted(I)) != I or len(set(I)) != len(I):
                raise DegreeError(f"multi-index {I} must be strictly increasing")
            if I not in index:
                raise DegreeError(f"multi-index {I} does not fit degree {degree} on T^{grid.n}")
            v = np.asarray(v)
            if algebra is not None and v.ndim == 1:
                v = v.reshape(lead + (1,) * grid.n)
            vals[I] = np.broadcast_to(v, lead + grid.shape)
        dtype = np.result_type(np.float64, *vals.values()) if vals else np.float64
        data = np.zeros((len(index),) + lead + grid.shape, dtype=dtype)
        for I, v in vals.items():
            data[index[I]] = v
        return cls(grid, degree, data, algebra)

    # inspection ---------------------------------------------------------------
    @property
    def is_lie(self) -> bool:
        return self.algebra is not None

    @property
    def multi_indices(self) -> tuple:
        return multi_indices(self.grid.n, self.degree)

    def component(self, I) -> np.ndarray:
        return self.data[_index_of(self.grid.n, self.degree)[tuple(I)]]

    def max_norm(self) -> float:
        return float(np.abs(self.data).max()) if self.data.size else 0.0

    def real_if_close(self, tol: float = 1e-10) -> "GridForm":
        if np.iscomplexobj(self.data) and np.abs(self.data.imag).max() <= tol * (1 + self.max_norm()):
            return self._like(self.data.real)
        return self

    def _like(self, data, degree=None, algebra="same") -> "GridForm":
        return GridForm(self.grid, self.degree if degree is None else degree, data,
                        self.algebra if algebra == "same" else algebra)

    def _check_compatible(self, other: "GridForm"):
        if self.grid != other.grid:
            raise GridMismatchError(f"grids differ: {self.grid} vs {other.grid}")
        if self.degree != other.degree:
            raise DegreeError(f"degrees differ: {self.degree} vs {other.degree}")
        if (self.algebra is None) != (other.algebra is None) or (
                self.algebra is not None and self.algebra.name != other.algebra.name):
            raise DimensionError("value types differ")

    # arithmetic ---------------------------------------------------------------
    def __add__(self, other: "GridForm") -> "GridForm":
        if not isinstance(other, GridForm):
            return NotImplemented
        self._check_compatible(other)
        return self._like(self.data + other.data)

    def __sub__(self, other: "GridForm") -> "GridForm":
        if not isinstance(other, GridForm):
            return NotImplemented
        self._check_compatible(other)
        return self._like(self.data - other.data)

    def __neg__(self) -> "GridForm":
        return self._like(-self.data)

    def __mul__(self, c) -> "GridForm":
        if isinstance(c, GridForm) or np.ndim(c) != 0:
            return NotImplemented
        return self._like(self.data * c)

    __rmul__ = __mul__

    def __truediv__(self, c) -> "GridForm":
        return self * (1.0 / c)

    def times_function(self, f: np.ndarray) -> "GridForm":
        """Multiply every component by a grid function (0-form values)."""
        f = np.asarray(f)
        if f.shape != self.grid.shape:
            raise DimensionError("function must be sampled on the grid")
        lead = self.data.ndim - self.grid.n
        return self._like(self.data * f.reshape((1,) * lead + f.shape))

    def coefficient(self, a: int) -> "GridForm":
        """Scalar form of the a-th algebra coefficient."""
        if not self.is_lie:
            raise DimensionError("scalar form has no algebra coefficients")
        return GridForm(self.grid, self.degree, self.data[:, a], None)

    def conj(self) -> "GridForm":
        return self._like(np.conj(self.data))

    def __repr__(self) -> str:
        kind = self.algebra.name if self.is_lie else "scalar"
        return f"GridForm(degree={self.degree}, {kind}, n={self.grid.n}, N={self.grid.N})"


# wedge products ---------------------------------------------------------------

def _flat(arr: np.ndarray, grid: TorusGrid) -> np.ndarray:
    lead = arr.shape[: arr.ndim - grid.n]
    return arr.reshape(lead + (-1,))


def wedge(omega: GridForm, eta: GridForm, combine=None) -> GridForm:
    """omega ^ eta with Koszul signs.

    scalar^scalar and scalar^Lie need no ``combine``.  For Lie^Lie pass
    ``combine="bracket"`` (Lie-valued result, e.g. [A ^ A]) or an invariant
    polynomial of degree 2 (scalar result, e.g. tr(xi_1 ^ xi_2)).
    """
    if omega.grid != eta.grid:
        raise GridMismatchError("wedge of forms on different grids")
    grid = omega.grid
    q = omega.degree + eta.degree
    if q > grid.n:
        raise DegreeError(f"degree {q} exceeds torus dimension {grid.n}")
    table = _product_table(grid.n, (omega.degree, eta.degree))

    if omega.is_lie and eta.is_lie:
        if combine is None:
            raise DimensionError("Lie^Lie wedge needs a combiner ('bracket' or a degree-2 polynomial)")
        if isinstance(combine, str) and combine == "bracket":
            from .lie import bracket
            algebra = omega.algebra
            result = None
            for (i, j), k, sign in table:
                term = bracket(algebra, omega.data[i], eta.data[j])
                if result is None:
                    result = np.zeros((math.comb(grid.n, q),) + term.shape, dtype=term.dtype)
                elif np.iscomplexobj(term) and not np.iscomplexobj(result):
                    result = result.astype(np.complex128)
                if sign > 0:
                    result[k] += term
                else:
                    result[k] -= term
            if result is None:
                return GridForm.zeros(grid, q, algebra)
            return GridForm(grid, q, result, algebra)
        return poly_wedge(combine, [omega, eta])

    algebra = omega.algebra if omega.is_lie else eta.algebra
    lead = (algebra.dim,) if algebra is not None else ()
    dtype = np.result_type(omega.data, eta.data)
    result = np.zeros((math.comb(grid.n, q),) + lead + grid.shape, dtype=dtype)
    for (i, j), k, sign in table:
        a, b = omega.data[i], eta.data[j]
        if omega.is_lie and not eta.is_lie:
            b = b[None]
        elif eta.is_lie and not omega.is_lie:
            a = a[None]
        result[k] += sign * (a * b)
    return GridForm(grid, q, result, algebra)


def poly_wedge(p, forms: Sequence[GridForm]) -> GridForm:
    """Scalar form p(omega_1, ..., omega_r) = p_{a1..ar} omega_1^{a1} ^ ... ^ omega_r^{ar}.

    The wedge is taken in slot order, so odd-degree slots anticommute.
    """
    r = p.degree
    if len(forms) != r:
        from .errors import ArityError
        raise ArityError(f"polynomial of degree {r} needs {r} forms, got {len(forms)}")
    grid = forms[0].grid
    for f in forms:
        if f.grid != grid:
            raise GridMismatchError("forms live on different grids")
        if not f.is_lie or f.algebra.dim != p.algebra.dim:
            raise DimensionError("polynomial slots must be Lie-valued over the polynomial's algebra")
    degrees = tuple(f.degree for f in forms)
    q = sum(degrees)
    if q > grid.n:
        raise DegreeError(f"degree {q} exceeds torus dimension {grid.n}")
    table = _product_table(grid.n, degrees)
    flats = [_flat(f.data, grid) for f in forms]
    result = None
    for idx, k, sign in table:
        val = p.contract([flats[s][idx[s]] for s in range(r)])
        if result is None:
            result = np.zeros((math.comb(grid.n, q), val.shape[0]), dtype=val.dtype)
        elif np.iscomplexobj(val) and not np.iscomplexobj(result):
            result = result.astype(np.complex128)
        result[k] += sign * val
    if result is None:
        return GridForm.zeros(grid, q)
    return GridForm(grid, q, result.reshape((result.shape[0],) + grid.shape))


# spectral calculus --------------------------------------------------------------

@functools.lru_cache(maxsize=64)
def _wavenumbers(N: int, real_last: bool, last: bool) -> np.ndarray:
    if real_last and last:
        k = scipy.fft.rfftfreq(N, d=1.0 / N)
    else:
        k = scipy.fft.fftfreq(N, d=1.0 / N)
    k = k.copy()
    k[np.abs(k) == N // 2] = 0.0  # Nyquist mode has no odd derivative
    return 2j * np.pi * k


def _spectral(data: np.ndarray, grid: TorusGrid):
    axes = tuple(range(data.ndim - grid.n, data.ndim))
    real = not np.iscomplexobj(data)
    if real:
        return scipy.fft.rfftn(data, axes=axes, workers=_THREADS), axes, True
    return scipy.fft.fftn(data, axes=axes, workers=_THREADS), axes, False


def _inverse(hat: np.ndarray, grid: TorusGrid, axes, real: bool) -> np.ndarray:
    if real:
        return scipy.fft.irfftn(hat, s=grid.shape, axes=axes, workers=_THREADS)
    return scipy.fft.ifftn(hat, axes=axes, workers=_THREADS)


def _derivative_multiplier(grid: TorusGrid, axis: int, real: bool, ndim: int) -> np.ndarray:
    k = _wavenumbers(grid.N, real, axis == grid.n - 1)
    shape = [1] * ndim
    shape[ndim - grid.n + axis] = k.size
    return k.reshape(shape)


def partial_derivative(values: np.ndarray, grid: TorusGrid, axis: int) -> np.ndarray:
    """Spectral d/dx^axis of grid values with arbitrary leading axes."""
    hat, axes, real = _spectral(np.asarray(values), grid)
    return _inverse(hat * _derivative_multiplier(grid, axis, real, hat.ndim), grid, axes, real)


def exterior_derivative(omega: GridForm) -> GridForm:
    """Spectral exterior derivative; raises for top-degree input."""
    grid = omega.grid
    q = omega.degree
    if q >= grid.n:
        raise DegreeError("exterior derivative of a top-degree form")
    hat, axes, real = _spectral(omega.data, grid)
    src = _index_of(grid.n, q)
    out_hat = []
    for K in multi_indices(grid.n, q + 1):
        acc = 0
        for pos, j in enumerate(K):
            I = K[:pos] + K[pos + 1:]
            term = hat[src[I]] * _derivative_multiplier(grid, j, real, hat.ndim - 1)
            acc = acc + (term if pos % 2 == 0 else -term)
        out_hat.append(acc)
    out = _inverse(np.stack(out_hat), grid, axes, real)
    return omega._like(out, degree=q + 1)


def integrate(omega: GridForm):
    """Integral of a top-degree form over the unit torus (mean over grid points)."""
    if omega.degree != omega.grid.n:
        raise DegreeError(f"integrate needs a degree-{omega.grid.n} form, got degree {omega.degree}")
    axes = tuple(range(omega.data.ndim - omega.grid.n, omega.data.ndim))
    val = omega.data[0].mean(axis=tuple(a - 1 for a in axes))
    return val[()] if np.ndim(val) == 0 else val


def closed_tolerance(omega: GridForm) -> float:
    return CLOSED_RTOL * (1.0 + omega.max_norm())


def closure_residual(omega: GridForm) -> float:
    """max |d omega|; zero for top-degree forms."""
    if omega.degree == omega.grid.n:
        return 0.0
    return exterior_derivative(omega).max_norm()


def is_closed(omega: GridForm) -> bool:
    return closure_residual(omega) <= closed_tolerance(omega)


@dataclass(frozen=True, eq=False)
class PeriodVector:
    """Integrals of a closed q-form over the coordinate subtori of T^n."""

    degree: int
    subsets: tuple
    values: np.ndarray
    normalization: str | None = None

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.shape != (len(self.subsets),):
            raise DimensionError("one value per subtorus required")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def as_dict(self) -> dict:
        return {tuple(s): v for s, v in zip(self.subsets, self.values)}

    def real(self, tol: float = 1e-9) -> "PeriodVector":
        if np.iscomplexobj(self.values):
            if np.abs(self.values.imag).max(initial=0.0) > tol:
                raise ValueError("period vector has non-negligible imaginary part")
            return PeriodVector(self.degree, self.subsets, self.values.real, self.normalization)
        return self

    def __sub__(self, other: "PeriodVector") -> "PeriodVector":
        if self.subsets != other.subsets:
            raise DimensionError("period vectors over different cycle bases")
        return PeriodVector(self.degree, self.subsets, self.values - other.values, self.normalization)

    def __add__(self, other: "PeriodVector") -> "PeriodVector":
        if self.subsets != other.subsets:
            raise DimensionError("period vectors over different cycle bases")
        return PeriodVector(self.degree, self.subsets, self.values + other.values, self.normalization)

    def max_abs(self) -> float:
        return float(np.abs(self.values).max(initial=0.0))

    def to_json(self) -> dict:
        entries = []
        for s, v in zip(self.subsets, self.values):
            if np.iscomplexobj(self.values):
                entries.append({"subtorus": list(s), "re": float(v.real), "im": float(v.imag)})
            else:
                entries.append({"subtorus": list(s), "value": float(v)})
        return {"degree": self.degree, "normalization": self.normalization, "entries": entries}


def _subtorus_integral(arr: np.ndarray, grid: TorusGrid, subset: tuple, base: int) -> complex:
    index = tuple(slice(None) if ax in subset else base for ax in range(grid.n))
    return arr[index].mean() if subset else arr[index]


def period_vector(omega: GridForm, check_closed: bool = True, normalization: str | None = None) -> PeriodVector:
    """Periods of a closed scalar form over the subtori through the origin.

    A second base point is spot-checked; disagreement beyond 1e-8 means the
    form is not closed and raises :class:`NonClosedFormError`.
    """
    if omega.is_lie:
        raise DimensionError("periods are defined for scalar forms")
    grid = omega.grid
    q = omega.degree
    if check_closed:
        res = closure_residual(omega)
        tol = closed_tolerance(omega)
        if res > tol:
            raise NonClosedFormError(res, tol)
    subsets = multi_indices(grid.n, q)
    values = np.array([_subtorus_integral(omega.data[i], grid, I, 0) for i, I in enumerate(subsets)])
    if q < grid.n:
        shifted = np.array([_subtorus_integral(omega.data[i], grid, I, grid.N // 3)
                            for i, I in enumerate(subsets)])
        gap = float(np.abs(shifted - values).max(initial=0.0))
        if check_closed and gap > PERIOD_SHIFT_TOL * (1.0 + omega.max_norm()):
            raise NonClosedFormError(gap, PERIOD_SHIFT_TOL, "periods depend on the base point "
                                     f"(gap {gap:.3e}); form is not closed")
    return PeriodVector(q, subsets, values, normalization)


# binary / CSV layout ---------------------------------------------------------------

_MAGIC = b"FLATCWF1"


def _header(omega: GridForm) -> dict:
    return {
        "n": omega.grid.n,
        "N": omega.grid.N,
        "degree": omega.degree,
        "value_type": "lie" if omega.is_lie else "scalar",
        "algebra": omega.algebra.name if omega.is_lie else None,
        "dtype": "complex128" if np.iscomplexobj(omega.data) else "float64",
        "components": [list(I) for I in omega.multi_indices],
    }


def save_form(path, omega: GridForm) -> None:
    """Write ``omega`` in the flatcw binary layout.

    magic ``FLATCWF1`` | uint32 little-endian header length | UTF-8 JSON
    header | raw little-endian array (components lexicographic, then algebra
    coefficients, then grid points row-major).
    """
    header = json.dumps(_header(omega), sort_keys=True).encode()
    dtype = "<c16" if np.iscomplexobj(omega.data) else "<f8"
    buf = io.BytesIO()
    buf.write(_MAGIC)
    buf.write(struct.pack("<I", len(header)))
    buf.write(header)
    buf.write(np.ascontiguousarray(omega.data, dtype=dtype).tobytes(order="C"))
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_form(path, algebra_lookup: Callable | None = None) -> GridForm:
    with open(path, "rb") as fh:
        raw = fh.read()
    if raw[:8] != _MAGIC:
        raise ValueError("not a flatcw form file")
    (hlen,) = struct.unpack("<I", raw[8:12])
    header = json.loads(raw[12:12 + hlen].decode())
    grid = TorusGrid(header["n"], header["N"])
    algebra = None
    if header["value_type"] == "lie":
        from .lie import algebra_by_name
        algebra = (algebra_lookup or algebra_by_name)(header["algebra"])
    dtype = "<c16" if header["dtype"] == "complex128" else "<f8"
    shape = (math.comb(grid.n, header["degree"]),) + ((algebra.dim,) if algebra else ()) + grid.shape
    native = np.complex128 if header["dtype"] == "complex128" else np.float64
    data = np.frombuffer(raw[12 + hlen:], dtype=dtype).reshape(shape).astype(native)
    return GridForm(grid, header["degree"], data, algebra)


def write_form_csv(omega: GridForm, fh) -> None:
    """One row per stored value: component, coefficient, grid index, re, im."""
    grid = omega.grid
    fh.write("component,coefficient," + ",".join(f"i{a + 1}" for a in range(grid.n)) + ",re,im\n")
    coeffs = range(omega.algebra.dim) if omega.is_lie else [None]
    for ci, I in enumerate(omega.multi_indices):
        comp = "".join(str(i + 1) for i in I) or "0"
        for a in coeffs:
            arr = omega.data[ci] if a is None else omega.data[ci, a]
            for pt in np.ndindex(*grid.shape):
                v = complex(arr[pt])
                fh.write(f"{comp},{'' if a is None else a},{','.join(map(str, pt))},{v.real!r},{v.imag!r}\n")
