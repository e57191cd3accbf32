"""Smooth families of connections over parameter domains, and loops of flat connections.

A family is a map u -> f(u) from [0,1]^k (some axes possibly periodic) into
connections, together with its partial derivatives d f / d u_a, which are
Lie-valued 1-forms on the torus.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from ..connection import (Connection, GaugeField, adjoint_form, covariant_derivative, gauge_transform)
from ..errors import DimensionError, GridMismatchError, OpenLoopError
from ..forms import GridForm, TorusGrid
from ..lie import LieAlgebraBasis, adjoint, bracket
from .quadrature import ParameterDomain

FD_STEP = 1e-3
LOOP_CLOSE_TOL = 1e-10


def _fd4(f, x: float, h: float):
    """Fourth-order central difference of f at x."""
    return (f(x - 2 * h) - 8 * f(x - h) + 8 * f(x + h) - f(x + 2 * h)) * (1.0 / (12 * h))


# loops -----------------------------------------------------------------------------

class Loop:
    """Periodic map s -> A(s) in [0, 1)."""

    grid: TorusGrid
    algebra: LieAlgebraBasis

    def __call__(self, s: float) -> Connection:
        raise NotImplementedError

    def derivative(self, s: float) -> GridForm:
        return _fd4(lambda x: self(x).form, s, FD_STEP)

    def concatenate(self, other: "Loop") -> "ConcatenatedLoop":
        return ConcatenatedLoop(self, other)

    def describe(self) -> dict:
        return {"loop": type(self).__name__}


class ConstantLoop(Loop):
    def __init__(self, A: Connection):
        self.A = A
        self.grid, self.algebra = A.grid, A.algebra

    def __call__(self, s):
        return self.A

    def derivative(self, s):
        return GridForm.zeros(self.grid, 1, self.algebra)


class CartanLoop(Loop):
    """A(s) = sum_i (Ad_{exp(2 pi s Y)} theta_i + a_i sin(2 pi s) Z) dx^i.

    ``thetas`` commute pairwise and ``Z`` is central, so every A(s) is flat.
    Y must satisfy Ad_{exp(2 pi Y)} theta_i = theta_i so that the loop closes.
    """

    def __init__(self, grid: TorusGrid, algebra: LieAlgebraBasis, thetas, Y, central=None, Z=None):
        self.grid, self.algebra = grid, algebra
        self.thetas = [np.asarray(t) for t in thetas]
        if len(self.thetas) != grid.n:
            raise DimensionError(f"need {grid.n} Cartan elements")
        self.Y = np.asarray(Y)
        self.central = np.zeros(grid.n) if central is None else np.asarray(central, dtype=float)
        if Z is None:
            Z = np.zeros(algebra.dim)
        self.Z = np.asarray(Z)
        if np.abs(self.central).max(initial=0) > 0:
            for b in np.eye(algebra.dim):
                if np.abs(bracket(algebra, self.Z, b)).max() > 1e-12:
                    raise DimensionError("Z must be central")
        g1 = scipy.linalg.expm(2 * np.pi * algebra.to_matrix(self.Y))
        for th in self.thetas:
            if np.abs(adjoint(algebra, g1, th) - th).max() > LOOP_CLOSE_TOL:
                raise OpenLoopError("Ad_{exp(2 pi Y)} does not fix the Cartan elements")

    def _rot(self, s):
        return scipy.linalg.expm(2 * np.pi * s * self.algebra.to_matrix(self.Y))

    def coefficients(self, s):
        g = self._rot(s)
        return [adjoint(self.algebra, g, th) + a * np.sin(2 * np.pi * s) * self.Z
                for th, a in zip(self.thetas, self.central)]

    def __call__(self, s):
        return Connection.from_components(self.grid, self.algebra, dict(enumerate(self.coefficients(s))))

    def derivative(self, s):
        g = self._rot(s)
        comps = {}
        for i, (th, a) in enumerate(zip(self.thetas, self.central)):
            rot = adjoint(self.algebra, g, th)
            comps[(i,)] = (2 * np.pi * bracket(self.algebra, self.Y, rot)
                           + 2 * np.pi * a * np.cos(2 * np.pi * s) * self.Z)
        return GridForm.from_components(self.grid, 1, comps, self.algebra)

    def describe(self):
        return {"loop": "cartan", "thetas": [_jsonable(t) for t in self.thetas], "Y": _jsonable(self.Y),
                "central": self.central.tolist(), "Z": _jsonable(self.Z)}


class ConcatenatedLoop(Loop):
    """First loop on [0, 1/2], second on [1/2, 1]; both must share A(0)."""

    def __init__(self, first: Loop, second: Loop):
        if first.grid != second.grid:
            raise GridMismatchError("loops on different grids")
        if (first(0.0) - second(0.0)).max_norm() > LOOP_CLOSE_TOL:
            raise OpenLoopError("concatenated loops must share their base point")
        self.first, self.second = first, second
        self.grid, self.algebra = first.grid, first.algebra

    def _piece(self, s):
        s = s % 1.0
        return (self.first, 2 * s) if s < 0.5 else (self.second, 2 * s - 1)

    def __call__(self, s):
        loop, v = self._piece(s)
        return loop(v)

    def derivative(self, s):
        loop, v = self._piece(s)
        return 2.0 * loop.derivative(v)

    def describe(self):
        return {"loop": "concatenated", "parts": [self.first.describe(), self.second.describe()]}


class GaugeLoop:
    """Periodic family s -> Phi(s) of gauge fields with log-derivative Phi' Phi^{-1}."""

    def __init__(self, field_at: Callable[[float], GaugeField],
                 log_derivative: Callable[[float], np.ndarray] | None = None, label: str = "gauge"):
        self.field_at = field_at
        self._logd = log_derivative
        self.label = label

    def __call__(self, s: float) -> GaugeField:
        return self.field_at(s % 1.0)

    def log_derivative(self, s: float) -> np.ndarray:
        """Phi'(s) Phi(s)^{-1} as algebra coefficients of shape (m, *grid)."""
        if self._logd is not None:
            return self._logd(s % 1.0)
        phi = self(s)
        dphi = _fd4(lambda x: self(x).matrices, s, FD_STEP)
        M = dphi @ phi.inverse()
        c = phi.algebra.from_matrix(M, keep_complex=True)
        return c.real if phi.algebra.is_real else c

    def concatenate(self, other: "GaugeLoop") -> "GaugeLoop":
        """This loop on [0, 1/2], then ``other`` on [1/2, 1]; both must start at the same field."""
        gap = np.abs(self(0.0).matrices - other(0.0).matrices).max()
        if gap > LOOP_CLOSE_TOL:
            raise OpenLoopError(f"gauge loops do not share a base point (gap {gap:.2e})")

        def piece(s):
            return (self, 2 * s) if s < 0.5 else (other, 2 * s - 1)

        def field_at(s):
            loop, v = piece(s)
            return loop(v)

        def logd(s):
            loop, v = piece(s)
            return 2.0 * np.asarray(loop.log_derivative(v))

        return GaugeLoop(field_at, logd, label=f"{self.label}*{other.label}")


def winding_gauge_loop(grid: TorusGrid, algebra: LieAlgebraBasis, w, direction) -> GaugeLoop:
    """Phi(s)(x) = exp((w . x + s) H) with exp(H) = 1: an s-dependent loop of winding gauges."""
    from ..connection import winding_gauge
    H = np.asarray(direction)
    Hc = H if H.ndim == 1 else algebra.from_matrix(H)
    base = winding_gauge(grid, algebra, w, H)
    Hm = H if H.ndim == 2 else algebra.to_matrix(H)

    def field_at(s):
        return GaugeField(grid, algebra, base.matrices @ scipy.linalg.expm(s * Hm))

    def logd(s):
        return np.broadcast_to(np.asarray(Hc).reshape((-1,) + (1,) * grid.n), (algebra.dim,) + grid.shape)

    return GaugeLoop(field_at, logd, label=f"winding{list(np.asarray(w).tolist())}")


def quaternion_gauge_loop(grid: TorusGrid, mass: float = 2.0) -> GaugeLoop:
    """SU(2) loop over T^2 whose total space map S^1 x T^2 -> S^3 has degree +-1."""
    from ..connection import quaternion_gauge
    if grid.n != 2:
        raise DimensionError("quaternion_gauge_loop lives on T^2")
    return GaugeLoop(lambda s: quaternion_gauge(grid, axes=(None, 0, 1), mass=mass, offsets=(s, 0.0, 0.0)),
                     label=f"quaternion(mass={mass})")


class GaugedLoop(Loop):
    """s -> Phi(s) . A(s); derivative Ad_Phi A'(s) - nabla^{Phi.A}(Phi' Phi^{-1})."""

    def __init__(self, base: Loop, gauge: GaugeLoop):
        self.base, self.gauge = base, gauge
        self.grid, self.algebra = base.grid, base.algebra

    def __call__(self, s):
        return gauge_transform(self.gauge(s), self.base(s))

    def derivative(self, s):
        phi = self.gauge(s)
        A = gauge_transform(phi, self.base(s))
        zeta = GridForm(self.grid, 0, np.asarray(self.gauge.log_derivative(s))[None], self.algebra)
        return adjoint_form(phi, self.base.derivative(s)) - covariant_derivative(A, zeta)

    def describe(self):
        return {"loop": "gauged", "base": self.base.describe(), "gauge": self.gauge.label}


# families -------------------------------------------------------------------------

class ConnectionFamily:
    """Map u -> connection over [0,1]^k with partial derivatives."""

    kind = "family"
    k = 1

    def __call__(self, u) -> Connection:
        return self.evaluate(u)

    def evaluate(self, u) -> Connection:
        raise NotImplementedError

    def partials(self, u) -> list:
        raise NotImplementedError

    def default_domain(self, order: int = 8) -> ParameterDomain:
        return ParameterDomain.interval(order) if self.k == 1 else ParameterDomain.cube(self.k, order)

    def boundary_points(self, domain: ParameterDomain) -> list:
        """Parameter points on the boundary S at the domain's nodes."""
        pts = []
        for a, ax in enumerate(domain.axes):
            if ax.periodic:
                continue
            face = domain.face(a)
            rest = [u for u, _ in face.points()] if face is not None else [()]
            for v in (0.0, 1.0):
                pts.extend(r[:a] + (v,) + r[a:] for r in rest)
        return pts

    def gauge(self, phi: GaugeField) -> "GaugedFamily":
        return GaugedFamily(self, phi)

    def describe(self) -> dict:
        return {"kind": self.kind, "k": self.k}

    @property
    def grid(self) -> TorusGrid:
        return self.evaluate((0.0,) * self.k).grid

    @property
    def algebra(self) -> LieAlgebraBasis:
        return self.evaluate((0.0,) * self.k).algebra


def _jsonable(x):
    x = np.asarray(x)
    if np.iscomplexobj(x):
        return {"re": x.real.tolist(), "im": x.imag.tolist()}
    return x.tolist()


class StraightLine(ConnectionFamily):
    """f(t) = (1 - t) A0 + t A1."""

    kind = "straight_line"

    def __init__(self, A0: Connection, A1: Connection):
        if A0.grid != A1.grid:
            raise GridMismatchError("endpoints on different grids")
        if A0.algebra.name != A1.algebra.name:
            raise DimensionError("endpoints over different algebras")
        self.A0, self.A1 = A0, A1
        self.xi = A1 - A0

    def evaluate(self, u):
        (t,) = u
        return self.A0 + t * self.xi

    def partials(self, u):
        return [self.xi]

    @property
    def grid(self):
        return self.A0.grid

    @property
    def algebra(self):
        return self.A0.algebra


class Cone(ConnectionFamily):
    """f(s, t) = (1 - t) A0 + t A(s) over the cylinder (s periodic first)."""

    kind = "cone"
    k = 2

    def __init__(self, A0: Connection, loop: Loop):
        if A0.grid != loop.grid:
            raise GridMismatchError("apex and loop on different grids")
        self.A0, self.loop = A0, loop

    def evaluate(self, u):
        s, t = u
        return self.A0 + t * (self.loop(s) - self.A0)

    def partials(self, u):
        s, t = u
        return [t * self.loop.derivative(s), self.loop(s) - self.A0]

    def default_domain(self, order: int = 8, loop_nodes: int = 32) -> ParameterDomain:
        return ParameterDomain.cylinder(order, loop_nodes)

    def boundary_points(self, domain):
        # the t = 0 circle collapses to the apex, which is an interior point of the disc
        s_nodes = domain.axes[0].nodes
        return [(float(s), 1.0) for s in s_nodes]

    def describe(self):
        return {"kind": self.kind, "k": 2, "loop": self.loop.describe()}

    @property
    def grid(self):
        return self.A0.grid

    @property
    def algebra(self):
        return self.A0.algebra


class Reparametrized(ConnectionFamily):
    """Compose one parameter axis with phi: [0,1] -> [0,1] fixing the endpoints."""

    kind = "reparametrized"

    def __init__(self, base: ConnectionFamily, phi: Callable, dphi: Callable, axis: int = -1, label="custom"):
        self.base, self.phi, self.dphi, self.label = base, phi, dphi, label
        self.k = base.k
        self.axis = axis % base.k
        for v in (0.0, 1.0):
            if abs(phi(v) - v) > 1e-14:
                raise DimensionError("reparametrisation must fix 0 and 1")

    def _map(self, u):
        u = list(u)
        t = u[self.axis]
        u[self.axis] = self.phi(t)
        return tuple(u), self.dphi(t)

    def evaluate(self, u):
        return self.base.evaluate(self._map(u)[0])

    def partials(self, u):
        v, dp = self._map(u)
        parts = list(self.base.partials(v))
        parts[self.axis] = dp * parts[self.axis]
        return parts

    def default_domain(self, order: int = 8):
        return self.base.default_domain(order)

    def boundary_points(self, domain):
        return self.base.boundary_points(domain)

    def describe(self):
        return {"kind": self.kind, "k": self.k, "map": self.label, "axis": self.axis, "base": self.base.describe()}

    @property
    def grid(self):
        return self.base.grid

    @property
    def algebra(self):
        return self.base.algebra


def cubic_reparametrization(base: ConnectionFamily, axis: int = -1) -> Reparametrized:
    """t -> 3t^2 - 2t^3."""
    return Reparametrized(base, lambda t: 3 * t * t - 2 * t ** 3, lambda t: 6 * t - 6 * t * t, axis, "cubic")


class Perturbed(ConnectionFamily):
    """f(u) + g(u) eta for a profile g vanishing on the boundary S."""

    kind = "perturbed"

    def __init__(self, base: ConnectionFamily, eta: GridForm, profile: Callable, dprofile: Callable,
                 label: str = "custom"):
        self.base, self.eta, self.profile, self.dprofile, self.label = base, eta, profile, dprofile, label
        self.k = base.k

    def evaluate(self, u):
        return self.base.evaluate(u) + self.profile(u) * self.eta

    def partials(self, u):
        grad = self.dprofile(u)
        return [p + g * self.eta for p, g in zip(self.base.partials(u), grad)]

    def default_domain(self, order: int = 8):
        return self.base.default_domain(order)

    def boundary_points(self, domain):
        return self.base.boundary_points(domain)

    def describe(self):
        return {"kind": self.kind, "k": self.k, "profile": self.label, "base": self.base.describe()}

    @property
    def grid(self):
        return self.base.grid

    @property
    def algebra(self):
        return self.base.algebra


def bump_perturbation(base: ConnectionFamily, eta: GridForm) -> Perturbed:
    """Standard interior bump: sin(pi t) for k = 1, t (1 - t) (1 + sin(2 pi s) / 2) for cones."""
    if base.k == 1:
        return Perturbed(base, eta, lambda u: np.sin(np.pi * u[0]),
                         lambda u: (np.pi * np.cos(np.pi * u[0]),), "sin(pi t)")
    if base.k == 2:
        def g(u):
            s, t = u
            return t * (1 - t) * (1 + 0.5 * np.sin(2 * np.pi * s))

        def dg(u):
            s, t = u
            return (t * (1 - t) * np.pi * np.cos(2 * np.pi * s), (1 - 2 * t) * (1 + 0.5 * np.sin(2 * np.pi * s)))

        return Perturbed(base, eta, g, dg, "t(1-t)(1+sin(2 pi s)/2)")
    raise DimensionError("bump_perturbation supports k = 1, 2")


class GaugedFamily(ConnectionFamily):
    """u -> Phi . f(u) for one fixed gauge field Phi."""

    kind = "gauged"

    def __init__(self, base: ConnectionFamily, phi: GaugeField):
        self.base, self.phi = base, phi
        self.k = base.k

    def evaluate(self, u):
        return gauge_transform(self.phi, self.base.evaluate(u))

    def partials(self, u):
        return [adjoint_form(self.phi, p) for p in self.base.partials(u)]

    def default_domain(self, order: int = 8):
        return self.base.default_domain(order)

    def boundary_points(self, domain):
        return self.base.boundary_points(domain)

    def describe(self):
        return {"kind": self.kind, "k": self.k, "base": self.base.describe()}

    @property
    def grid(self):
        return self.base.grid

    @property
    def algebra(self):
        return self.base.algebra


class Tabulated(ConnectionFamily):
    """k = 1 family known only at equispaced snapshots t_j = j / M.

    Values come from local 5-point Lagrange interpolation and the partial from
    the derivative of that interpolant (fourth order in the node spacing).
    """

    kind = "tabulated"

    def __init__(self, snapshots: Sequence[Connection]):
        if len(snapshots) < 5:
            raise DimensionError("need at least 5 snapshots")
        self.snapshots = list(snapshots)
        self.M = len(snapshots) - 1
        self._data = np.stack([A.data for A in snapshots])

    @classmethod
    def sample(cls, family: ConnectionFamily, M: int) -> "Tabulated":
        return cls([family.evaluate((j / M,)) for j in range(M + 1)])

    def _stencil(self, t):
        x = t * self.M
        j0 = int(np.clip(np.floor(x) - 1, 0, self.M - 4))
        nodes = np.arange(j0, j0 + 5)
        w = np.ones(5)
        dw = np.zeros(5)
        for a in range(5):
            others = [b for b in range(5) if b != a]
            denom = np.prod([nodes[a] - nodes[b] for b in others])
            w[a] = np.prod([x - nodes[b] for b in others]) / denom
            dw[a] = sum(np.prod([x - nodes[c] for c in others if c != b]) for b in others) / denom
        return nodes, w, dw * self.M

    def evaluate(self, u):
        (t,) = u
        nodes, w, _ = self._stencil(t)
        ref = self.snapshots[0]
        return Connection(GridForm(ref.grid, 1, np.tensordot(w, self._data[nodes], axes=1), ref.algebra))

    def partials(self, u):
        (t,) = u
        nodes, _, dw = self._stencil(t)
        ref = self.snapshots[0]
        return [GridForm(ref.grid, 1, np.tensordot(dw, self._data[nodes], axes=1), ref.algebra)]

    def describe(self):
        return {"kind": self.kind, "k": 1, "snapshots": len(self.snapshots)}

    @property
    def grid(self):
        return self.snapshots[0].grid

    @property
    def algebra(self):
        return self.snapshots[0].algebra


class CustomFamily(ConnectionFamily):
    """Family from user callables."""

    kind = "custom"

    def __init__(self, k: int, evaluate: Callable, partials: Callable, label: str = "custom"):
        self.k, self._eval, self._partials, self.label = k, evaluate, partials, label

    def evaluate(self, u):
        return self._eval(u)

    def partials(self, u):
        return list(self._partials(u))

    def describe(self):
        return {"kind": self.kind, "k": self.k, "label": self.label}
