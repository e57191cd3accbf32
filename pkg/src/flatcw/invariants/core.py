"""beta_k, Lambda_k and the routes that compute or cross-check them."""

from __future__ import annotations

import csv
import itertools
import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .. import forms as _forms
from ..connection import FLAT_TOL, Connection, curvature, flatness_residual
from ..errors import DegreeError, DimensionError, NonFlatError, OpenLoopError
from ..forms import (GridForm, PeriodVector, closed_tolerance, closure_residual, exterior_derivative,
                     integrate, period_vector, poly_wedge, wedge)
from ..lie import InvariantPolynomial, build_trace_polynomial
from .families import ConnectionFamily, GaugedLoop, GaugeLoop, Loop
from .quadrature import ParameterDomain, gauss_legendre

__all__ = [
    "beta",
    "beta_variation",
    "d_beta_next",
    "InvariantReport",
    "lambda_",
    "lambda_form_only",
    "lambda_via_product",
    "Transgression",
    "transgression",
    "lambda_k1_closed_form",
    "lambda_k2_closed_form",
    "k1_coefficient",
    "k1_t_integral",
    "k2_coefficient",
    "cone_t_integral",
    "gauge_loop_degree",
    "atiyah_bott_pairing",
    "mod_Z_reduce",
    "distance_to_integers",
    "pairwise_sum",
    "mixed_poly_wedge",
]


# reductions ---------------------------------------------------------------------------

def pairwise_sum(arrays: list):
    """Tree sum in a fixed order, independent of how the terms were produced."""
    if not arrays:
        raise ValueError("nothing to sum")
    items = list(arrays)
    while len(items) > 1:
        nxt = [items[i] + items[i + 1] for i in range(0, len(items) - 1, 2)]
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _map_ordered(fn, items, workers: int | None):
    workers = workers or _forms._THREADS
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# beta ----------------------------------------------------------------------------------

def _check_slots(p: InvariantPolynomial, A, xis):
    for xi in xis:
        if not isinstance(xi, GridForm) or not xi.is_lie or xi.degree != 1:
            raise DimensionError("tangent vectors are Lie-valued 1-forms")
        if xi.grid != A.grid:
            raise DimensionError("tangent vector on a different grid")
        if xi.algebra.name != p.algebra.name:
            raise DimensionError("tangent vector over a different algebra")
    if A.algebra.name != p.algebra.name:
        raise DimensionError("connection and polynomial use different algebras")


def beta(p: InvariantPolynomial, A: Connection, *xis: GridForm, F: GridForm | None = None) -> GridForm:
    """beta_k(A)(xi_1..xi_k) = N_{r,k} p(xi_1, ..., xi_k, F^A, ..., F^A), a (2r-k)-form."""
    r, k = p.degree, len(xis)
    A = A if isinstance(A, Connection) else Connection(A)
    _check_slots(p, A, xis)
    q = 2 * r - k
    if q < 0:
        raise DegreeError(f"k = {k} exceeds 2r = {2 * r}")
    if q > A.grid.n:
        raise DimensionError(f"2r - k = {q} exceeds the torus dimension {A.grid.n}")
    if k > r:
        return GridForm.zeros(A.grid, q)
    if F is None and k < r:
        F = curvature(A)
    return p.N(k) * poly_wedge(p, list(xis) + [F] * (r - k))


def beta_variation(p: InvariantPolynomial, A: Connection, xis, t: float = 1e-4) -> GridForm:
    """Alternating directional derivative sum_i (-1)^i D_{xi_i} beta_k(xi_0..^i..xi_k).

    ``xis`` holds k + 1 tangent vectors; derivatives are central differences
    with step t (beta is polynomial in the base point, so the error is O(t^2)).
    """
    xis = list(xis)
    if not xis:
        raise DimensionError("need at least one direction")
    terms = []
    for i, xi in enumerate(xis):
        rest = xis[:i] + xis[i + 1:]
        plus = beta(p, A + t * xi, *rest)
        minus = beta(p, A - t * xi, *rest)
        term = (plus - minus) / (2 * t)
        terms.append(term if i % 2 == 0 else -term)
    return pairwise_sum(terms)


def d_beta_next(p: InvariantPolynomial, A: Connection, xis) -> GridForm:
    """d o beta_{k+1}(A)(xi_0, ..., xi_k) on the torus."""
    b = beta(p, A, *xis)
    if b.degree == b.grid.n:
        raise DegreeError("beta_{k+1} is top degree; its d vanishes identically")
    return exterior_derivative(b)


# reports --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class InvariantReport:
    lambda_form: GridForm
    periods: PeriodVector | None
    closure_residual: float
    closure_tolerance: float
    validated: bool
    boundary_flatness: float
    metadata: dict
    node_norms: tuple = field(default=())

    @property
    def closed(self) -> bool:
        return self.closure_residual <= self.closure_tolerance

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "closure_residual": float(self.closure_residual),
            "closure_tolerance": float(self.closure_tolerance),
            "closed": bool(self.closed),
            "validated": bool(self.validated),
            "boundary_flatness": float(self.boundary_flatness),
            "periods": self.periods.to_json() if self.periods is not None else None,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def write_csv(self, fh) -> None:
        """Per-node integrand norms, for convergence diagnostics."""
        w = csv.writer(fh, lineterminator="\n")
        k = len(self.node_norms[0][0]) if self.node_norms else 0
        w.writerow([f"u{a}" for a in range(k)] + ["weight", "integrand_max_norm"])
        for u, wt, nrm in self.node_norms:
            w.writerow([repr(float(x)) for x in u] + [repr(float(wt)), repr(float(nrm))])


def _as_real_form(omega: GridForm, tol: float = 1e-11) -> GridForm:
    return omega.real_if_close(tol)


def _boundary_flatness(family: ConnectionFamily, domain: ParameterDomain) -> float:
    pts = family.boundary_points(domain)
    return max((flatness_residual(family.evaluate(u)) for u in pts), default=0.0)


def _node_integrands(p, family, domain, workers):
    pts = list(domain.points())

    def one(item):
        u, w = item
        return beta(p, family.evaluate(u), *family.partials(u))

    return pts, _map_ordered(one, pts, workers)


def lambda_form_only(p: InvariantPolynomial, k: int, family: ConnectionFamily,
                     domain: ParameterDomain | None = None, workers: int | None = None) -> GridForm:
    """The form sum_u w_u beta_k(f(u))(d_1 f, ..., d_k f) without diagnostics."""
    return _lambda_sum(p, k, family, domain, workers)[0]


def _lambda_sum(p, k, family, domain, workers):
    if family.k != k:
        raise DimensionError(f"family has {family.k} parameters, k = {k}")
    domain = domain or family.default_domain()
    if domain.k != k:
        raise DimensionError("domain dimension does not match k")
    q = 2 * p.degree - k
    grid = family.grid
    if q > grid.n or q < 0:
        raise DimensionError(f"2r - k = {q} must lie in 0..{grid.n}")
    pts, vals = _node_integrands(p, family, domain, workers)
    total = pairwise_sum([w * b for (u, w), b in zip(pts, vals)])
    norms = tuple((u, w, b.max_norm()) for (u, w), b in zip(pts, vals))
    return _as_real_form(total), domain, norms


def lambda_(p: InvariantPolynomial, k: int, family: ConnectionFamily, domain: ParameterDomain | None = None,
            flat_tol: float = FLAT_TOL, workers: int | None = None) -> InvariantReport:
    """Lambda_k^p(f) by quadrature of beta_k over the parameter domain."""
    form, domain, norms = _lambda_sum(p, k, family, domain, workers)
    flat = _boundary_flatness(family, domain)
    if flat > flat_tol:
        warnings.warn(f"family boundary is not flat (curvature {flat:.3e} > {flat_tol:.1e}); "
                      "the result is reported unvalidated", stacklevel=2)
    res = closure_residual(form)
    tol = closed_tolerance(form)
    periods = None
    if res <= tol:
        periods = period_vector(form, check_closed=False, normalization=p.normalization)
        if np.iscomplexobj(periods.values):
            try:
                periods = periods.real()
            except ValueError:
                pass
    meta = {
        "polynomial": p.descriptor,
        "normalization": p.normalization,
        "r": p.degree,
        "k": k,
        "form_degree": form.degree,
        "algebra": p.algebra.name,
        "grid": {"n": form.grid.n, "N": form.grid.N},
        "family": family.describe(),
        "domain": domain.describe(),
        "flat_tolerance": flat_tol,
    }
    return InvariantReport(form, periods, res, tol, flat <= flat_tol, flat, meta, norms)


# mixed forms on T x M ----------------------------------------------------------------

def _perm_sign(seq) -> int:
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def _slot_choices(slots, n_total):
    """Yield (choice, multiplicity); runs of one repeated even-degree slot are enumerated as multisets."""
    groups = []
    for s in slots:
        if groups and s is groups[-1][0]:
            groups[-1][1] += 1
        else:
            groups.append([s, 1])
    per_group = []
    for s, count in groups:
        items = sorted(s.items())
        even = all((len(J) + a.degree) % 2 == 0 for J, a in items)
        if count > 1 and even:
            opts = []
            for combo in itertools.combinations_with_replacement(range(len(items)), count):
                mult = math.factorial(count)
                for c in set(combo):
                    mult //= math.factorial(combo.count(c))
                opts.append(([items[c] for c in combo], mult))
        else:
            opts = [(list(c), 1) for c in itertools.product(items, repeat=count)]
        per_group.append(opts)
    for picks in itertools.product(*per_group):
        choice, mult = [], 1
        for items, m in picks:
            choice.extend(items)
            mult *= m
        yield choice, mult


def mixed_poly_wedge(p: InvariantPolynomial, slots, n: int, want=None) -> dict:
    """p(w_1, ..., w_r) for mixed forms w = sum_J du^J ^ alpha_J (du's on the left).

    Each slot is a dict {J: Lie-valued GridForm}.  Returns {J: scalar GridForm}
    restricted to the keys in ``want`` when given.
    """
    out = {}
    for choice, mult in _slot_choices(slots, len(slots)):
        Js = [J for J, _ in choice]
        alphas = [a for _, a in choice]
        flat = [j for J in Js for j in J]
        if len(set(flat)) != len(flat):
            continue
        key = tuple(sorted(flat))
        if want is not None and key not in want:
            continue
        if sum(a.degree for a in alphas) > n:
            continue
        sign, mdeg = 1, 0
        for J, a in zip(Js, alphas):
            if len(J) % 2 and mdeg % 2:
                sign = -sign
            mdeg += a.degree
        sign *= _perm_sign(flat)
        term = (sign * mult) * poly_wedge(p, alphas)
        out[key] = term if key not in out else out[key] + term
    return out


def _fiber_sign(k: int) -> int:
    return -1 if (k * (k - 1) // 2) % 2 else 1


def _hat_curvature(family: ConnectionFamily, u) -> dict:
    A = family.evaluate(u)
    blocks = {(): curvature(A)}
    for a, d in enumerate(family.partials(u)):
        blocks[(a,)] = d
    return blocks


def lambda_via_product(p: InvariantPolynomial, k: int, family: ConnectionFamily,
                       domain: ParameterDomain | None = None, workers: int | None = None) -> GridForm:
    """Lambda from p(F-hat) of the product connection on T x M, integrated over T."""
    if family.k != k:
        raise DimensionError(f"family has {family.k} parameters, k = {k}")
    domain = domain or family.default_domain()
    q = 2 * p.degree - k
    grid = family.grid
    if q > grid.n or q < 0:
        raise DimensionError(f"2r - k = {q} must lie in 0..{grid.n}")
    top = tuple(range(k))
    pts = list(domain.points())

    def one(item):
        u, w = item
        val = mixed_poly_wedge(p, [_hat_curvature(family, u)] * p.degree, grid.n, want={top})
        return val.get(top, GridForm.zeros(grid, q))

    vals = _map_ordered(one, pts, workers)
    total = pairwise_sum([w * v for (u, w), v in zip(pts, vals)])
    return _as_real_form(_fiber_sign(k) * total)


# transgression ----------------------------------------------------------------------

class Transgression:
    """theta(A-hat, A_ref) = r int_0^1 p(eta, F_tau, ..., F_tau) dtau on T x M.

    eta = f(u) - A_ref (no du component) and F_tau is the curvature of
    A_ref + tau eta on T x M: its M-block is F^{A_ref + tau eta} and its
    du^a-block is tau d_a f.
    """

    def __init__(self, p: InvariantPolynomial, family: ConnectionFamily, A_ref: Connection,
                 tau_order: int | None = None, fd_step: float = 1e-3):
        self.p, self.family, self.A_ref = p, family, A_ref
        # the tau integrand is a polynomial of degree 2(r - 1)
        self.tau_order = max(tau_order or 0, p.degree + 1, 4)
        self.tau_nodes, self.tau_weights = gauss_legendre(self.tau_order)
        self.fd_step = fd_step
        self.grid = A_ref.grid

    def at(self, u, want=None) -> dict:
        """Components {J: theta_J} at parameter point u (optionally only keys in ``want``)."""
        p, r = self.p, self.p.degree
        A = self.family.evaluate(u)
        eta = A - self.A_ref
        parts = self.family.partials(u)
        acc = {}
        for tau, w in zip(self.tau_nodes, self.tau_weights):
            Ft = {(): curvature(self.A_ref + tau * eta)}
            for a, d in enumerate(parts):
                Ft[(a,)] = tau * d
            val = mixed_poly_wedge(p, [{(): eta}] + [Ft] * (r - 1), self.grid.n, want)
            for J, f in val.items():
                acc.setdefault(J, []).append((r * w) * f)
        return {J: _as_real_form(pairwise_sum(v)) for J, v in acc.items()}

    def _partial_u(self, u, a: int) -> dict:
        h = self.fd_step

        def shifted(dv):
            v = list(u)
            v[a] += dv
            return self.at(tuple(v))

        samples = [shifted(-2 * h), shifted(-h), shifted(h), shifted(2 * h)]
        coef = [1, -8, 8, -1]
        keys = set().union(*samples)
        out = {}
        for J in keys:
            terms = [c * s[J] for c, s in zip(coef, samples) if J in s]
            out[J] = pairwise_sum(terms) / (12 * h)
        return out

    def exactness_residual(self, u) -> float:
        """max over components of |p(F-hat) - p(F_ref) - d theta| at parameter point u."""
        p, n, k = self.p, self.grid.n, self.family.k
        lhs = mixed_poly_wedge(p, [_hat_curvature(self.family, u)] * p.degree, n)
        if 2 * p.degree <= n:
            ref = poly_wedge(p, [curvature(self.A_ref)] * p.degree)
            lhs[()] = lhs[()] - ref if () in lhs else -ref
        theta = self.at(u)
        dtheta = {}
        for J, f in theta.items():
            if f.degree < n:
                df = exterior_derivative(f)
                dtheta[J] = dtheta.get(J, 0 * df) + (df if len(J) % 2 == 0 else -df)
        for a in range(k):
            for J, f in self._partial_u(u, a).items():
                if a in J:
                    continue
                K = tuple(sorted(J + (a,)))
                sign = -1 if sum(1 for j in J if j < a) % 2 else 1
                dtheta[K] = dtheta[K] + sign * f if K in dtheta else sign * f
        res = 0.0
        for K in set(lhs) | set(dtheta):
            a = lhs.get(K)
            b = dtheta.get(K)
            diff = a - b if (a is not None and b is not None) else (a if a is not None else b)
            res = max(res, diff.max_norm())
        return res

    def boundary_integral(self, domain: ParameterDomain | None = None) -> GridForm:
        """sigma_k sum_a (-1)^a int over the faces u_a = 1 minus u_a = 0 of theta_{[k] minus a}."""
        k = self.family.k
        domain = domain or self.family.default_domain()
        q = 2 * self.p.degree - k
        terms = []
        for a, ax in enumerate(domain.axes):
            if ax.periodic:
                continue
            J = tuple(j for j in range(k) if j != a)
            face = domain.face(a)
            rest = list(face.points()) if face is not None else [((), 1.0)]
            sign = _fiber_sign(k) * (-1 if a % 2 else 1)
            for v, s in ((1.0, sign), (0.0, -sign)):
                for r_u, w in rest:
                    u = r_u[:a] + (v,) + r_u[a:]
                    th = self.at(u, want={J}).get(J)
                    if th is not None:
                        terms.append((s * w) * th)
        if not terms:
            return GridForm.zeros(self.grid, q)
        return _as_real_form(pairwise_sum(terms))


def transgression(p: InvariantPolynomial, family: ConnectionFamily, A_ref: Connection,
                  tau_order: int | None = None) -> Transgression:
    return Transgression(p, family, A_ref, tau_order)


# closed forms --------------------------------------------------------------------------

def _require_flat(A: Connection, what: str, tol: float = FLAT_TOL):
    res = flatness_residual(A)
    if res > tol:
        raise NonFlatError(res, tol, what)


def k1_coefficient(r: int) -> float:
    """N_{r,1} 2^{1-r} int_0^1 (t^2 - t)^{r-1} dt, the scalar in front of p(xi, [xi^xi], ...)."""
    return r * 2.0 ** (1 - r) * k1_t_integral(r)


def k1_t_integral(r: int) -> float:
    """int_0^1 (t^2 - t)^{r-1} dt by Gauss quadrature (-1/6 for r = 2)."""
    x, w = gauss_legendre(max(8, r + 2))
    return float(np.dot(w, (x * x - x) ** (r - 1)))


def cone_t_integral(r: int, variant: str = "t^2-t") -> float:
    """int_0^1 t q(t)^{r-2} dt with q = t^2 - t (the cone curvature profile) or q = t^2 - 1."""
    x, w = gauss_legendre(max(8, r + 2))
    if variant == "t^2-t":
        q = x * x - x
    elif variant == "t^2-1":
        q = x * x - 1
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return float(np.dot(w, x * q ** (r - 2)))


def k2_coefficient(r: int) -> float:
    """-N_{r,2} 2^{2-r} int_0^1 t (t^2 - t)^{r-2} dt, the scalar in front of int p(xi, xi', [xi^xi], ...) ds."""
    return -(r * (r - 1)) * 2.0 ** (2 - r) * cone_t_integral(r)


def lambda_k1_closed_form(p: InvariantPolynomial, A0: Connection, A1: Connection,
                          check_flat: bool = True) -> GridForm:
    """Lambda_1 on the straight line between flat A0 and A1."""
    if check_flat:
        _require_flat(A0, "A0")
        _require_flat(A1, "A1")
    r = p.degree
    xi = A1 - A0
    if r == 1:
        return _as_real_form(poly_wedge(p, [xi]))
    xx = wedge(xi, xi, "bracket")
    return _as_real_form(k1_coefficient(r) * poly_wedge(p, [xi] + [xx] * (r - 1)))


def lambda_k2_closed_form(p: InvariantPolynomial, A0: Connection, loop: Loop,
                          domain: ParameterDomain | None = None, check_flat: bool = True) -> GridForm:
    """Lambda_2 on the cone (1 - t) A0 + t A(s) over a loop of flat connections."""
    r = p.degree
    if r < 2:
        raise DegreeError("the k = 2 closed form needs r >= 2")
    domain = domain or ParameterDomain.cylinder()
    s_axis = domain.axes[0]
    if (loop(0.0) - loop(1.0)).max_norm() > 1e-10:
        raise OpenLoopError("loop does not close")
    if check_flat:
        _require_flat(A0, "apex")
    terms = []
    for s, w in zip(s_axis.nodes, s_axis.weights):
        As = loop(float(s))
        if check_flat:
            _require_flat(As, f"A({float(s):.4f})")
        xi = As - A0
        slots = [xi, loop.derivative(float(s))]
        if r > 2:
            slots += [wedge(xi, xi, "bracket")] * (r - 2)
        terms.append(w * poly_wedge(p, slots))
    return _as_real_form(k2_coefficient(r) * pairwise_sum(terms))


# gauge loops, pairings, periods mod Z -------------------------------------------------

def gauge_loop_degree(p: InvariantPolynomial, gauge_loop: GaugeLoop, A0: Connection,
                      loop_nodes: int = 64) -> complex | float:
    """int_M int_0^1 p(A(s), A'(s)) ds with A(s) = Phi(s) . A0 on T^2."""
    if A0.grid.n != 2:
        raise DimensionError("gauge_loop_degree needs n = 2")
    if p.degree != 2:
        raise DimensionError("gauge_loop_degree needs a degree-2 polynomial")
    from .families import ConstantLoop
    loop = GaugedLoop(ConstantLoop(A0), gauge_loop)
    vals = []
    for j in range(loop_nodes):
        s = j / loop_nodes
        vals.append(integrate(poly_wedge(p, [loop(s).form, loop.derivative(s)])) / loop_nodes)
    total = pairwise_sum(vals)
    if abs(np.imag(total)) <= 1e-12 * (1 + abs(total)):
        return float(np.real(total))
    return complex(total)


def atiyah_bott_pairing(xi1: GridForm, xi2: GridForm) -> complex | float:
    """int_{T^2} tr(xi_1 ^ xi_2) for u(m)-valued 1-forms."""
    if xi1.grid.n != 2:
        raise DimensionError("the pairing is defined on T^2")
    if xi1.algebra is None or xi1.algebra.kind != "u_m":
        raise DimensionError("the pairing needs u(m)-valued forms")
    tr2 = build_trace_polynomial(xi1.algebra, [2], descriptor="tr2")
    val = integrate(wedge(xi1, xi2, tr2))
    if abs(np.imag(val)) <= 1e-14 * (1 + abs(val)):
        return float(np.real(val))
    return complex(val)


def mod_Z_reduce(periods: PeriodVector, tol: float = 1e-9) -> PeriodVector:
    """Reduce real periods into [0, 1); the polynomial normalisation is carried along."""
    vals = np.asarray(periods.values)
    if np.iscomplexobj(vals):
        if np.abs(vals.imag).max(initial=0.0) > tol:
            raise ValueError("mod Z reduction needs real periods")
        vals = vals.real
    red = vals - np.floor(vals)
    red[red >= 1.0] -= 1.0
    return PeriodVector(periods.degree, periods.subsets, red, periods.normalization)


def distance_to_integers(values) -> float:
    """max_i |v_i - round(v_i)| for real values."""
    vals = np.real_if_close(np.asarray(values), tol=1e6)
    if np.iscomplexobj(vals):
        return float(np.abs(vals - np.round(vals.real)).max(initial=0.0))
    return float(np.abs(vals - np.round(vals)).max(initial=0.0))
