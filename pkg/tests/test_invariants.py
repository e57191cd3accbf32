import io
import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatcw import (ConfigError, Connection, GaugeField, DegreeError, DimensionError, GridForm, NonFlatError, OpenLoopError,
                    TorusGrid, build_trace_polynomial, preset_polynomial, su2, u)
from flatcw.connection import cartan_flat, curvature, gauge_transform, random_connection, random_tangent, winding_gauge
from flatcw.forms import PeriodVector, poly_wedge
from flatcw.invariants import (CartanLoop, Cone, ConstantLoop, CustomFamily, GaugedLoop, ParameterDomain, StraightLine,
                               Tabulated, atiyah_bott_pairing, beta, beta_variation, cone_t_integral,
                               cubic_reparametrization, d_beta_next, distance_to_integers, gauge_loop_degree,
                               gauss_legendre, k1_coefficient, k1_t_integral, k2_coefficient, lambda_,
                               lambda_k1_closed_form, lambda_k2_closed_form, lambda_via_product, mod_Z_reduce,
                               quaternion_gauge_loop, transgression, trapezoid_periodic, winding_gauge_loop)
from helpers import H1, Y, Z, diag, su2_line

seeds = st.integers(0, 2**32 - 1)
B1, B2, B3 = np.eye(3)


def tr2(alg):
    return build_trace_polynomial(alg, [2], descriptor="tr2")


# beta ------------------------------------------------------------------------------

def test_beta_hand_examples():
    g, a = TorusGrid(2, 8), su2()
    p = preset_polynomial("su2_inner_product", a)
    A = Connection.zero(g, a)
    x1 = GridForm.from_components(g, 1, {(0,): B1}, a)
    x2 = GridForm.from_components(g, 1, {(1,): B2}, a)
    x2b = GridForm.from_components(g, 1, {(1,): B1}, a)
    assert beta(p, A, x1, x2).max_norm() == 0.0
    b = beta(p, A, x1, x2b)
    assert b.degree == 2 and np.all(b.data == 2.0)


def test_beta_zero_is_chern_weil(rng):
    g, a = TorusGrid(4, 8), u(2)
    p = tr2(a)
    A = random_connection(g, a, rng, max_mode=1)
    F = curvature(A)
    assert (beta(p, A) - poly_wedge(p, [F, F])).max_norm() == 0.0
    flat = cartan_flat(g, a, [diag(0.1, 0.2)] * 4)
    assert beta(p, flat).max_norm() == 0.0


@pytest.mark.parametrize("extra", [1, 2])
def test_beta_vanishes_above_r(extra, rng):
    g, a = TorusGrid(4, 8), u(2)
    p = tr2(a)
    A = random_connection(g, a, rng, max_mode=1)
    xis = [random_tangent(g, a, rng, max_mode=1) for _ in range(p.degree + extra)]
    b = beta(p, A, *xis)
    assert b.degree == 2 * p.degree - len(xis)
    assert not np.any(b.data)


def test_beta_errors(rng):
    g, a = TorusGrid(2, 8), su2()
    p = preset_polynomial("su2_inner_product", a)
    A = Connection.zero(g, a)
    with pytest.raises(DimensionError):
        beta(preset_polynomial("u2_p2p1", u(2)), Connection.zero(g, u(2)))
    with pytest.raises(DegreeError):
        beta(p, A, *[random_tangent(g, a, rng, max_mode=1)] * 5)
    with pytest.raises(DimensionError):
        beta(p, A, GridForm.zeros(TorusGrid(2, 16), 1, a))
    with pytest.raises(DimensionError):
        beta(p, A, GridForm.zeros(g, 1, u(2)))


@settings(max_examples=10)
@given(seed=seeds, k=st.integers(0, 1))
def test_beta_vanishes_on_flat(seed, k):
    rng = np.random.default_rng(seed)
    g, a = TorusGrid(4, 8), u(2)
    p = tr2(a)
    w = rng.integers(-2, 3, size=4)
    A = cartan_flat(g, a, [diag(*rng.normal(size=2)) for _ in range(4)])
    A = gauge_transform(winding_gauge(g, a, w, H1), A)
    A = gauge_transform(GaugeField.constant(g, a, a.random_group_element(rng)), A)
    xis = [random_tangent(g, a, rng, max_mode=1) for _ in range(k)]
    assert beta(p, A, *xis).max_norm() <= 1e-9


# the alternating variation identity, in the form that holds with N_{r,k} included ---------

@pytest.mark.parametrize("poly,k", [("tr2", 0), ("tr2", 1), ("u2_p2p1", 2)])
def test_variation_equals_d_of_next_beta(poly, k, rng):
    a = u(2)
    g = TorusGrid(4, 8)
    p = tr2(a) if poly == "tr2" else preset_polynomial(poly, a)
    A = random_connection(g, a, rng, max_mode=1, amplitude=0.3)
    xis = [random_tangent(g, a, rng, max_mode=1, amplitude=0.3) for _ in range(k + 1)]
    lhs = beta_variation(p, A, xis)
    rhs = d_beta_next(p, A, xis)
    assert (lhs - rhs).max_norm() <= 1e-6


def test_variation_vanishes_at_k_equals_r(rng):
    a = u(2)
    g = TorusGrid(3, 8)
    p = tr2(a)
    A = random_connection(g, a, rng, max_mode=1, amplitude=0.3)
    xis = [random_tangent(g, a, rng, max_mode=1, amplitude=0.3) for _ in range(3)]
    assert beta_variation(p, A, xis).max_norm() <= 1e-6
    with pytest.raises(DegreeError):
        d_beta_next(p, A, xis[:1])


# Lambda -----------------------------------------------------------------------------

def test_constant_family_is_zero():
    g, a = TorusGrid(3, 8), su2()
    A = cartan_flat(g, a, [B1 * 0.3, B1 * 0.1, B1])
    rep = lambda_(preset_polynomial("su2_inner_product", a), 1, StraightLine(A, A))
    assert rep.lambda_form.max_norm() == 0.0
    assert rep.validated and rep.closed


def test_k1_routes_agree():
    fam = su2_line()
    p = preset_polynomial("su2_inner_product", su2())
    rep = lambda_(p, 1, fam)
    L = rep.lambda_form
    assert L.degree == 3 and L.max_norm() > 1.0
    assert (lambda_via_product(p, 1, fam) - L).max_norm() <= 1e-8
    assert (transgression(p, fam, fam.A0).boundary_integral() - L).max_norm() <= 1e-8
    assert (lambda_k1_closed_form(p, fam.A0, fam.A1) - L).max_norm() <= 1e-8


def test_su2_k1_is_minus_determinant():
    # with this codebase's conventions the su(2) k = 1 form is -det(xi) dx^1 ^ dx^2 ^ dx^3
    for N in (16, 32):
        fam = su2_line(N)
        L = lambda_(preset_polynomial("su2_inner_product", su2()), 1, fam).lambda_form
        xi = (fam.A1 - fam.A0).data
        det = np.linalg.det(np.moveaxis(xi, (0, 1), (-2, -1)))
        assert np.abs(L.data[0] + det).max() <= 1e-8


def test_k1_closed_form_constants():
    assert k1_t_integral(2) == pytest.approx(-1 / 6, abs=1e-14)
    assert k1_t_integral(3) == pytest.approx(1 / 30, abs=1e-14)
    assert k1_coefficient(2) == pytest.approx(-1 / 6, abs=1e-14)
    assert k1_coefficient(1) == pytest.approx(1.0)


def test_k1_closed_form_abelian_and_nonflat():
    g, a = TorusGrid(3, 8), u(1)
    p = build_trace_polynomial(a, [2])
    A0 = Connection.from_components(g, a, {0: [0.3], 1: [0.1]})
    A1 = Connection.from_components(g, a, {0: [-0.2], 2: [0.9]})
    assert lambda_k1_closed_form(p, A0, A1).max_norm() == 0.0
    with pytest.raises(NonFlatError):
        lambda_k1_closed_form(preset_polynomial("su2_inner_product", su2()),
                              Connection.zero(TorusGrid(3, 8), su2()),
                              Connection.from_components(TorusGrid(3, 8), su2(), {0: B1, 1: B2}))


def test_cone_integrals():
    assert cone_t_integral(2) == pytest.approx(0.5, abs=1e-14)
    assert cone_t_integral(3) == pytest.approx(-1 / 12, abs=1e-14)
    for r in (3, 4):
        assert abs(cone_t_integral(r, "t^2-1") - (-1) ** r / (2 * (r - 1))) <= 1e-10
    assert k2_coefficient(2) == pytest.approx(-1.0, abs=1e-14)
    assert k2_coefficient(3) == pytest.approx(0.25, abs=1e-14)
    with pytest.raises(ValueError):
        cone_t_integral(3, "t")


def t2_cone(w=(1, 2)):
    g, a = TorusGrid(2, 16), u(2)
    base = CartanLoop(g, a, [diag(0.7, -0.3), diag(0.2, 0.5)], Y, central=[0.5, -0.3], Z=Z)
    loop = GaugedLoop(base, winding_gauge_loop(g, a, list(w), H1))
    return Cone(cartan_flat(g, a, [diag(0.1, 0.3), diag(0.4, -0.2)]), loop)


def test_k2_closed_form_matches_quadrature():
    fam = t2_cone()
    p = tr2(u(2))
    dom = ParameterDomain.cylinder(4, 16)
    rep = lambda_(p, 2, fam, dom)
    # commuting loops give a pointwise vanishing form at r = 2
    assert rep.lambda_form.max_norm() <= 1e-12
    assert (lambda_k2_closed_form(p, fam.A0, fam.loop, dom) - rep.lambda_form).max_norm() <= 1e-7
    const = lambda_k2_closed_form(p, fam.A0, ConstantLoop(fam.loop(0.0)), dom)
    assert const.max_norm() == 0.0


def test_k2_routes_on_quaternion_cone():
    g, a = TorusGrid(2, 32), su2()
    p = preset_polynomial("su2_inner_product", a, integral=True)
    A0 = Connection.zero(g, a)
    fam = Cone(A0, GaugedLoop(ConstantLoop(A0), quaternion_gauge_loop(g)))
    dom = ParameterDomain.cylinder(4, 16)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        rep = lambda_(p, 2, fam, dom)
    L = rep.lambda_form
    assert L.max_norm() > 1.0
    assert (lambda_k2_closed_form(p, A0, fam.loop, dom, check_flat=False) - L).max_norm() <= 1e-7
    assert (lambda_via_product(p, 2, fam, dom) - L).max_norm() <= 1e-7


def test_k2_closed_form_errors():
    g, a = TorusGrid(2, 8), u(2)
    A0 = Connection.zero(g, a)
    with pytest.raises(DegreeError):
        lambda_k2_closed_form(build_trace_polynomial(a, [1]), A0, ConstantLoop(A0))

    class Open(ConstantLoop):
        def __call__(self, s):
            return self.A * (1 + s)

    with pytest.raises(OpenLoopError):
        lambda_k2_closed_form(tr2(a), A0, Open(Connection.from_components(g, a, {0: diag(1, 0)})))


def test_lambda_errors_and_warnings():
    fam = su2_line(8)
    p = preset_polynomial("su2_inner_product", su2())
    with pytest.raises(DimensionError):
        lambda_(p, 2, fam)
    with pytest.raises(DimensionError):
        lambda_(build_trace_polynomial(u(2), [3]), 1, StraightLine(Connection.zero(TorusGrid(4, 8), u(2)),
                                                                    Connection.zero(TorusGrid(4, 8), u(2))))
    with pytest.raises(ConfigError):
        lambda_(p, 1, fam, ParameterDomain.interval(3))
    bad = StraightLine(fam.A0, Connection.from_components(fam.grid, su2(), {0: B1, 1: B2}))
    with pytest.warns(UserWarning):
        rep = lambda_(p, 1, bad)
    assert not rep.validated


def test_extension_independence_k1():
    fam = su2_line()
    p = preset_polynomial("su2_inner_product", su2(), integral=True)
    a = lambda_(p, 1, fam).periods.values
    b = lambda_(p, 1, cubic_reparametrization(fam)).periods.values
    assert np.abs(a - b).max() <= 1e-6


def test_transgression_trivial_cases(rng):
    g = TorusGrid(2, 8)
    a = u(1)
    p = build_trace_polynomial(a, [1], descriptor="tr")
    A0 = random_connection(g, a, rng, max_mode=1)
    A1 = random_connection(g, a, rng, max_mode=1)
    fam = StraightLine(A0, A1)
    th = transgression(p, fam, A0).at((0.4,))
    assert (th[()] - poly_wedge(p, [(0.4 * (A1 - A0))])).max_norm() <= 1e-14
    same = transgression(tr2(su2()), StraightLine(Connection.zero(g, su2()), Connection.zero(g, su2())),
                         Connection.zero(g, su2())).at((0.5,))
    assert all(f.max_norm() == 0 for f in same.values())


def test_transgression_exactness(rng):
    g, a = TorusGrid(3, 8), su2()
    p = preset_polynomial("su2_inner_product", a)
    fam = StraightLine(random_connection(g, a, rng, max_mode=1), random_connection(g, a, rng, max_mode=1))
    T = transgression(p, fam, random_connection(g, a, rng, max_mode=1))
    assert T.exactness_residual((0.37,)) <= 1e-7


# reports and quadrature --------------------------------------------------------------

def test_report_serialization():
    fam = su2_line(8)
    rep = lambda_(preset_polynomial("su2_inner_product", su2(), integral=True), 1, fam,
                  ParameterDomain.interval(4))
    d = json.loads(rep.to_json())
    assert d["metadata"]["k"] == 1 and d["metadata"]["r"] == 2
    assert d["metadata"]["normalization"] == "integral"
    assert d["metadata"]["family"]["kind"] == "straight_line"
    assert [e["subtorus"] for e in d["periods"]["entries"]] == [[0, 1, 2]]
    buf = io.StringIO()
    rep.write_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "u0,weight,integrand_max_norm" and len(rows) == 5


def test_quadrature_rules():
    x, w = gauss_legendre(8)
    assert abs(w.sum() - 1) <= 1e-14
    assert abs(np.dot(w, x**15) - 1 / 16) <= 1e-14
    x, w = gauss_legendre(4, panels=3)
    assert len(x) == 12 and abs(w.sum() - 1) <= 1e-14
    with pytest.raises(ConfigError):
        gauss_legendre(3)
    s, ws = trapezoid_periodic(8)
    assert s[0] == 0.0 and s[-1] < 1.0 and abs(ws.sum() - 1) <= 1e-15
    dom = ParameterDomain.cylinder(4, 8)
    assert dom.periodic == (True, False) and abs(dom.volume - 1) <= 1e-12
    assert sum(wt for _, wt in dom.points()) == pytest.approx(1.0, abs=1e-12)
    assert ParameterDomain.cube(3, 4).num_points() == 64


def test_straight_line_partials_are_constant():
    fam = su2_line(8)
    for t in (0.0, 0.3, 1.0):
        assert (fam.partials((t,))[0] - (fam.A1 - fam.A0)).max_norm() == 0.0


def test_tabulated_partials_converge(rng):
    g, a = TorusGrid(2, 8), su2()
    A0 = random_connection(g, a, rng, max_mode=1)
    xi = random_tangent(g, a, rng, max_mode=1)
    fam = CustomFamily(1, lambda uu: A0 + math.sin(2 * uu[0]) * xi,
                       lambda uu: [2 * math.cos(2 * uu[0]) * xi])
    errs = []
    for M in (8, 16, 32):
        tab = Tabulated.sample(fam, M)
        errs.append(max((tab.partials((t,))[0] - fam.partials((t,))[0]).max_norm() for t in (0.13, 0.5, 0.91)))
    assert errs[1] <= errs[0] / 4 and errs[2] <= errs[1] / 4


# gauge loops, pairing, periods mod Z ---------------------------------------------------

def test_gauge_loop_degree_u1():
    g, a = TorusGrid(2, 16), u(1)
    p = preset_polynomial("tr2", a, integral=True)
    loop = winding_gauge_loop(g, a, [1, 0], [2 * np.pi])
    d = gauge_loop_degree(p, loop, Connection.zero(g, a), 16)
    assert distance_to_integers([d]) <= 1e-6
    with pytest.raises(DimensionError):
        gauge_loop_degree(p, loop, Connection.zero(TorusGrid(3, 8), a))


def test_gauge_loop_degree_quaternion():
    g = TorusGrid(2, 32)
    p = preset_polynomial("su2_inner_product", su2(), integral=True)
    loop = quaternion_gauge_loop(g)
    d = gauge_loop_degree(p, loop, Connection.zero(g, su2()), 32)
    assert abs(d - round(d)) <= 1e-6 and round(d) != 0
    d2 = gauge_loop_degree(p, loop.concatenate(loop), Connection.zero(g, su2()), 64)
    assert abs(d2 - 2 * d) <= 1e-8


def test_atiyah_bott_pairing(rng):
    g = TorusGrid(2, 8)
    B = [1.0]
    x1 = GridForm.from_components(g, 1, {(0,): B}, u(1))
    x2 = GridForm.from_components(g, 1, {(1,): B}, u(1))
    assert atiyah_bott_pairing(x1, x2) == pytest.approx(-1.0, abs=1e-14)
    a = u(2)
    y1, y2 = random_tangent(g, a, rng, max_mode=1), random_tangent(g, a, rng, max_mode=1)
    assert abs(atiyah_bott_pairing(y1, y2) + atiyah_bott_pairing(y2, y1)) <= 1e-10
    assert abs(atiyah_bott_pairing(y1, y1)) <= 1e-10
    assert atiyah_bott_pairing(3.0 * y1, y2) == pytest.approx(3.0 * atiyah_bott_pairing(y1, y2), rel=1e-14)
    with pytest.raises(DimensionError):
        atiyah_bott_pairing(GridForm.zeros(TorusGrid(3, 8), 1, a), GridForm.zeros(TorusGrid(3, 8), 1, a))


def test_mod_z_reduce():
    pv = PeriodVector(1, ((0,), (1,)), np.array([0.25, 3.25]), "integral")
    red = mod_Z_reduce(pv)
    assert np.array_equal(red.values, [0.25, 0.25]) and red.normalization == "integral"
    assert not np.any(mod_Z_reduce(PeriodVector(1, ((0,), (1,)), np.array([2.0, -7.0]))).values)
    assert np.all(mod_Z_reduce(PeriodVector(1, ((0,),), np.array([-0.25]))).values == 0.75)
    with pytest.raises(ValueError):
        mod_Z_reduce(PeriodVector(1, ((0,),), np.array([0.5 + 0.5j])))
    assert distance_to_integers([1.9999999, -3.0]) == pytest.approx(1e-7)
