import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flatcw import (BidegreeError, Connection, DegreeError, DimensionError, GaugeField, GridForm, TorusGrid,
                    build_trace_polynomial, gl, u)
from flatcw.connection import random_connection, random_tangent, random_trig_field
from flatcw.dolbeault import (BigradedForm, ComplexStructure, beta_tilde, bidegree_project, dbar,
                              dbar_variation_residual, del_, f02_residual, lambda_tilde)
from flatcw.forms import exterior_derivative, wedge
from flatcw.invariants import CustomFamily, ParameterDomain, StraightLine, lambda_
from helpers import cone_domain, gauged_cone

seeds = st.integers(0, 2**32 - 1)
G4 = TorusGrid(4, 8)


def real_form(grid, q, rng):
    import math
    return GridForm(grid, q, random_trig_field(grid, rng, max_mode=1, lead_shape=(math.comb(grid.n, q),)))


def holo_connection(rng, grid=G4):
    """gl(2) connection with only dz components: A = a dz^1 + b dz^2."""
    a = gl(2)
    f = [random_trig_field(grid, rng, 1, (a.dim,), 0.5, complex_values=True) for _ in range(2)]
    return Connection.from_components(grid, a, {0: f[0], 1: 1j * f[0], 2: f[1], 3: 1j * f[1]})


def test_structure_needs_even_dimension():
    with pytest.raises(DimensionError):
        ComplexStructure(TorusGrid(3, 8))
    assert ComplexStructure(G4).m == 2


def test_frame_round_trip(rng):
    cs = ComplexStructure(G4)
    for q in range(5):
        w = real_form(G4, q, rng)
        back = cs.from_complex(cs.to_complex(w), q)
        assert np.abs(back.data - w.data).max() <= 1e-12


def test_projection_examples():
    g = TorusGrid(2, 8)
    dx = GridForm.from_components(g, 1, {(0,): 1.0})
    half_dz = GridForm.from_components(g, 1, {(0,): 0.5, (1,): 0.5j})
    assert (bidegree_project(dx, 1, 0) - half_dz).max_norm() <= 1e-15
    dz1 = GridForm.from_components(G4, 1, {(0,): 1.0, (1,): 1j})
    dz2 = GridForm.from_components(G4, 1, {(2,): 1.0, (3,): 1j})
    assert bidegree_project(wedge(dz1, dz2), 0, 2).max_norm() <= 1e-15
    with pytest.raises(BidegreeError):
        bidegree_project(dx, 1, 1)


@settings(max_examples=10)
@given(seed=seeds, q=st.integers(1, 3))
def test_partition_and_idempotence(seed, q):
    w = real_form(G4, q, np.random.default_rng(seed))
    split = BigradedForm.split(w)
    assert (split.reconstruct() - w).max_norm() <= 1e-12
    for (a, b), part in split.parts.items():
        assert (bidegree_project(part, a, b) - part).max_norm() <= 1e-12
        # real forms: conjugation swaps bidegrees
        assert (part.conj() - split[(b, a)]).max_norm() <= 1e-12


@settings(max_examples=10)
@given(seed=seeds, q=st.integers(0, 2))
def test_d_splits_and_dbar_squares_to_zero(seed, q):
    w = real_form(G4, q, np.random.default_rng(seed))
    assert (del_(w) + dbar(w) - exterior_derivative(w)).max_norm() <= 1e-10
    assert dbar(dbar(w)).max_norm() <= 1e-10


def test_dbar_examples():
    g = TorusGrid(2, 16)
    assert dbar(GridForm(g, 0, np.full((1,) + g.shape, 3.0))).max_norm() == 0.0
    x, _ = g.coords()
    f = np.exp(2j * np.pi * x)
    # d/dzbar = (d/dx + i d/dy) / 2, and dzbar = dx - i dy
    expect = GridForm.from_components(g, 1, {(0,): np.pi * 1j * f, (1,): np.pi * f})
    assert (dbar(GridForm(g, 0, f[None])) - expect).max_norm() <= 1e-9
    with pytest.raises(DegreeError):
        dbar(GridForm.zeros(g, 2))


def test_f02_residual_examples(rng):
    a = gl(2)
    xi = np.zeros(4)
    eta = np.zeros(4)
    xi[1], eta[2] = 1.0, 1.0  # E12 and E21
    comps = {0: xi, 1: -1j * xi, 2: eta, 3: -1j * eta}  # xi dzbar^1 + eta dzbar^2
    A = Connection.from_components(G4, a, comps)
    assert f02_residual(A) == pytest.approx(1.0, abs=1e-12)
    H = holo_connection(rng)
    assert f02_residual(H) <= 1e-8
    from flatcw.connection import curvature
    assert curvature(H).max_norm() > 1e-2
    flat = Connection.from_components(G4, u(2), {0: [0.3, 0.1, 0, 0], 2: [-0.2, 0.4, 0, 0]})
    assert f02_residual(flat) <= 1e-10


def test_lem02_vanishing(rng):
    p = build_trace_polynomial(gl(2), [1], descriptor="tr")
    A = holo_connection(rng)
    assert beta_tilde(p, A).max_norm() <= 1e-9
    xis = [random_tangent(G4, gl(2), rng, max_mode=1) for _ in range(2)]
    assert beta_tilde(p, A, *xis).max_norm() == 0.0


def test_beta_tilde_generic_nonzero(rng):
    p = build_trace_polynomial(gl(2), [1], descriptor="tr")
    A = random_connection(G4, gl(2), rng, max_mode=1)
    assert beta_tilde(p, A).max_norm() > 1e-3


@pytest.mark.parametrize("r,k", [(1, 0), (2, 2)])
def test_dbar_variation(r, k, rng):
    a = gl(2)
    p = build_trace_polynomial(a, [r], descriptor=f"tr{r}")
    A = random_connection(G4, a, rng, max_mode=1, amplitude=0.3)
    xis = [random_tangent(G4, a, rng, max_mode=1, amplitude=0.3) for _ in range(k + 1)]
    assert dbar_variation_residual(p, A, xis) <= 1e-6


def test_lambda_tilde_of_flat_family_is_projection():
    fam = gauged_cone()
    p = build_trace_polynomial(u(2), [2], descriptor="tr2")
    rep = lambda_(p, 2, fam, cone_domain())
    til = lambda_tilde(p, 2, fam, cone_domain())
    assert (til.lambda_form - bidegree_project(rep.lambda_form, 0, 2)).max_norm() <= 1e-8
    assert til.closure_residual <= 1e-7 and til.metadata["bidegree"] == [0, 2]
    assert not til.validated  # 1 < k < r fails for r = 2


def test_lambda_tilde_straight_line(rng):
    p = build_trace_polynomial(gl(2), [1], descriptor="tr")
    A0, A1 = holo_connection(rng), holo_connection(rng)
    rep = lambda_tilde(p, 1, StraightLine(A0, A1))
    assert rep.lambda_form.max_norm() <= 1e-12
    assert rep.closure_residual <= 1e-7


def test_lambda_tilde_gauge_invariance(rng):
    a = u(2)
    p = build_trace_polynomial(a, [2], descriptor="tr2")
    A0 = random_connection(G4, a, rng, max_mode=1, amplitude=0.3)
    x1, x2 = (random_tangent(G4, a, rng, max_mode=1, amplitude=0.3) for _ in range(2))

    def ev(uu):
        s, t = uu
        return A0 + t * (np.cos(2 * np.pi * s) * x1 + np.sin(2 * np.pi * s) * x2)

    def parts(uu):
        s, t = uu
        w = 2 * np.pi
        return [t * (-w * np.sin(w * s) * x1 + w * np.cos(w * s) * x2),
                np.cos(w * s) * x1 + np.sin(w * s) * x2]

    fam = CustomFamily(2, ev, parts)
    phi = GaugeField.constant(G4, a, a.random_group_element(rng))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r1 = lambda_tilde(p, 2, fam, ParameterDomain.cylinder(4, 8))
        r2 = lambda_tilde(p, 2, fam.gauge(phi), ParameterDomain.cylinder(4, 8))
    assert r1.lambda_form.max_norm() > 1e-3
    assert np.abs(r1.periods.values - r2.periods.values).max() <= 1e-8
    assert (r1.lambda_form - r2.lambda_form).max_norm() <= 1e-8
